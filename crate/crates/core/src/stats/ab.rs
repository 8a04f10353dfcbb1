use std::fmt;
use std::str::FromStr;

use super::{Result, StatsError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PairKind {
    SourceVsSource,
    TargetVsTarget,
    SourceVsTarget,
    /// Converted sample against the source speaker (VC-D).
    VcVsSource,
    /// Converted sample against the target speaker (VC-S).
    VcVsTarget,
}

impl PairKind {
    pub const ALL: [PairKind; 5] = [
        PairKind::SourceVsSource,
        PairKind::TargetVsTarget,
        PairKind::SourceVsTarget,
        PairKind::VcVsSource,
        PairKind::VcVsTarget,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PairKind::SourceVsSource => "S_vs_S",
            PairKind::TargetVsTarget => "T_vs_T",
            PairKind::SourceVsTarget => "S_vs_T",
            PairKind::VcVsSource => "VC_vs_S",
            PairKind::VcVsTarget => "VC_vs_T",
        }
    }

    /// The answer a listener gives when the stimuli behave as intended:
    /// natural pairs from one speaker sound alike, two speakers sound
    /// different, and a converted sample sounds like the target and unlike
    /// the source.
    pub fn expectation(self) -> Expectation {
        match self {
            PairKind::SourceVsSource | PairKind::TargetVsTarget | PairKind::VcVsTarget => {
                Expectation::Same
            }
            PairKind::SourceVsTarget | PairKind::VcVsSource => Expectation::Different,
        }
    }
}

impl FromStr for PairKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        match s {
            "VC-D" => return Ok(PairKind::VcVsSource),
            "VC-S" => return Ok(PairKind::VcVsTarget),
            _ => {}
        }
        PairKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown pair kind {s:?}"))
    }
}

impl fmt::Display for PairKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Judgment {
    SameSure,
    SameNotSure,
    DifferentNotSure,
    DifferentSure,
}

impl Judgment {
    pub const ALL: [Judgment; 4] = [
        Judgment::SameSure,
        Judgment::SameNotSure,
        Judgment::DifferentNotSure,
        Judgment::DifferentSure,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Judgment::SameSure => "same_sure",
            Judgment::SameNotSure => "same_not_sure",
            Judgment::DifferentNotSure => "different_not_sure",
            Judgment::DifferentSure => "different_sure",
        }
    }

    pub fn says(self) -> Expectation {
        match self {
            Judgment::SameSure | Judgment::SameNotSure => Expectation::Same,
            _ => Expectation::Different,
        }
    }

    pub fn is_sure(self) -> bool {
        matches!(self, Judgment::SameSure | Judgment::DifferentSure)
    }
}

impl FromStr for Judgment {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Judgment::ALL
            .into_iter()
            .find(|j| j.as_str() == s.trim())
            .ok_or_else(|| format!("unknown judgment {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expectation {
    Same,
    Different,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbTrial {
    pub listener_id: String,
    pub pair_kind: PairKind,
    pub judgment: Judgment,
}

/// Agreement counts for one pair kind. Percentages are exact ratios of
/// these integers; the `reported_*` forms cut them to two decimals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AbAgreement {
    pub pair_kind: PairKind,
    pub expectation: Expectation,
    pub n: usize,
    pub matching: usize,
    pub matching_sure: usize,
    /// Indexed like [`Judgment::ALL`].
    pub counts: [usize; 4],
}

/// `100 k / n` truncated to two decimals, computed in integers so that
/// `14/30` gives `46.66`.
pub fn report_percent(k: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    ((10_000 * k as u64) / n as u64) as f64 / 100.0
}

impl AbAgreement {
    pub fn percent_matching(&self) -> f64 {
        100.0 * self.matching as f64 / self.n as f64
    }

    pub fn percent_not_matching(&self) -> f64 {
        100.0 * (self.n - self.matching) as f64 / self.n as f64
    }

    pub fn percent_matching_sure(&self) -> f64 {
        100.0 * self.matching_sure as f64 / self.n as f64
    }

    pub fn reported_matching(&self) -> f64 {
        report_percent(self.matching, self.n)
    }

    pub fn reported_matching_sure(&self) -> f64 {
        report_percent(self.matching_sure, self.n)
    }
}

/// Share of trials whose judgment agrees with `expectation`, with either
/// confidence and with sure answers only. All trials must share one pair
/// kind.
pub fn ab_agreement(trials: &[AbTrial], expectation: Expectation) -> Result<AbAgreement> {
    let first = trials
        .first()
        .ok_or_else(|| StatsError::Invalid("no AB trials".into()))?;
    if let Some(t) = trials.iter().find(|t| t.pair_kind != first.pair_kind) {
        return Err(StatsError::Invalid(format!(
            "mixed pair kinds {} and {}",
            first.pair_kind, t.pair_kind
        )));
    }
    let mut counts = [0; 4];
    for t in trials {
        counts[Judgment::ALL.iter().position(|j| *j == t.judgment).unwrap()] += 1;
    }
    let agrees = |j: &Judgment| j.says() == expectation;
    let matching = trials.iter().filter(|t| agrees(&t.judgment)).count();
    let matching_sure = trials
        .iter()
        .filter(|t| agrees(&t.judgment) && t.judgment.is_sure())
        .count();
    Ok(AbAgreement {
        pair_kind: first.pair_kind,
        expectation,
        n: trials.len(),
        matching,
        matching_sure,
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trials(kind: PairKind, spec: &[(Judgment, usize)]) -> Vec<AbTrial> {
        let mut out = Vec::new();
        for &(j, n) in spec {
            for _ in 0..n {
                out.push(AbTrial {
                    listener_id: format!("L{}", out.len() % 10),
                    pair_kind: kind,
                    judgment: j,
                });
            }
        }
        out
    }

    #[test]
    fn twenty_two_of_thirty() {
        let t = trials(
            PairKind::VcVsTarget,
            &[
                (Judgment::SameSure, 10),
                (Judgment::SameNotSure, 12),
                (Judgment::DifferentSure, 8),
            ],
        );
        let a = ab_agreement(&t, Expectation::Same).unwrap();
        assert_eq!(a.reported_matching(), 73.33);
        assert_eq!(a.percent_matching() + a.percent_not_matching(), 100.0);
    }

    #[test]
    fn truncation_not_rounding() {
        assert_eq!(report_percent(14, 30), 46.66);
        assert_eq!(report_percent(169, 300), 56.33);
        assert_eq!(report_percent(2, 3), 66.66);
    }

    #[test]
    fn sure_only() {
        let t = trials(
            PairKind::VcVsTarget,
            &[
                (Judgment::SameSure, 6),
                (Judgment::SameNotSure, 10),
                (Judgment::DifferentNotSure, 14),
            ],
        );
        let a = ab_agreement(&t, Expectation::Same).unwrap();
        assert_eq!(a.reported_matching_sure(), 20.0);
        assert_eq!(a.counts, [6, 10, 14, 0]);
    }

    #[test]
    fn none_matching_and_invalid_sets() {
        let t = trials(PairKind::VcVsSource, &[(Judgment::SameSure, 5)]);
        assert_eq!(
            ab_agreement(&t, Expectation::Different)
                .unwrap()
                .percent_matching(),
            0.0
        );
        assert!(ab_agreement(&[], Expectation::Same).is_err());
        let mut mixed = t.clone();
        mixed.extend(trials(PairKind::SourceVsTarget, &[(Judgment::SameSure, 1)]));
        assert!(ab_agreement(&mixed, Expectation::Same).is_err());
    }

    #[test]
    fn kinds_parse() {
        for k in PairKind::ALL {
            assert_eq!(k.as_str().parse::<PairKind>().unwrap(), k);
        }
        assert_eq!("VC-S".parse::<PairKind>().unwrap(), PairKind::VcVsTarget);
        assert_eq!(
            "VC-D".parse::<PairKind>().unwrap().expectation(),
            Expectation::Different
        );
    }
}
