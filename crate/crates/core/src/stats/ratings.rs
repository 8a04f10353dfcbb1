use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use super::{
    ab_agreement, wilcoxon_signed_rank, AbAgreement, AbTrial, Condition, Judgment, MosRating,
    PairKind, Result, StatsError, WilcoxonResult,
};

pub const RATINGS_HEADER: [&str; 4] = ["listener_id", "kind", "group_key", "value"];

/// One panel of the similarity grid: a conversion direction and the kind
/// of stimulus pair. Written `SOURCE>TARGET/KIND`, e.g. `M04>M12/VC_vs_T`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AbGroup {
    pub source: String,
    pub target: String,
    pub kind: PairKind,
}

impl AbGroup {
    /// Both speakers in id order, `A-B`.
    pub fn pair(&self) -> String {
        let (a, b) = if self.source <= self.target {
            (&self.source, &self.target)
        } else {
            (&self.target, &self.source)
        };
        format!("{a}-{b}")
    }

    pub fn direction(&self) -> String {
        format!("{}>{}", self.source, self.target)
    }
}

impl FromStr for AbGroup {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let bad = || format!("AB group key {s:?} is not SOURCE>TARGET/KIND");
        let (dir, kind) = s.trim().rsplit_once('/').ok_or_else(bad)?;
        let (source, target) = dir.split_once('>').ok_or_else(bad)?;
        if source.is_empty() || target.is_empty() || source == target {
            return Err(bad());
        }
        Ok(Self {
            source: source.into(),
            target: target.into(),
            kind: kind.parse()?,
        })
    }
}

impl fmt::Display for AbGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}>{}/{}", self.source, self.target, self.kind)
    }
}

/// Parsed ratings file. Rows of kind `mos` carry a condition and a 1-5
/// score; rows of kind `ab` carry an [`AbGroup`] key and a judgment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RatingSet {
    pub mos: Vec<MosRating>,
    pub ab: Vec<(AbGroup, AbTrial)>,
}

fn parse_err(line: usize, message: impl Into<String>) -> StatsError {
    StatsError::Parse {
        line,
        message: message.into(),
    }
}

impl RatingSet {
    pub fn from_reader<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header = rdr
            .headers()
            .map_err(|e| parse_err(1, e.to_string()))?
            .clone();
        if header.iter().map(str::trim).ne(RATINGS_HEADER) {
            return Err(parse_err(
                1,
                format!("header must be {}", RATINGS_HEADER.join(",")),
            ));
        }
        let mut set = RatingSet::default();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                parse_err(
                    e.position().map(|p| p.line() as usize).unwrap_or(0),
                    e.to_string(),
                )
            })?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            let f = |i: usize| rec.get(i).unwrap_or("").trim();
            let listener = f(0);
            if listener.is_empty() {
                return Err(parse_err(line, "empty listener_id"));
            }
            match f(1) {
                "mos" => {
                    let condition: Condition =
                        f(2).parse().map_err(|e: String| parse_err(line, e))?;
                    let score: u8 = f(3).parse().map_err(|_| {
                        parse_err(line, format!("MOS value {:?} is not an integer", f(3)))
                    })?;
                    set.mos.push(
                        MosRating::new(listener, condition, score)
                            .map_err(|e| parse_err(line, e.to_string()))?,
                    );
                }
                "ab" => {
                    let group: AbGroup = f(2).parse().map_err(|e: String| parse_err(line, e))?;
                    let judgment: Judgment =
                        f(3).parse().map_err(|e: String| parse_err(line, e))?;
                    let trial = AbTrial {
                        listener_id: listener.into(),
                        pair_kind: group.kind,
                        judgment,
                    };
                    set.ab.push((group, trial));
                }
                other => {
                    return Err(parse_err(
                        line,
                        format!("unknown kind {other:?}, expected mos or ab"),
                    ))
                }
            }
        }
        Ok(set)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(RATINGS_HEADER)?;
        for r in &self.mos {
            wr.write_record([
                r.listener_id.as_str(),
                "mos",
                r.condition.as_str(),
                &r.score.to_string(),
            ])?;
        }
        for (g, t) in &self.ab {
            wr.write_record([
                t.listener_id.as_str(),
                "ab",
                &g.to_string(),
                t.judgment.as_str(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityRow {
    pub group: AbGroup,
    pub agreement: AbAgreement,
}

/// Agreement per panel, ordered by pair, direction and kind. Each panel is
/// scored against its kind's natural expectation.
pub fn similarity_grid(rs: &RatingSet) -> Result<Vec<SimilarityRow>> {
    let mut groups: BTreeMap<(String, String, PairKind), (AbGroup, Vec<AbTrial>)> = BTreeMap::new();
    for (g, t) in &rs.ab {
        groups
            .entry((g.pair(), g.direction(), g.kind))
            .or_insert_with(|| (g.clone(), Vec::new()))
            .1
            .push(t.clone());
    }
    groups
        .into_values()
        .map(|(group, trials)| {
            Ok(SimilarityRow {
                agreement: ab_agreement(&trials, group.kind.expectation())?,
                group,
            })
        })
        .collect()
}

/// Scores of two conditions paired by listener, each listener contributing
/// the mean of their ratings in each condition.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedComparison {
    pub a: Condition,
    pub b: Condition,
    pub listeners: Vec<String>,
    pub a_scores: Vec<f64>,
    pub b_scores: Vec<f64>,
    /// `None` when every paired difference is zero.
    pub test: Option<WilcoxonResult>,
}

fn listener_means(ratings: &[MosRating], c: Condition) -> BTreeMap<&str, f64> {
    let mut acc: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for r in ratings.iter().filter(|r| r.condition == c) {
        let e = acc.entry(r.listener_id.as_str()).or_default();
        e.0 += r.score as f64;
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(k, (s, n))| (k, s / n as f64))
        .collect()
}

/// Pairs conditions `a` and `b` by listener. Both conditions must have been
/// rated by the same listeners.
pub fn paired_by_listener(
    ratings: &[MosRating],
    a: Condition,
    b: Condition,
) -> Result<PairedComparison> {
    let (ma, mb) = (listener_means(ratings, a), listener_means(ratings, b));
    if ma.is_empty() || mb.is_empty() {
        return Err(StatsError::Invalid(format!(
            "no ratings for {}",
            if ma.is_empty() { a } else { b }
        )));
    }
    if !ma.keys().eq(mb.keys()) {
        let only: Vec<&str> = ma
            .keys()
            .filter(|k| !mb.contains_key(*k))
            .chain(mb.keys().filter(|k| !ma.contains_key(*k)))
            .copied()
            .collect();
        return Err(StatsError::Invalid(format!(
            "{a} and {b} were rated by different listeners ({})",
            only.join(", ")
        )));
    }
    let listeners: Vec<String> = ma.keys().map(|k| k.to_string()).collect();
    let a_scores: Vec<f64> = ma.values().copied().collect();
    let b_scores: Vec<f64> = mb.values().copied().collect();
    let test = match wilcoxon_signed_rank(&a_scores, &b_scores) {
        Ok(r) => Some(r),
        Err(StatsError::NoTest) => None,
        Err(e) => return Err(e),
    };
    Ok(PairedComparison {
        a,
        b,
        listeners,
        a_scores,
        b_scores,
        test,
    })
}

pub fn wilcoxon_by_listener(
    rs: &RatingSet,
    pairs: &[(Condition, Condition)],
) -> Result<Vec<PairedComparison>> {
    pairs
        .iter()
        .map(|&(a, b)| paired_by_listener(&rs.mos, a, b))
        .collect()
}
