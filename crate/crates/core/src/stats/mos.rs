use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{Condition, MosRating};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MosSummary {
    pub condition: Condition,
    pub n: usize,
    pub mean: f64,
    /// Two-sided 95% Student-t interval; `None` when `n = 1`.
    pub ci95: Option<(f64, f64)>,
}

impl MosSummary {
    pub fn half_width(&self) -> Option<f64> {
        self.ci95.map(|(lo, hi)| (hi - lo) / 2.0)
    }
}

/// `t_{0.975, df}`.
pub fn t_quantile_975(df: usize) -> f64 {
    StudentsT::new(0.0, 1.0, df as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975)
}

/// Interval for one sample of scores.
pub fn summarize(condition: Condition, scores: &[f64]) -> Option<MosSummary> {
    let n = scores.len();
    if n == 0 {
        return None;
    }
    let mean = scores.iter().sum::<f64>() / n as f64;
    let ci95 = (n > 1).then(|| {
        let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1) as f64;
        let h = t_quantile_975(n - 1) * var.sqrt() / (n as f64).sqrt();
        (mean - h, mean + h)
    });
    Some(MosSummary {
        condition,
        n,
        mean,
        ci95,
    })
}

/// Mean and interval per condition, in [`Condition::ALL`] order. Conditions
/// without ratings are left out with a warning.
pub fn mos_summary(ratings: &[MosRating]) -> Vec<MosSummary> {
    let mut out = Vec::new();
    for c in Condition::ALL {
        let scores: Vec<f64> = ratings
            .iter()
            .filter(|r| r.condition == c)
            .map(|r| r.score as f64)
            .collect();
        match summarize(c, &scores) {
            Some(s) => {
                if s.ci95.is_none() {
                    log::warn!("{c}: a single rating, confidence interval undefined");
                }
                out.push(s);
            }
            None => log::warn!("{c}: no ratings"),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ratings(c: Condition, scores: &[u8]) -> Vec<MosRating> {
        scores
            .iter()
            .enumerate()
            .map(|(i, &s)| MosRating::new(format!("L{i}"), c, s).unwrap())
            .collect()
    }

    #[test]
    fn t_quantiles_match_closed_forms() {
        let p: f64 = 0.975;
        // df = 1 is Cauchy; df = 2 has an algebraic inverse
        let t1 = (std::f64::consts::PI * (p - 0.5)).tan();
        let t2 = (2.0 * p - 1.0) / (2.0 * p * (1.0 - p)).sqrt();
        assert!((t_quantile_975(1) - t1).abs() < 1e-9);
        assert!((t_quantile_975(2) - t2).abs() < 1e-9);
        assert!((t_quantile_975(1) - 12.706).abs() < 1e-3);
    }

    #[test]
    fn constant_scores_zero_width() {
        let s = &mos_summary(&ratings(Condition::GtHigh, &[3; 10]))[0];
        assert_eq!(s.mean, 3.0);
        assert_eq!(s.half_width(), Some(0.0));
    }

    #[test]
    fn one_and_five() {
        let s = &mos_summary(&ratings(Condition::VcLow, &[1, 5]))[0];
        assert_eq!(s.mean, 3.0);
        let expect = t_quantile_975(1) * 8f64.sqrt() / 2f64.sqrt();
        assert!((s.half_width().unwrap() - expect).abs() < 1e-9);
        assert!((s.half_width().unwrap() - 25.41).abs() < 0.01);
    }

    #[test]
    fn single_rating_flagged_and_empty_omitted() {
        let out = mos_summary(&ratings(Condition::HealthyNatural, &[4]));
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].ci95, None);
        assert!(mos_summary(&[]).is_empty());
    }

    #[test]
    fn permutation_invariant() {
        let a = ratings(Condition::GtMid, &[1, 2, 2, 5, 4, 3, 3]);
        let mut b = a.clone();
        b.reverse();
        assert_eq!(mos_summary(&a), mos_summary(&b));
    }
}
