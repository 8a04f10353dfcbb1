use statrs::function::erf::erfc;

use super::{Result, StatsError};

/// Largest effective sample size for which the null distribution is
/// enumerated exactly.
pub const EXACT_MAX_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PMethod {
    /// Choose exact enumeration up to [`EXACT_MAX_N`], normal otherwise.
    Auto,
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonResult {
    pub w_plus: f64,
    pub w_minus: f64,
    /// `min(w_plus, w_minus)`.
    pub w: f64,
    /// Pairs left after dropping zero differences.
    pub n: usize,
    pub zeros_dropped: usize,
    pub p_two_sided: f64,
    pub method: PMethod,
}

/// Average ranks (1-based) of `values`, ties sharing the mean of the ranks
/// they span.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    wilcoxon_signed_rank_with(a, b, PMethod::Auto)
}

/// Paired two-sided signed-rank test. Zero differences are dropped before
/// ranking.
pub fn wilcoxon_signed_rank_with(a: &[f64], b: &[f64], method: PMethod) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(StatsError::Invalid(format!(
            "paired samples differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(StatsError::Invalid("non-finite score".into()));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    let zeros_dropped = a.len() - diffs.len();
    let n = diffs.len();
    if n == 0 {
        return Err(StatsError::NoTest);
    }
    let mags: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = midranks(&mags);
    let w_plus: f64 = ranks
        .iter()
        .zip(&diffs)
        .filter(|(_, d)| **d > 0.0)
        .map(|(r, _)| r)
        .sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w_minus = total - w_plus;
    let w = w_plus.min(w_minus);
    let method = match method {
        PMethod::Auto if n <= EXACT_MAX_N => PMethod::Exact,
        PMethod::Auto => PMethod::Normal,
        m => m,
    };
    let p_two_sided = match method {
        PMethod::Exact => exact_p(&ranks, w)?,
        _ => normal_p(&mags, &ranks, w_plus),
    };
    Ok(WilcoxonResult {
        w_plus,
        w_minus,
        w,
        n,
        zeros_dropped,
        p_two_sided,
        method,
    })
}

/// `min(1, 2 P(W+ <= w))` under the sign-flip null with the observed ranks.
/// Midranks are halves, so doubled ranks are integers and the distribution
/// is a subset-sum count.
fn exact_p(ranks: &[f64], w: f64) -> Result<f64> {
    let n = ranks.len();
    if n > 62 {
        return Err(StatsError::Invalid(format!(
            "exact enumeration with n = {n} overflows"
        )));
    }
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0u64; max + 1];
    counts[0] = 1;
    for &r in &doubled {
        for s in (r..=max).rev() {
            counts[s] += counts[s - r];
        }
    }
    let limit = (2.0 * w).round() as usize;
    let low: u64 = counts[..=limit.min(max)].iter().sum();
    let all = 1u64 << n;
    Ok((2 * low).min(all) as f64 / all as f64)
}

/// Normal approximation with tie-corrected variance and a continuity
/// correction of one half.
fn normal_p(mags: &[f64], ranks: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = mags.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Enumerates all 2^n sign assignments over the observed ranks.
    fn brute_p(ranks: &[f64], w: f64) -> f64 {
        let n = ranks.len();
        let total: f64 = ranks.iter().sum();
        let mut extreme = 0u64;
        for mask in 0u64..(1 << n) {
            let wp: f64 = (0..n)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| ranks[i])
                .sum();
            if wp <= w + 1e-9 || wp >= total - w - 1e-9 {
                extreme += 1;
            }
        }
        extreme as f64 / (1u64 << n) as f64
    }

    #[test]
    fn all_positive_five() {
        let a = [1.1, 2.2, 3.3, 4.4, 5.5];
        let r = wilcoxon_signed_rank(&a, &[0.0; 5]).unwrap();
        assert_eq!((r.w, r.w_plus, r.n), (0.0, 15.0, 5));
        assert_eq!(r.p_two_sided, 0.0625);
        assert_eq!(r.method, PMethod::Exact);
    }

    #[test]
    fn identical_samples_no_test() {
        assert!(matches!(
            wilcoxon_signed_rank(&[1.0, 2.0], &[1.0, 2.0]),
            Err(StatsError::NoTest)
        ));
        assert!(wilcoxon_signed_rank(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn midranks_fixture() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn zeros_dropped() {
        let r = wilcoxon_signed_rank(&[1.0, 2.0, 5.0], &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!((r.n, r.zeros_dropped), (2, 1));
    }

    #[test]
    fn large_n_uses_normal() {
        let a: Vec<f64> = (0..30).map(|i| i as f64 * 0.1 + 1.0).collect();
        let b: Vec<f64> = (0..30)
            .map(|i| if i % 3 == 0 { 5.0 } else { 0.0 })
            .collect();
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(r.method, PMethod::Normal);
        assert!(r.p_two_sided > 0.0 && r.p_two_sided <= 1.0);
    }

    fn paired(max_n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1..=max_n)
            .prop_flat_map(|n| {
                (
                    prop::collection::vec(1u8..=5, n),
                    prop::collection::vec(1u8..=5, n),
                )
            })
            .prop_map(|(a, b)| {
                (
                    a.into_iter().map(f64::from).collect(),
                    b.into_iter().map(f64::from).collect(),
                )
            })
    }

    proptest! {
        #[test]
        fn exact_matches_enumeration((a, b) in paired(12)) {
            if let Ok(r) = wilcoxon_signed_rank(&a, &b) {
                let diffs: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).filter(|d| *d != 0.0).map(f64::abs).collect();
                prop_assert_eq!(r.p_two_sided, brute_p(&midranks(&diffs), r.w));
            }
        }

        #[test]
        fn swapping_samples((a, b) in paired(20)) {
            if let Ok(r) = wilcoxon_signed_rank(&a, &b) {
                let s = wilcoxon_signed_rank(&b, &a).unwrap();
                prop_assert_eq!(r.p_two_sided, s.p_two_sided);
                prop_assert_eq!((r.w_plus, r.w_minus), (s.w_minus, s.w_plus));
            }
        }
    }

    fn worst_normal_error(n: usize) -> f64 {
        let mut worst = 0.0f64;
        for mask in 0u32..(1 << n) {
            let a: Vec<f64> = (0..n)
                .map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 } * (i + 1) as f64)
                .collect();
            let b = vec![0.0; n];
            let e = wilcoxon_signed_rank_with(&a, &b, PMethod::Exact)
                .unwrap()
                .p_two_sided;
            let z = wilcoxon_signed_rank_with(&a, &b, PMethod::Normal)
                .unwrap()
                .p_two_sided;
            worst = worst.max((e - z).abs());
        }
        worst
    }

    #[test]
    fn normal_within_two_hundredths_from_nine_pairs() {
        // every sign pattern over distinct magnitudes 1..=n
        for n in 9..=12 {
            assert!(worst_normal_error(n) <= 0.02, "n = {n}");
        }
        // below nine the continuity-corrected approximation drifts further
        assert!(worst_normal_error(8) > 0.02);
    }
}
