use rustfft::num_complex::Complex64;

use super::{DspConfig, Waveform};

const TINY: f64 = 1e-20;

fn power_db(p: f64) -> f64 {
    10.0 * (p + TINY).log10()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Triangular smoothing along both axes of a `frames x bins` mask.
fn smooth_mask(mask: &[Vec<f64>], half_t: usize, half_f: usize) -> Vec<Vec<f64>> {
    let tri = |h: usize| -> Vec<f64> {
        (0..=2 * h)
            .map(|i| (h + 1 - i.abs_diff(h)) as f64)
            .collect()
    };
    let (kt, kf) = (tri(half_t), tri(half_f));
    let n_t = mask.len();
    let n_f = mask.first().map_or(0, Vec::len);
    let mut along_f = vec![vec![0.0; n_f]; n_t];
    for t in 0..n_t {
        for f in 0..n_f {
            let (mut acc, mut wsum) = (0.0, 0.0);
            for (i, w) in kf.iter().enumerate() {
                let j = f as isize + i as isize - half_f as isize;
                if j >= 0 && (j as usize) < n_f {
                    acc += w * mask[t][j as usize];
                    wsum += w;
                }
            }
            along_f[t][f] = acc / wsum;
        }
    }
    let mut out = vec![vec![0.0; n_f]; n_t];
    for t in 0..n_t {
        for f in 0..n_f {
            let (mut acc, mut wsum) = (0.0, 0.0);
            for (i, w) in kt.iter().enumerate() {
                let j = t as isize + i as isize - half_t as isize;
                if j >= 0 && (j as usize) < n_t {
                    acc += w * along_f[j as usize][f];
                    wsum += w;
                }
            }
            out[t][f] = acc / wsum;
        }
    }
    out
}

/// Stationary spectral gating.
///
/// The noise floor of each bin is the mean power over the quietest
/// `noise_frame_fraction` of frames, median-filtered across frequency. Bins
/// rising `threshold_db` above it pass; the rest are attenuated through a
/// smoothed sigmoid mask. Output length equals input length; clips shorter
/// than one analysis window are returned untouched.
pub fn reduce_noise(w: &Waveform, cfg: &DspConfig) -> Waveform {
    let p = &cfg.noise_reduce;
    let stft = cfg.stft_at();
    let win = stft.window_size();
    if w.len() < win {
        return w.clone();
    }

    // noise statistics from frames lying entirely inside the clip
    let spec = stft.analyze(&w.samples);
    let n_bins = stft.n_bins();
    let power: Vec<Vec<f64>> = spec
        .iter()
        .map(|f| f.iter().map(|c| c.norm_sqr()).collect())
        .collect();
    let mut order: Vec<(f64, usize)> = power
        .iter()
        .enumerate()
        .map(|(t, f)| (f.iter().sum::<f64>(), t))
        .collect();
    order.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n_quiet =
        ((order.len() as f64 * p.noise_frame_fraction).ceil() as usize).clamp(1, order.len());
    let mut floor = vec![0.0; n_bins];
    for &(_, t) in &order[..n_quiet] {
        for (fl, pw) in floor.iter_mut().zip(&power[t]) {
            *fl += pw / n_quiet as f64;
        }
    }
    let thresh_db: Vec<f64> = (0..n_bins)
        .map(|k| {
            let lo = k.saturating_sub(p.floor_median_bins);
            let hi = (k + p.floor_median_bins + 1).min(n_bins);
            power_db(median(&mut floor[lo..hi].to_vec())) + p.threshold_db
        })
        .collect();

    // gate a zero-padded copy so every original sample sits under full overlap
    let pad = win / 2;
    let hop = stft.hop();
    let mut padded = vec![0.0; pad];
    padded.extend_from_slice(&w.samples);
    padded.extend(vec![0.0; pad]);
    let rem = (padded.len() - win) % hop;
    if rem != 0 {
        padded.extend(vec![0.0; hop - rem]);
    }
    let spec = stft.analyze(&padded);
    let raw: Vec<Vec<f64>> = spec
        .iter()
        .map(|f| {
            f.iter()
                .zip(&thresh_db)
                .map(|(c, th)| {
                    1.0 / (1.0 + (-(power_db(c.norm_sqr()) - th) / p.mask_slope_db).exp())
                })
                .collect()
        })
        .collect();
    let mask = smooth_mask(&raw, p.smooth_frames, p.smooth_bins);
    let gated: Vec<Vec<Complex64>> = spec
        .iter()
        .zip(&mask)
        .map(|(f, m)| {
            f.iter()
                .zip(m)
                .map(|(c, g)| c * (1.0 - p.prop_decrease * (1.0 - g)))
                .collect()
        })
        .collect();
    let out = stft.synthesize(&gated);
    Waveform {
        samples: out[pad..pad + w.len()].to_vec(),
        sample_rate: w.sample_rate,
    }
}
