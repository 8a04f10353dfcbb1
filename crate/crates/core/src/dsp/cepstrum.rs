use super::{DspError, MelSpectrogram, Result};

/// Mel energies are clamped here before the logarithm.
pub const LOG_FLOOR: f64 = 1e-10;

/// Mel-cepstral coefficients, `n_frames x n_coeffs`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MelCepstrogram {
    pub data: Vec<f64>,
    pub n_frames: usize,
    pub n_coeffs: usize,
}

impl MelCepstrogram {
    pub fn new(data: Vec<f64>, n_frames: usize, n_coeffs: usize) -> Result<Self> {
        if data.len() != n_frames * n_coeffs {
            return Err(DspError::InvalidArgument(format!(
                "{} values cannot form {n_frames}x{n_coeffs}",
                data.len()
            )));
        }
        Ok(Self {
            data,
            n_frames,
            n_coeffs,
        })
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.n_coeffs..(t + 1) * self.n_coeffs]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_coeffs.max(1))
    }
}

/// Orthonormal DCT-II basis, `n_out x n`: row k is `s_k cos(pi k (2i+1) / 2n)`.
fn dct_basis(n: usize, n_out: usize) -> Vec<Vec<f64>> {
    let nf = n as f64;
    (0..n_out)
        .map(|k| {
            let scale = if k == 0 {
                (1.0 / nf).sqrt()
            } else {
                (2.0 / nf).sqrt()
            };
            (0..n)
                .map(|i| {
                    scale
                        * (std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2.0 * nf)).cos()
                })
                .collect()
        })
        .collect()
}

/// Truncated orthonormal DCT-II of the floored log mel energies.
pub fn mel_cepstrum(ms: &MelSpectrogram, order: usize) -> Result<MelCepstrogram> {
    let n_coeffs = order + 1;
    if n_coeffs > ms.n_mels {
        return Err(DspError::InvalidArgument(format!(
            "order {order} needs {n_coeffs} mel bands, have {}",
            ms.n_mels
        )));
    }
    let basis = dct_basis(ms.n_mels, n_coeffs);
    let mut data = Vec::with_capacity(ms.n_frames * n_coeffs);
    let mut log_mel = vec![0.0; ms.n_mels];
    for frame in ms.frames() {
        for (l, e) in log_mel.iter_mut().zip(frame) {
            *l = e.max(LOG_FLOOR).ln();
        }
        data.extend(
            basis
                .iter()
                .map(|row| row.iter().zip(&log_mel).map(|(b, l)| b * l).sum::<f64>()),
        );
    }
    Ok(MelCepstrogram {
        data,
        n_frames: ms.n_frames,
        n_coeffs,
    })
}

/// Zero-pads to `n_mels` coefficients, applies the inverse (DCT-III) and
/// exponentiates. `frame_shift` and `sample_rate` are left for the caller to
/// fill in if a vocoder needs them.
pub fn invert_mel_cepstrum(mc: &MelCepstrogram, n_mels: usize) -> Result<MelSpectrogram> {
    if mc.n_coeffs > n_mels {
        return Err(DspError::InvalidArgument(format!(
            "{} coefficients cannot be inverted onto {n_mels} bands",
            mc.n_coeffs
        )));
    }
    let basis = dct_basis(n_mels, mc.n_coeffs);
    let mut data = Vec::with_capacity(mc.n_frames * n_mels);
    for frame in mc.frames() {
        for i in 0..n_mels {
            let log_e: f64 = basis.iter().zip(frame).map(|(row, c)| row[i] * c).sum();
            data.push(log_e.exp());
        }
    }
    Ok(MelSpectrogram {
        data,
        n_frames: mc.n_frames,
        n_mels,
        frame_shift: 0.0,
        sample_rate: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mel(data: Vec<f64>, n_mels: usize) -> MelSpectrogram {
        MelSpectrogram {
            n_frames: data.len() / n_mels,
            data,
            n_mels,
            frame_shift: 0.01,
            sample_rate: 24_000,
        }
    }

    /// Direct O(M^2) evaluation of the orthonormal DCT-II.
    fn naive_dct(x: &[f64]) -> Vec<f64> {
        let m = x.len() as f64;
        (0..x.len())
            .map(|k| {
                let s: f64 = x
                    .iter()
                    .enumerate()
                    .map(|(n, v)| {
                        v * (std::f64::consts::PI / m * (n as f64 + 0.5) * k as f64).cos()
                    })
                    .sum();
                s * if k == 0 {
                    (1.0 / m).sqrt()
                } else {
                    (2.0 / m).sqrt()
                }
            })
            .collect()
    }

    #[test]
    fn constant_frame() {
        let e: f64 = 0.37;
        let mc = mel_cepstrum(&mel(vec![e; 80], 80), 39).unwrap();
        assert!((mc.data[0] - 80f64.sqrt() * e.ln()).abs() < 1e-12);
        assert!(mc.data[1..].iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn matches_direct_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let frame: Vec<f64> = (0..80).map(|_| rng.gen_range(1e-3..10.0)).collect();
            let logs: Vec<f64> = frame.iter().map(|e| e.ln()).collect();
            let expect = naive_dct(&logs);
            let mc = mel_cepstrum(&mel(frame, 80), 39).unwrap();
            for k in 0..40 {
                assert!((mc.data[k] - expect[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn full_order_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<f64> = (0..80 * 7).map(|_| rng.gen_range(1e-4..50.0)).collect();
        let ms = mel(data, 80);
        let back = invert_mel_cepstrum(&mel_cepstrum(&ms, 79).unwrap(), 80).unwrap();
        for (a, b) in ms.data.iter().zip(&back.data) {
            assert!((a.ln() - b.ln()).abs() < 1e-9);
        }
    }

    #[test]
    fn truncation_residual_obeys_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let frame: Vec<f64> = (0..80).map(|_| rng.gen_range(0.01..5.0)).collect();
        let ms = mel(frame.clone(), 80);
        let full = mel_cepstrum(&ms, 79).unwrap();
        let smooth = invert_mel_cepstrum(&mel_cepstrum(&ms, 19).unwrap(), 80).unwrap();
        let residual: f64 = frame
            .iter()
            .zip(&smooth.data)
            .map(|(a, b)| (a.ln() - b.ln()).powi(2))
            .sum();
        let dropped: f64 = full.data[20..].iter().map(|c| c * c).sum();
        assert!((residual - dropped).abs() < 1e-9 * dropped.max(1.0));
    }

    #[test]
    fn zero_cepstrum_is_unit_energy() {
        let mc = MelCepstrogram::new(vec![0.0; 40 * 3], 3, 40).unwrap();
        let ms = invert_mel_cepstrum(&mc, 80).unwrap();
        assert!(ms.data.iter().all(|&e| (e - 1.0).abs() < 1e-15));
    }

    #[test]
    fn too_many_coefficients() {
        let mc = MelCepstrogram::new(vec![0.0; 81], 1, 81).unwrap();
        assert!(invert_mel_cepstrum(&mc, 80).is_err());
        assert!(mel_cepstrum(&mel(vec![1.0; 80], 80), 80).is_err());
    }

    #[test]
    fn silent_frames_are_floored() {
        let mc = mel_cepstrum(&mel(vec![0.0; 80], 80), 39).unwrap();
        assert!(mc.data.iter().all(|c| c.is_finite()));
        assert!((mc.data[0] - 80f64.sqrt() * LOG_FLOOR.ln()).abs() < 1e-9);
    }
}
