use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

use super::{DspConfig, DspError, MelFilterbank, MelSpectrogram, Result, Stft, Waveform};

const PHASE_SEED: u64 = 0x6c_696d;

#[derive(Debug, Clone)]
pub struct GriffinLimTrace {
    pub waveform: Waveform,
    /// `‖ |STFT(x_i)| - S ‖ / ‖S‖` after each iteration, in full-spectrum norm.
    pub spectral_convergence: Vec<f64>,
}

pub fn griffin_lim(ms: &MelSpectrogram, cfg: &DspConfig, iterations: usize) -> Result<Waveform> {
    griffin_lim_traced(ms, cfg, iterations).map(|t| t.waveform)
}

/// Mel magnitudes are mapped to linear magnitudes with the filterbank's
/// normalised transpose, then phase is recovered by alternating projections
/// starting from a fixed pseudo-random phase. Each pass cannot increase the
/// magnitude distance, because both projections are least-squares optimal.
pub fn griffin_lim_traced(
    ms: &MelSpectrogram,
    cfg: &DspConfig,
    iterations: usize,
) -> Result<GriffinLimTrace> {
    if iterations == 0 {
        return Err(DspError::InvalidArgument(
            "need at least one iteration".into(),
        ));
    }
    cfg.validate()?;
    if ms.n_mels != cfg.n_mels {
        return Err(DspError::InvalidArgument(format!(
            "spectrogram has {} bands, config {}",
            ms.n_mels, cfg.n_mels
        )));
    }
    let fb = MelFilterbank::from_config(cfg)?;
    let stft = Stft::new(cfg.fft_size, cfg.window_size, cfg.hop_size);
    let target: Vec<Vec<f64>> = ms.frames().map(|f| fb.pseudo_inverse(f)).collect();
    let weights = stft.parseval_weights();
    let target_norm: f64 = target
        .iter()
        .flat_map(|f| f.iter().zip(&weights).map(|(s, w)| w * s * s))
        .sum::<f64>()
        .sqrt();

    let mut rng = ChaCha8Rng::seed_from_u64(PHASE_SEED);
    let mut spec: Vec<Vec<Complex64>> = target
        .iter()
        .map(|f| {
            f.iter()
                .map(|&m| {
                    Complex64::from_polar(
                        m,
                        rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
                    )
                })
                .collect()
        })
        .collect();

    let mut convergence = Vec::with_capacity(iterations);
    let mut signal = stft.synthesize(&spec);
    for _ in 0..iterations {
        let rebuilt = stft.analyze(&signal);
        let mut dist = 0.0;
        for ((frame, re), tgt) in spec.iter_mut().zip(&rebuilt).zip(&target) {
            for (k, ((c, r), &mag)) in frame.iter_mut().zip(re).zip(tgt).enumerate() {
                let a = r.norm();
                dist += weights[k] * (a - mag).powi(2);
                *c = if a > 0.0 {
                    r * (mag / a)
                } else {
                    Complex64::new(mag, 0.0)
                };
            }
        }
        convergence.push(if target_norm > 0.0 {
            dist.sqrt() / target_norm
        } else {
            0.0
        });
        signal = stft.synthesize(&spec);
    }
    // `signal` is one projection past the last logged error, so it is no worse.
    Ok(GriffinLimTrace {
        waveform: Waveform {
            samples: signal,
            sample_rate: cfg.sample_rate,
        },
        spectral_convergence: convergence,
    })
}
