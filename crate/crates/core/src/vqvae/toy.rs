//! Deterministic two-speaker cepstral data for desk-scale experiments:
//! both speakers share one family of smooth content trajectories and
//! differ by a fixed per-speaker spectral offset.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsp::MelCepstrogram;

use super::{ModelConfig, TrainConfig, TrainingUtterance};

#[derive(Debug, Clone)]
pub struct ToyCorpus {
    pub speakers: Vec<String>,
    pub utterances: Vec<TrainingUtterance>,
    /// Per-speaker offset added to every frame; the mean frame of a speaker
    /// converges to it.
    pub prototypes: Vec<Vec<f64>>,
}

impl ToyCorpus {
    pub fn prototype(&self, speaker: &str) -> Option<&[f64]> {
        self.speakers
            .iter()
            .position(|s| s == speaker)
            .map(|i| self.prototypes[i].as_slice())
    }
}

pub fn speaker_offset(speaker: usize, n_coeffs: usize) -> Vec<f64> {
    (0..n_coeffs)
        .map(|k| {
            let x = k as f64;
            match speaker {
                0 => 1.5 * (0.4 * x).cos(),
                _ => -1.5 * (0.4 * x + 0.9).sin(),
            }
        })
        .collect()
}

/// Content trajectory: a few slow sinusoids with utterance-specific
/// frequencies and phases, decaying across coefficients.
pub fn content(frames: usize, n_coeffs: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let parts: Vec<(f64, f64, usize)> = (0..3)
        .map(|_| {
            (
                rng.gen_range(0.05..0.3),
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(0..n_coeffs),
            )
        })
        .collect();
    let mut data = vec![0.0; frames * n_coeffs];
    for t in 0..frames {
        for k in 0..n_coeffs {
            let mut v = 0.0;
            for &(f, ph, centre) in &parts {
                let spread = (k as f64 - centre as f64) / 3.0;
                v += (f * t as f64 + ph).sin() * (-spread * spread).exp();
            }
            data[t * n_coeffs + k] = v;
        }
    }
    data
}

pub fn two_speaker_corpus(
    n_coeffs: usize,
    per_speaker: usize,
    frames: usize,
    seed: u64,
) -> ToyCorpus {
    let speakers = vec!["A".to_string(), "B".to_string()];
    let prototypes: Vec<Vec<f64>> = (0..2).map(|s| speaker_offset(s, n_coeffs)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut utterances = Vec::new();
    for i in 0..per_speaker {
        for (s, id) in speakers.iter().enumerate() {
            let mut data = content(frames, n_coeffs, &mut rng);
            for (j, v) in data.iter_mut().enumerate() {
                *v += prototypes[s][j % n_coeffs];
            }
            utterances.push(TrainingUtterance {
                key: format!("{id}_{i:03}"),
                speaker: id.clone(),
                features: MelCepstrogram::new(data, frames, n_coeffs).expect("finite toy data"),
            });
        }
    }
    ToyCorpus {
        speakers,
        utterances,
        prototypes,
    }
}

/// Mean over frames of the squared distance between each frame and `proto`.
pub fn mean_sq_distance(x: &MelCepstrogram, proto: &[f64]) -> f64 {
    let total: f64 = x
        .frames()
        .map(|f| {
            f.iter()
                .zip(proto)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum();
    total / x.n_frames as f64
}

/// Small model for [`two_speaker_corpus`] data with 40 coefficients.
pub fn desk_model_config() -> ModelConfig {
    ModelConfig {
        n_coeffs: 40,
        hidden: 32,
        latent_dim: 4,
        codebook_size: 8,
        speaker_dim: 8,
        ..ModelConfig::default()
    }
}

pub fn desk_train_config() -> TrainConfig {
    TrainConfig {
        steps: 200,
        learning_rate: 3e-3,
        seed: 3,
        ..TrainConfig::default()
    }
}
