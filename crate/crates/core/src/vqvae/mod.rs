//! Hierarchical VQ-VAE over mel-cepstral frames, its trainer and checkpoint
//! format.

mod checkpoint;
mod model;
mod quantize;
pub mod toy;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffcore::GraphError;
use crate::dsp::DspError;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use model::{
    Encoding, FeatureNorm, FrozenQuantization, FrozenStage, HVqVaeModel, LossBreakdown,
    StageActivations, STAGES,
};
pub use quantize::{codebook_perplexity, Codebook};
pub use train::{train, StepReport, TrainConfig, Trainer, TrainingSet, TrainingUtterance};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("unknown speaker {0}")]
    UnknownSpeaker(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error("malformed checkpoint: {0}")]
    Format(String),
    #[error("checkpoint version {found}, expected {expected}")]
    Version { found: u16, expected: u16 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub n_coeffs: usize,
    pub hidden: usize,
    pub latent_dim: usize,
    pub codebook_size: usize,
    pub speaker_dim: usize,
    pub kernel: usize,
    /// Temporal downsampling of stages 1, 2 and 3.
    pub strides: [usize; STAGES],
    /// Commitment weight.
    pub beta: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n_coeffs: 40,
            hidden: 128,
            latent_dim: 64,
            codebook_size: 64,
            speaker_dim: 32,
            kernel: 5,
            strides: [2, 2, 2],
            beta: 0.25,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("n_coeffs", self.n_coeffs),
            ("hidden", self.hidden),
            ("latent_dim", self.latent_dim),
            ("speaker_dim", self.speaker_dim),
        ];
        for (name, v) in sizes {
            if v == 0 {
                return Err(ModelError::InvalidArgument(format!(
                    "{name} must be positive"
                )));
            }
        }
        if self.codebook_size == 0 {
            return Err(ModelError::InvalidState(
                "codebook_size must be positive".into(),
            ));
        }
        if self.kernel.is_multiple_of(2) {
            return Err(ModelError::InvalidArgument(format!(
                "kernel {} must be odd",
                self.kernel
            )));
        }
        if self.strides.contains(&0) {
            return Err(ModelError::InvalidArgument(
                "strides must be positive".into(),
            ));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(ModelError::InvalidArgument(format!(
                "beta {} must be non-negative",
                self.beta
            )));
        }
        Ok(())
    }

    /// Product of the stage strides; admissible frame counts are multiples
    /// of it.
    pub fn total_stride(&self) -> usize {
        self.strides.iter().product()
    }

    /// Kernel width and padding of stage `n`'s transposed convolution, chosen
    /// so that it maps `t` frames to exactly `t * stride`.
    pub(crate) fn upsample_geometry(&self, n: usize) -> (usize, usize) {
        match self.strides[n] {
            1 => (self.kernel, self.kernel / 2),
            s if s % 2 == 0 => (2 * s, s / 2),
            s => (s, 0),
        }
    }
}
