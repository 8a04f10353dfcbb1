//! Audio front end: waveform conditioning, mel analysis, mel-cepstra and
//! phase-reconstruction resynthesis.
//!
//! Every function here is a pure function of its arguments.

mod cepstrum;
mod denoise;
mod mcep;
mod mel;
mod resample;
mod stft;
mod trim;
mod vocoder;
mod wav;

pub use cepstrum::{invert_mel_cepstrum, mel_cepstrum, MelCepstrogram, LOG_FLOOR};
pub use denoise::reduce_noise;
pub use mcep::{decode_mcep, encode_mcep, read_mcep, write_mcep, MCEP_MAGIC};
pub use mel::{hz_to_mel, mel_spectrogram, mel_to_hz, MelFilterbank, MelSpectrogram};
pub use resample::resample;
pub use stft::{hann_window, Stft};
pub use trim::trim_silence;
pub use vocoder::{griffin_lim, griffin_lim_traced, GriffinLimTrace};
pub use wav::{read_wav, write_wav};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// Returned by [`trim_silence`] when no frame rises above the threshold.
    #[error("clip is silent at the configured threshold")]
    AllSilent,
    #[error("{samples} samples is shorter than one {needed}-sample analysis window")]
    TooShort { samples: usize, needed: usize },
    #[error("malformed feature file: {0}")]
    Format(String),
    #[error("wav: {0}")]
    Wav(#[from] hound::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DspError>;

/// A mono signal with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(DspError::InvalidArgument(
                "sample rate must be positive".into(),
            ));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(DspError::InvalidArgument(format!(
                "non-finite sample at index {i}"
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, s| m.max(s.abs()))
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64).sqrt()
    }

    /// Peak normalisation to unit maximum magnitude. An all-zero signal is
    /// returned unchanged.
    pub fn normalize(&self) -> Waveform {
        let peak = self.peak();
        if peak == 0.0 {
            return self.clone();
        }
        Waveform {
            samples: self.samples.iter().map(|s| s / peak).collect(),
            sample_rate: self.sample_rate,
        }
    }
}

/// Stationary spectral-gating parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseReduceParams {
    /// Fraction of lowest-energy frames used to estimate the noise floor.
    pub noise_frame_fraction: f64,
    /// Gate opens this many dB above the noise floor.
    pub threshold_db: f64,
    /// Width of the sigmoid transition around the threshold, in dB.
    pub mask_slope_db: f64,
    /// Half-width (bins) of the running median applied to the floor across
    /// frequency. Stationary noise is broadband, so a median over neighbouring
    /// bins keeps narrow tonal peaks out of the floor estimate.
    pub floor_median_bins: usize,
    /// Half-widths of the triangular mask smoothing kernel.
    pub smooth_frames: usize,
    pub smooth_bins: usize,
    /// 1.0 removes gated energy entirely.
    pub prop_decrease: f64,
}

impl Default for NoiseReduceParams {
    fn default() -> Self {
        Self {
            noise_frame_fraction: 0.1,
            threshold_db: 6.0,
            mask_slope_db: 1.0,
            floor_median_bins: 16,
            smooth_frames: 1,
            smooth_bins: 1,
            prop_decrease: 1.0,
        }
    }
}

/// Analysis settings shared by the feature extractor and the vocoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DspConfig {
    /// Rate the mel analysis expects; inputs are resampled to it.
    pub sample_rate: u32,
    pub fft_size: usize,
    pub hop_size: usize,
    pub window_size: usize,
    pub n_mels: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub cepstral_order: usize,
    pub trim_threshold_db: f64,
    pub trim_frame_ms: f64,
    pub griffin_lim_iterations: usize,
    pub noise_reduce: NoiseReduceParams,
}

impl Default for DspConfig {
    fn default() -> Self {
        Self {
            sample_rate: 24_000,
            fft_size: 1024,
            hop_size: 256,
            window_size: 1024,
            n_mels: 80,
            fmin: 80.0,
            fmax: 7600.0,
            cepstral_order: 39,
            trim_threshold_db: -40.0,
            trim_frame_ms: 25.0,
            griffin_lim_iterations: 60,
            noise_reduce: NoiseReduceParams::default(),
        }
    }
}

impl DspConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DspError::InvalidArgument(m));
        if self.sample_rate == 0 {
            return bad("sample_rate must be positive".into());
        }
        if self.hop_size == 0
            || self.hop_size > self.window_size
            || self.window_size > self.fft_size
        {
            return bad(format!(
                "need 0 < hop ({}) <= window ({}) <= fft ({})",
                self.hop_size, self.window_size, self.fft_size
            ));
        }
        if !(self.fmin >= 0.0
            && self.fmin < self.fmax
            && self.fmax <= self.sample_rate as f64 / 2.0)
        {
            return bad(format!(
                "need 0 <= fmin ({}) < fmax ({}) <= nyquist ({})",
                self.fmin,
                self.fmax,
                self.sample_rate as f64 / 2.0
            ));
        }
        if self.n_mels == 0 || self.cepstral_order + 1 > self.n_mels {
            return bad(format!(
                "cepstral order {} needs at least {} mel bands, have {}",
                self.cepstral_order,
                self.cepstral_order + 1,
                self.n_mels
            ));
        }
        if self.trim_threshold_db >= 0.0 {
            return bad("trim threshold must be negative (dB re peak)".into());
        }
        Ok(())
    }

    pub fn n_cepstra(&self) -> usize {
        self.cepstral_order + 1
    }

    /// Same analysis geometry at a different sampling rate; used by the
    /// noise gate, which runs before resampling.
    pub(crate) fn stft_at(&self) -> Stft {
        Stft::new(self.fft_size, self.window_size, self.hop_size)
    }
}
