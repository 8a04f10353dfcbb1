//! Pathological-to-pathological voice conversion.
//!
//! The crate is organised as a pipeline:
//!
//! * [`dsp`] turns 16 kHz clips into 24 kHz mel-cepstral feature matrices and
//!   resynthesises waveforms from model output with an iterative
//!   phase-reconstruction vocoder.
//! * [`diffcore`] is a small reverse-mode autodiff engine with the handful of
//!   tensor primitives the model needs, including the straight-through
//!   estimator used to train through the quantizer.
//! * [`vqvae`] is the three-stage hierarchical VQ-VAE with a speaker
//!   embedding table conditioning every decoder stage.
//! * [`corpus`] ingests a UASpeech-style manifest, enforces the block-wise
//!   train/test protocol and builds severity-matched speaker pairs.
//! * [`stats`] holds the listening-test arithmetic: MOS confidence intervals,
//!   the Wilcoxon signed-rank test and AB similarity agreement.

pub mod corpus;
pub mod diffcore;
pub mod dsp;
pub mod stats;
pub mod vqvae;
