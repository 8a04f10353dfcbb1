use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffcore::{adam_step, AdamConfig, AdamState, Graph, Tensor};
use crate::dsp::MelCepstrogram;

use super::model::{breakdown, collect_grads, QuantMode};
use super::{
    codebook_perplexity, FeatureNorm, HVqVaeModel, LossBreakdown, ModelError, Result, STAGES,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    /// Crop length in frames; must be a multiple of the model's total stride.
    pub segment_frames: usize,
    pub learning_rate: f64,
    /// Set by the caller; not read from configuration files.
    #[serde(skip)]
    pub seed: u64,
    /// Replace each codebook with encoder outputs sampled from the data
    /// before the first step.
    pub init_codebooks_from_data: bool,
    /// Fit per-coefficient mean and deviation on the training set before
    /// the first step.
    pub fit_normalization: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 200,
            batch_size: 8,
            segment_frames: 64,
            learning_rate: 2e-4,
            seed: 0,
            init_codebooks_from_data: true,
            fit_normalization: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingUtterance {
    pub key: String,
    pub speaker: String,
    pub features: MelCepstrogram,
}

/// Utterances checked against a speaker table.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    utterances: Vec<TrainingUtterance>,
    speaker_index: Vec<usize>,
}

impl TrainingSet {
    pub fn new(utterances: Vec<TrainingUtterance>, speakers: &[String]) -> Result<Self> {
        if utterances.is_empty() {
            return Err(ModelError::InvalidArgument("training set is empty".into()));
        }
        let mut speaker_index = Vec::with_capacity(utterances.len());
        for u in &utterances {
            if u.features.n_frames == 0 {
                return Err(ModelError::InvalidArgument(format!(
                    "utterance {} has no frames",
                    u.key
                )));
            }
            let i = speakers
                .iter()
                .position(|s| *s == u.speaker)
                .ok_or_else(|| ModelError::UnknownSpeaker(u.speaker.clone()))?;
            speaker_index.push(i);
        }
        Ok(Self {
            utterances,
            speaker_index,
        })
    }

    pub fn utterances(&self) -> &[TrainingUtterance] {
        &self.utterances
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub step: usize,
    pub loss: LossBreakdown,
    pub perplexity: [f64; STAGES],
}

struct Crop {
    input: Tensor,
    mask: Tensor,
    speaker: usize,
}

struct SampleResult {
    loss: LossBreakdown,
    grads: Vec<Tensor>,
    indices: Vec<Vec<usize>>,
}

/// Stateful optimiser loop over a [`TrainingSet`].
pub struct Trainer {
    model: HVqVaeModel,
    set: TrainingSet,
    cfg: TrainConfig,
    adam: AdamConfig,
    state: AdamState,
    rng: ChaCha8Rng,
    step: usize,
}

impl Trainer {
    pub fn new(mut model: HVqVaeModel, set: TrainingSet, cfg: TrainConfig) -> Result<Self> {
        if cfg.batch_size == 0 {
            return Err(ModelError::InvalidArgument(
                "batch_size must be positive".into(),
            ));
        }
        if !(cfg.learning_rate.is_finite() && cfg.learning_rate >= 0.0) {
            return Err(ModelError::InvalidArgument(format!(
                "learning rate {} must be non-negative",
                cfg.learning_rate
            )));
        }
        model.check_frames(cfg.segment_frames).map_err(|_| {
            ModelError::InvalidArgument(format!(
                "segment_frames {} must be a positive multiple of {}",
                cfg.segment_frames,
                model.config().total_stride()
            ))
        })?;
        // re-check against the model's own table in case the set was built
        // for another one
        for u in set.utterances() {
            model.speaker_index(&u.speaker)?;
            if u.features.n_coeffs != model.config().n_coeffs {
                return Err(ModelError::InvalidArgument(format!(
                    "utterance {} has {} coefficients, model expects {}",
                    u.key,
                    u.features.n_coeffs,
                    model.config().n_coeffs
                )));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        if cfg.fit_normalization {
            let n = model.config().n_coeffs;
            let norm =
                FeatureNorm::fit(n, set.utterances().iter().flat_map(|u| u.features.frames()));
            model.set_feature_norm(norm)?;
        }
        let mut trainer = Self {
            adam: AdamConfig {
                lr: cfg.learning_rate,
                ..AdamConfig::default()
            },
            state: AdamState::new(model.parameters()),
            model,
            set,
            cfg,
            rng: ChaCha8Rng::seed_from_u64(0),
            step: 0,
        };
        if trainer.cfg.init_codebooks_from_data {
            trainer.init_codebooks(&mut rng)?;
        }
        trainer.rng = rng;
        Ok(trainer)
    }

    pub fn model(&self) -> &HVqVaeModel {
        &self.model
    }

    pub fn into_model(self) -> HVqVaeModel {
        self.model
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    fn init_codebooks(&mut self, rng: &mut ChaCha8Rng) -> Result<()> {
        let k = self.model.config().codebook_size;
        let d = self.model.config().latent_dim;
        let mut pools: Vec<Vec<Vec<f64>>> = vec![Vec::new(); STAGES];
        for _ in 0..self.cfg.batch_size {
            let crop = self.sample_crop(rng);
            let mut g = Graph::new();
            let p = self.model.leaves(&mut g, false);
            let x = g.constant(crop.input);
            let (_, zs) = self.model.build_encoder(&mut g, &p, x)?;
            for (n, &z) in zs.iter().enumerate() {
                let zt = g.value(z);
                let t = zt.shape()[1];
                for ti in 0..t {
                    pools[n].push((0..d).map(|r| zt.data()[r * t + ti]).collect());
                }
            }
        }
        for (n, pool) in pools.iter().enumerate() {
            let idx = self.model.layout.codebooks[n];
            let mut data = Vec::with_capacity(k * d);
            let mut order: Vec<usize> = (0..pool.len()).collect();
            order.shuffle(rng);
            for j in 0..k {
                let src = if j < order.len() {
                    order[j]
                } else {
                    rng.gen_range(0..pool.len())
                };
                // small jitter keeps duplicated picks distinct
                data.extend(
                    pool[src]
                        .iter()
                        .map(|v| v + 1e-3 * rng.gen_range(-1.0..1.0)),
                );
            }
            let mut t = Tensor::new(vec![k, d], data)?;
            t.round_to_f32();
            self.model.params[idx] = t;
        }
        Ok(())
    }

    /// Random segment of one random utterance, in normalised units. Short
    /// utterances are zero-padded and the padding masked out of the
    /// reconstruction loss.
    fn sample_crop(&self, rng: &mut ChaCha8Rng) -> Crop {
        let seg = self.cfg.segment_frames;
        let ui = rng.gen_range(0..self.set.len());
        let utt = &self.set.utterances[ui];
        let feats = &utt.features;
        let c = feats.n_coeffs;
        let start = if feats.n_frames > seg {
            rng.gen_range(0..=feats.n_frames - seg)
        } else {
            0
        };
        let take = seg.min(feats.n_frames);
        let window =
            MelCepstrogram::new(feats.data[start * c..(start + take) * c].to_vec(), take, c)
                .expect("slice of a valid cepstrogram");
        let normed = self
            .model
            .prepare_input(&window)
            .expect("coefficient count checked at construction");
        let mut input = vec![0.0; c * seg];
        let mut mask = vec![0.0; c * seg];
        for r in 0..c {
            input[r * seg..r * seg + take]
                .copy_from_slice(&normed.data()[r * take..(r + 1) * take]);
            mask[r * seg..r * seg + take]
                .iter_mut()
                .for_each(|m| *m = 1.0);
        }
        Crop {
            input: Tensor::new(vec![c, seg], input).expect("finite input"),
            mask: Tensor::new(vec![c, seg], mask).expect("finite mask"),
            speaker: self.set.speaker_index[ui],
        }
    }

    fn run_sample(model: &HVqVaeModel, crop: &Crop) -> Result<SampleResult> {
        let mut g = Graph::new();
        let p = model.leaves(&mut g, true);
        let f = model.build_forward(
            &mut g,
            &p,
            &crop.input,
            crop.speaker,
            Some(&crop.mask),
            QuantMode::Nearest,
        )?;
        let grads = g.backward(f.total)?;
        Ok(SampleResult {
            loss: breakdown(&g, &f),
            grads: collect_grads(&grads, &p, &model.params),
            indices: f.indices,
        })
    }

    /// One optimiser step on a fresh batch.
    pub fn step(&mut self) -> Result<StepReport> {
        let mut rng = self.rng.clone();
        let crops: Vec<Crop> = (0..self.cfg.batch_size)
            .map(|_| self.sample_crop(&mut rng))
            .collect();
        self.rng = rng;

        let model = &self.model;
        #[cfg(feature = "parallel")]
        let results: Vec<Result<SampleResult>> = {
            use rayon::prelude::*;
            crops
                .par_iter()
                .map(|c| Self::run_sample(model, c))
                .collect()
        };
        #[cfg(not(feature = "parallel"))]
        let results: Vec<Result<SampleResult>> =
            crops.iter().map(|c| Self::run_sample(model, c)).collect();

        let b = crops.len() as f64;
        let mut grads: Vec<Tensor> = self
            .model
            .params
            .iter()
            .map(|p| Tensor::zeros(p.shape()))
            .collect();
        let mut sum = LossBreakdown {
            reconstruction: 0.0,
            codebook: 0.0,
            commitment: 0.0,
            total: 0.0,
        };
        let mut usage: Vec<Vec<usize>> = vec![Vec::new(); STAGES];
        for r in results {
            let r = r?;
            for (acc, g) in grads.iter_mut().zip(&r.grads) {
                acc.add_assign(g);
            }
            sum.reconstruction += r.loss.reconstruction / b;
            sum.codebook += r.loss.codebook / b;
            sum.commitment += r.loss.commitment / b;
            sum.total += r.loss.total / b;
            for (u, idx) in usage.iter_mut().zip(r.indices) {
                u.extend(idx);
            }
        }
        for g in &mut grads {
            g.data_mut().iter_mut().for_each(|v| *v /= b);
        }
        adam_step(&mut self.model.params, &grads, &mut self.state, &self.adam);
        for p in &mut self.model.params {
            p.round_to_f32();
        }
        self.step += 1;
        let k = self.model.config().codebook_size;
        let report = StepReport {
            step: self.step,
            loss: sum,
            perplexity: [0, 1, 2].map(|n| codebook_perplexity(&usage[n], k)),
        };
        log::debug!(
            "step {} loss {:.4} (recon {:.4}) perplexity {:.1}/{:.1}/{:.1}",
            report.step,
            report.loss.total,
            report.loss.reconstruction,
            report.perplexity[0],
            report.perplexity[1],
            report.perplexity[2]
        );
        Ok(report)
    }
}

/// Runs `cfg.steps` optimiser steps and returns the trained model with one
/// report per step.
pub fn train(
    model: HVqVaeModel,
    set: TrainingSet,
    cfg: TrainConfig,
) -> Result<(HVqVaeModel, Vec<StepReport>)> {
    let steps = cfg.steps;
    let mut trainer = Trainer::new(model, set, cfg)?;
    let mut reports = Vec::with_capacity(steps);
    for _ in 0..steps {
        reports.push(trainer.step()?);
    }
    Ok((trainer.into_model(), reports))
}
