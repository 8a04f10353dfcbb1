use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::diffcore::{Gradients, Graph, Tensor, Var};
use crate::dsp::MelCepstrogram;

use super::{codebook_perplexity, Codebook, ModelConfig, ModelError, Result};

pub const STAGES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvIdx {
    pub w: usize,
    pub b: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct EncoderIdx {
    pub down: ConvIdx,
    pub refine: ConvIdx,
    pub proj: ConvIdx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct DecoderIdx {
    pub mix: ConvIdx,
    pub up: ConvIdx,
}

/// Where each named parameter lives in the flat parameter list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Layout {
    pub encoders: [EncoderIdx; STAGES],
    pub decoders: [DecoderIdx; STAGES],
    pub codebooks: [usize; STAGES],
    pub speakers: usize,
}

/// Parameter names and shapes in storage order.
pub(crate) fn parameter_specs(
    cfg: &ModelConfig,
    n_speakers: usize,
) -> (Vec<(String, Vec<usize>)>, Layout) {
    let mut specs: Vec<(String, Vec<usize>)> = Vec::new();
    let mut push = |name: String, shape: Vec<usize>| {
        specs.push((name, shape));
        specs.len() - 1
    };
    let (h, d, k, e, c) = (
        cfg.hidden,
        cfg.latent_dim,
        cfg.codebook_size,
        cfg.speaker_dim,
        cfg.n_coeffs,
    );
    let w = cfg.kernel;

    let mut encoders = Vec::with_capacity(STAGES);
    for n in 0..STAGES {
        let cin = if n == 0 { c } else { h };
        let mut conv = |name: &str, shape: Vec<usize>, out: usize| ConvIdx {
            w: push(format!("encoder{}.{name}.weight", n + 1), shape),
            b: push(format!("encoder{}.{name}.bias", n + 1), vec![out]),
        };
        let down = conv("down", vec![h, cin, w], h);
        let refine = conv("refine", vec![h, h, w], h);
        let proj = conv("proj", vec![d, h, 1], d);
        encoders.push(EncoderIdx { down, refine, proj });
    }
    let mut decoders = Vec::with_capacity(STAGES);
    for n in 0..STAGES {
        let cin = d + e + if n == STAGES - 1 { 0 } else { h };
        let cout = if n == 0 { c } else { h };
        let up_w = cfg.upsample_geometry(n).0;
        let mut conv = |name: &str, shape: Vec<usize>, out: usize| ConvIdx {
            w: push(format!("decoder{}.{name}.weight", n + 1), shape),
            b: push(format!("decoder{}.{name}.bias", n + 1), vec![out]),
        };
        let mix = conv("mix", vec![h, cin, w], h);
        let up = conv("up", vec![h, cout, up_w], cout);
        decoders.push(DecoderIdx { mix, up });
    }
    let codebooks = [0, 1, 2].map(|n| push(format!("codebook{}", n + 1), vec![k, d]));
    let speakers = push("speaker_table".into(), vec![n_speakers, e]);
    let layout = Layout {
        encoders: encoders.try_into().unwrap(),
        decoders: decoders.try_into().unwrap(),
        codebooks,
        speakers,
    };
    (specs, layout)
}

/// Per-coefficient standardisation applied at the model boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureNorm {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureNorm {
    pub fn identity(n: usize) -> Self {
        Self {
            mean: vec![0.0; n],
            std: vec![1.0; n],
        }
    }

    /// Statistics over every frame of `frames`; near-constant coefficients
    /// keep unit scale. Values are rounded to `f32` for lossless storage.
    pub fn fit<'a>(n: usize, frames: impl IntoIterator<Item = &'a [f64]>) -> Self {
        let mut sum = vec![0.0; n];
        let mut sq = vec![0.0; n];
        let mut count = 0usize;
        for f in frames {
            for (i, v) in f.iter().enumerate() {
                sum[i] += v;
                sq[i] += v * v;
            }
            count += 1;
        }
        if count == 0 {
            return Self::identity(n);
        }
        let mean: Vec<f64> = sum
            .iter()
            .map(|s| (s / count as f64) as f32 as f64)
            .collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(s, m)| {
                let var = (s / count as f64 - m * m).max(0.0);
                let sd = var.sqrt();
                if sd < 1e-6 {
                    1.0
                } else {
                    sd as f32 as f64
                }
            })
            .collect();
        Self { mean, std }
    }

    fn apply(&self, frame: &[f64], out: &mut [f64]) {
        for (i, (o, v)) in out.iter_mut().zip(frame).enumerate() {
            *o = (v - self.mean[i]) / self.std[i];
        }
    }
}

/// Per-stage encoder outputs: hidden sequences `u` and latents `z`, each
/// channel-major `[channels, frames]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoding {
    pub u: [Tensor; STAGES],
    pub z: [Tensor; STAGES],
}

/// Everything one stage produces on the way through the model.
#[derive(Debug, Clone, PartialEq)]
pub struct StageActivations {
    pub u: Tensor,
    pub z: Tensor,
    pub q: Tensor,
    pub indices: Vec<usize>,
    /// Decoder output of this stage (`v2` from stage 3, `v1` from stage 2);
    /// stage 1's output is the reconstruction itself.
    pub v: Option<Tensor>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub reconstruction: f64,
    pub codebook: f64,
    pub commitment: f64,
    pub total: f64,
}

/// Quantization held fixed at a reference point: indices plus the `z` and
/// `q` values at that point. Every stop-gradient in the loss then becomes a
/// true constant, so the resulting function is differentiable in the
/// ordinary sense and its derivative at the reference point is exactly the
/// straight-through gradient.
#[derive(Debug, Clone)]
pub struct FrozenQuantization {
    pub stages: Vec<FrozenStage>,
}

#[derive(Debug, Clone)]
pub struct FrozenStage {
    pub indices: Vec<usize>,
    pub z: Tensor,
    pub q: Tensor,
}

pub(crate) enum QuantMode<'a> {
    Nearest,
    Frozen(&'a FrozenQuantization),
}

pub(crate) struct ForwardVars {
    pub u: Vec<Var>,
    pub z: Vec<Var>,
    pub q: Vec<Var>,
    pub v: Vec<Option<Var>>,
    pub indices: Vec<Vec<usize>>,
    pub xhat: Var,
    pub reconstruction: Var,
    pub codebook: Var,
    pub commitment: Var,
    pub total: Var,
}

/// Three-stage hierarchical VQ-VAE with a speaker embedding table.
#[derive(Debug, Clone, PartialEq)]
pub struct HVqVaeModel {
    config: ModelConfig,
    speakers: Vec<String>,
    pub(crate) params: Vec<Tensor>,
    names: Vec<String>,
    pub(crate) layout: Layout,
    pub(crate) norm: FeatureNorm,
}

impl HVqVaeModel {
    /// Randomly initialised model. Convolutions use `U(-1/sqrt(fan_in),
    /// 1/sqrt(fan_in))` with zero biases; codewords and speaker embeddings
    /// are standard normal. All values are rounded to `f32`.
    pub fn new(config: ModelConfig, speakers: Vec<String>, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(config, speakers)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        for (i, p) in model.params.iter_mut().enumerate() {
            let name = &model.names[i];
            if name.ends_with(".bias") {
                continue;
            }
            if name.starts_with("codebook") || name == "speaker_table" {
                p.data_mut()
                    .iter_mut()
                    .for_each(|v| *v = normal.sample(&mut rng));
            } else {
                let shape = p.shape();
                // conv [out, in, w] or transposed [in, out, w]; fan-in is the
                // number of inputs feeding one output
                let fan_in = if name.ends_with(".up.weight") {
                    shape[0] * shape[2]
                } else {
                    shape[1] * shape[2]
                };
                let bound = 1.0 / (fan_in as f64).sqrt();
                p.data_mut()
                    .iter_mut()
                    .for_each(|v| *v = rng.gen_range(-bound..bound));
            }
            p.round_to_f32();
        }
        Ok(model)
    }

    /// Every parameter zero, identity feature normalisation.
    pub fn zeros(config: ModelConfig, speakers: Vec<String>) -> Result<Self> {
        config.validate()?;
        if speakers.is_empty() {
            return Err(ModelError::InvalidArgument(
                "speaker table needs at least one speaker".into(),
            ));
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &speakers {
            if !seen.insert(s) {
                return Err(ModelError::InvalidArgument(format!(
                    "duplicate speaker id {s}"
                )));
            }
        }
        let (specs, layout) = parameter_specs(&config, speakers.len());
        let (names, params) = specs
            .into_iter()
            .map(|(n, s)| (n, Tensor::zeros(&s)))
            .unzip();
        Ok(Self {
            norm: FeatureNorm::identity(config.n_coeffs),
            config,
            speakers,
            params,
            names,
            layout,
        })
    }

    pub(crate) fn from_parts(
        config: ModelConfig,
        speakers: Vec<String>,
        params: Vec<Tensor>,
        norm: FeatureNorm,
    ) -> Result<Self> {
        let mut model = Self::zeros(config, speakers)?;
        if params.len() != model.params.len() {
            return Err(ModelError::Format(format!(
                "expected {} parameters, got {}",
                model.params.len(),
                params.len()
            )));
        }
        for (i, (slot, p)) in model.params.iter_mut().zip(params).enumerate() {
            if slot.shape() != p.shape() {
                return Err(ModelError::Format(format!(
                    "parameter {} has shape {:?}, expected {:?}",
                    model.names[i],
                    p.shape(),
                    slot.shape()
                )));
            }
            *slot = p;
        }
        if norm.mean.len() != model.config.n_coeffs || norm.std.len() != model.config.n_coeffs {
            return Err(ModelError::Format(
                "feature statistics do not match coefficient count".into(),
            ));
        }
        model.norm = norm;
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn speakers(&self) -> &[String] {
        &self.speakers
    }

    pub fn speaker_index(&self, id: &str) -> Result<usize> {
        self.speakers
            .iter()
            .position(|s| s == id)
            .ok_or_else(|| ModelError::UnknownSpeaker(id.to_string()))
    }

    pub fn parameters(&self) -> &[Tensor] {
        &self.params
    }

    pub fn parameter_names(&self) -> &[String] {
        &self.names
    }

    /// Mutable access for tests and tools that edit weights directly.
    pub fn parameters_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn feature_norm(&self) -> &FeatureNorm {
        &self.norm
    }

    pub fn set_feature_norm(&mut self, norm: FeatureNorm) -> Result<()> {
        if norm.mean.len() != self.config.n_coeffs || norm.std.len() != self.config.n_coeffs {
            return Err(ModelError::InvalidArgument(
                "feature statistics do not match coefficient count".into(),
            ));
        }
        self.norm = norm;
        Ok(())
    }

    pub fn codebook(&self, stage: usize) -> Result<Codebook> {
        Codebook::from_tensor(&self.params[self.layout.codebooks[stage]])
    }

    pub fn speaker_embedding(&self, id: &str) -> Result<&[f64]> {
        let i = self.speaker_index(id)?;
        let e = self.config.speaker_dim;
        Ok(&self.params[self.layout.speakers].data()[i * e..(i + 1) * e])
    }

    /// Frame count is admissible when every stage divides it evenly.
    pub fn check_frames(&self, t: usize) -> Result<()> {
        let f = self.config.total_stride();
        if t == 0 || !t.is_multiple_of(f) {
            return Err(ModelError::InvalidArgument(format!(
                "{t} frames: the encoder needs a positive multiple of {f}"
            )));
        }
        Ok(())
    }

    /// Normalised, channel-major copy of `x`: `[n_coeffs, frames]`.
    pub(crate) fn prepare_input(&self, x: &MelCepstrogram) -> Result<Tensor> {
        if x.n_coeffs != self.config.n_coeffs {
            return Err(ModelError::InvalidArgument(format!(
                "features have {} coefficients, model expects {}",
                x.n_coeffs, self.config.n_coeffs
            )));
        }
        let (c, t) = (x.n_coeffs, x.n_frames);
        let mut out = vec![0.0; c * t];
        let mut buf = vec![0.0; c];
        for (ti, frame) in x.frames().enumerate() {
            self.norm.apply(frame, &mut buf);
            for r in 0..c {
                out[r * t + ti] = buf[r];
            }
        }
        Ok(Tensor::new(vec![c, t], out)?)
    }

    /// Inverse of [`Self::prepare_input`].
    pub(crate) fn finish_output(&self, xhat: &Tensor) -> Result<MelCepstrogram> {
        let (c, t) = xhat.dims2()?;
        let v = xhat.data();
        let mut data = Vec::with_capacity(c * t);
        for ti in 0..t {
            for r in 0..c {
                data.push(v[r * t + ti] * self.norm.std[r] + self.norm.mean[r]);
            }
        }
        Ok(MelCepstrogram::new(data, t, c)?)
    }

    pub(crate) fn leaves(&self, g: &mut Graph, trainable: bool) -> Vec<Var> {
        self.params
            .iter()
            .map(|p| {
                if trainable {
                    g.param(p.clone())
                } else {
                    g.constant(p.clone())
                }
            })
            .collect()
    }

    fn conv(
        &self,
        g: &mut Graph,
        p: &[Var],
        idx: ConvIdx,
        x: Var,
        stride: usize,
        padding: usize,
    ) -> Result<Var> {
        let y = g.conv1d(x, p[idx.w], stride, padding)?;
        Ok(g.add_bias(y, p[idx.b])?)
    }

    /// Encoder chain `x -> u1 -> u2 -> u3`, with `z_n` projected from `u_n`.
    pub(crate) fn build_encoder(
        &self,
        g: &mut Graph,
        p: &[Var],
        x: Var,
    ) -> Result<(Vec<Var>, Vec<Var>)> {
        let pad = self.config.kernel / 2;
        let mut h = x;
        let (mut us, mut zs) = (Vec::new(), Vec::new());
        for (n, enc) in self.layout.encoders.iter().enumerate() {
            let a = self.conv(g, p, enc.down, h, self.config.strides[n], pad)?;
            let a = g.relu(a);
            let u = self.conv(g, p, enc.refine, a, 1, pad)?;
            let u = g.relu(u);
            let z = self.conv(g, p, enc.proj, u, 1, 0)?;
            us.push(u);
            zs.push(z);
            h = u;
        }
        Ok((us, zs))
    }

    /// Decoder chain `q3 -> v2`, `[q2, v2] -> v1`, `[q1, v1] -> x_hat`, every
    /// stage also seeing the speaker embedding repeated along time.
    pub(crate) fn build_decoder(
        &self,
        g: &mut Graph,
        p: &[Var],
        qs: &[Var],
        speaker: usize,
    ) -> Result<(Var, Vec<Option<Var>>)> {
        let pad = self.config.kernel / 2;
        let spk = g.embedding(p[self.layout.speakers], &[speaker])?;
        let mut v: Option<Var> = None;
        let mut vs = vec![None; STAGES];
        for n in (0..STAGES).rev() {
            let dec = self.layout.decoders[n];
            let frames = g.value(qs[n]).shape()[1];
            let e = g.broadcast_columns(spk, frames)?;
            let mut parts = vec![qs[n]];
            parts.extend(v);
            parts.push(e);
            let input = g.concat_rows(&parts)?;
            let h = self.conv(g, p, dec.mix, input, 1, pad)?;
            let h = g.relu(h);
            let (_, up_pad) = self.config.upsample_geometry(n);
            let out = g.conv_transpose1d(h, p[dec.up.w], self.config.strides[n], up_pad)?;
            let out = g.add_bias(out, p[dec.up.b])?;
            vs[n] = Some(out);
            v = Some(out);
        }
        // vs[n] is what stage n+1 emits; stage 1's output is x_hat
        let xhat = vs[0].take().unwrap();
        Ok((xhat, vs))
    }

    /// Full forward pass with the three-term loss.
    pub(crate) fn build_forward(
        &self,
        g: &mut Graph,
        p: &[Var],
        x: &Tensor,
        speaker: usize,
        mask: Option<&Tensor>,
        mode: QuantMode<'_>,
    ) -> Result<ForwardVars> {
        let xv = g.constant(x.clone());
        let (us, zs) = self.build_encoder(g, p, xv)?;
        let mut qs = Vec::with_capacity(STAGES);
        let mut indices = Vec::with_capacity(STAGES);
        let mut cb_terms = Vec::with_capacity(STAGES);
        let mut commit_terms = Vec::with_capacity(STAGES);
        for n in 0..STAGES {
            let z = zs[n];
            let cb = p[self.layout.codebooks[n]];
            match mode {
                QuantMode::Nearest => {
                    let book = Codebook::from_tensor(g.value(cb))?;
                    let (_, idx) = book.quantize_columns(g.value(z))?;
                    let q = g.embedding(cb, &idx)?;
                    qs.push(g.straight_through(z, q)?);
                    let z_sg = g.detach(z);
                    cb_terms.push(g.mse(z_sg, q)?);
                    let q_sg = g.detach(q);
                    commit_terms.push(g.mse(z, q_sg)?);
                    indices.push(idx);
                }
                QuantMode::Frozen(frozen) => {
                    let st = &frozen.stages[n];
                    let q = g.embedding(cb, &st.indices)?;
                    let offset: Vec<f64> =
                        st.q.data()
                            .iter()
                            .zip(st.z.data())
                            .map(|(q, z)| q - z)
                            .collect();
                    let offset = g.constant(Tensor::new(st.z.shape().to_vec(), offset)?);
                    qs.push(g.add(z, offset)?);
                    let z0 = g.constant(st.z.clone());
                    cb_terms.push(g.mse(z0, q)?);
                    let q0 = g.constant(st.q.clone());
                    commit_terms.push(g.mse(z, q0)?);
                    indices.push(st.indices.clone());
                }
            }
        }
        let (xhat, v) = self.build_decoder(g, p, &qs, speaker)?;
        let reconstruction = g.l1(xhat, xv, mask)?;
        let codebook = sum_scalars(g, &cb_terms)?;
        let commitment = sum_scalars(g, &commit_terms)?;
        let weighted = g.scale(commitment, self.config.beta);
        let partial = g.add(reconstruction, codebook)?;
        let total = g.add(partial, weighted)?;
        Ok(ForwardVars {
            u: us,
            z: zs,
            q: qs,
            v,
            indices,
            xhat,
            reconstruction,
            codebook,
            commitment,
            total,
        })
    }

    pub fn encode(&self, x: &MelCepstrogram) -> Result<Encoding> {
        self.check_frames(x.n_frames)?;
        let input = self.prepare_input(x)?;
        let mut g = Graph::new();
        let p = self.leaves(&mut g, false);
        let xv = g.constant(input);
        let (us, zs) = self.build_encoder(&mut g, &p, xv)?;
        Ok(Encoding {
            u: stage_values(&g, &us),
            z: stage_values(&g, &zs),
        })
    }

    /// Nearest-codeword quantization of stage `stage`'s latent `[D, T]`.
    pub fn quantize(&self, stage: usize, z: &Tensor) -> Result<(Tensor, Vec<usize>)> {
        self.codebook(stage)?.quantize_columns(z)
    }

    pub fn decode(&self, q: &[Tensor; STAGES], speaker: &str) -> Result<MelCepstrogram> {
        let spk = self.speaker_index(speaker)?;
        let d = self.config.latent_dim;
        for n in 1..STAGES {
            let (dn, tn) = q[n].dims2()?;
            let (_, prev) = q[n - 1].dims2()?;
            if dn != d || tn * self.config.strides[n] != prev {
                return Err(ModelError::InvalidArgument(format!(
                    "q{} is {:?}, inconsistent with q{} {:?}",
                    n + 1,
                    q[n].shape(),
                    n,
                    q[n - 1].shape()
                )));
            }
        }
        let mut g = Graph::new();
        let p = self.leaves(&mut g, false);
        let qs: Vec<Var> = q.iter().map(|t| g.constant(t.clone())).collect();
        let (xhat, _) = self.build_decoder(&mut g, &p, &qs, spk)?;
        self.finish_output(g.value(xhat))
    }

    /// Encode, quantize and decode `x` as `speaker`, returning every stage's
    /// activations alongside the reconstruction.
    pub fn run(
        &self,
        x: &MelCepstrogram,
        speaker: &str,
    ) -> Result<(MelCepstrogram, Vec<StageActivations>, LossBreakdown)> {
        self.check_frames(x.n_frames)?;
        let spk = self.speaker_index(speaker)?;
        let input = self.prepare_input(x)?;
        let mut g = Graph::new();
        let p = self.leaves(&mut g, false);
        let f = self.build_forward(&mut g, &p, &input, spk, None, QuantMode::Nearest)?;
        let stages = (0..STAGES)
            .map(|n| StageActivations {
                u: g.value(f.u[n]).clone(),
                z: g.value(f.z[n]).clone(),
                q: g.value(f.q[n]).clone(),
                indices: f.indices[n].clone(),
                v: f.v[n].map(|v| g.value(v).clone()),
            })
            .collect();
        let losses = breakdown(&g, &f);
        Ok((self.finish_output(g.value(f.xhat))?, stages, losses))
    }

    pub fn forward_loss(&self, x: &MelCepstrogram, speaker: &str) -> Result<LossBreakdown> {
        Ok(self.run(x, speaker)?.2)
    }

    /// Losses and straight-through gradients for every parameter, in
    /// parameter order.
    pub fn loss_and_gradients(
        &self,
        x: &MelCepstrogram,
        speaker: &str,
    ) -> Result<(LossBreakdown, Vec<Tensor>)> {
        self.check_frames(x.n_frames)?;
        let spk = self.speaker_index(speaker)?;
        let input = self.prepare_input(x)?;
        let mut g = Graph::new();
        let p = self.leaves(&mut g, true);
        let f = self.build_forward(&mut g, &p, &input, spk, None, QuantMode::Nearest)?;
        let grads = g.backward(f.total)?;
        Ok((breakdown(&g, &f), collect_grads(&grads, &p, &self.params)))
    }

    /// The quantization `x` receives at the current parameters.
    pub fn freeze_quantization(&self, x: &MelCepstrogram) -> Result<FrozenQuantization> {
        let enc = self.encode(x)?;
        let stages = (0..STAGES)
            .map(|n| {
                let (q, indices) = self.quantize(n, &enc.z[n])?;
                Ok(FrozenStage {
                    indices,
                    z: enc.z[n].clone(),
                    q,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FrozenQuantization { stages })
    }

    /// Total loss with quantization held at `frozen`; see
    /// [`FrozenQuantization`].
    pub fn frozen_loss(
        &self,
        x: &MelCepstrogram,
        speaker: &str,
        frozen: &FrozenQuantization,
    ) -> Result<f64> {
        self.check_frames(x.n_frames)?;
        let spk = self.speaker_index(speaker)?;
        let input = self.prepare_input(x)?;
        let mut g = Graph::new();
        let p = self.leaves(&mut g, false);
        let f = self.build_forward(&mut g, &p, &input, spk, None, QuantMode::Frozen(frozen))?;
        Ok(g.value(f.total).data()[0])
    }

    /// Re-synthesises `source` with `target`'s embedding. Inputs of any
    /// length are zero-padded to an admissible frame count and the output
    /// cropped back.
    pub fn convert(&self, source: &MelCepstrogram, target: &str) -> Result<MelCepstrogram> {
        self.speaker_index(target)?;
        if source.n_frames == 0 {
            return Err(ModelError::InvalidArgument(
                "cannot convert an empty utterance".into(),
            ));
        }
        let f = self.config.total_stride();
        let padded_len = source.n_frames.div_ceil(f) * f;
        let c = source.n_coeffs;
        let mut data = source.data.clone();
        // pad with the feature mean so padding normalises to zero
        for _ in source.n_frames..padded_len {
            data.extend_from_slice(&self.norm.mean);
        }
        let padded = MelCepstrogram::new(data, padded_len, c)?;
        let (out, _, _) = self.run(&padded, target)?;
        Ok(MelCepstrogram::new(
            out.data[..source.n_frames * c].to_vec(),
            source.n_frames,
            c,
        )?)
    }

    /// Per-stage codebook perplexity of the quantization of `x`.
    pub fn perplexities(&self, x: &MelCepstrogram) -> Result<[f64; STAGES]> {
        let frozen = self.freeze_quantization(x)?;
        let k = self.config.codebook_size;
        Ok([0, 1, 2].map(|n| codebook_perplexity(&frozen.stages[n].indices, k)))
    }
}

fn sum_scalars(g: &mut Graph, terms: &[Var]) -> Result<Var> {
    let mut acc = terms[0];
    for &t in &terms[1..] {
        acc = g.add(acc, t)?;
    }
    Ok(acc)
}

fn stage_values(g: &Graph, vars: &[Var]) -> [Tensor; STAGES] {
    [0, 1, 2].map(|n| g.value(vars[n]).clone())
}

pub(crate) fn breakdown(g: &Graph, f: &ForwardVars) -> LossBreakdown {
    let s = |v: Var| g.value(v).data()[0];
    LossBreakdown {
        reconstruction: s(f.reconstruction),
        codebook: s(f.codebook),
        commitment: s(f.commitment),
        total: s(f.total),
    }
}

pub(crate) fn collect_grads(grads: &Gradients, vars: &[Var], like: &[Tensor]) -> Vec<Tensor> {
    vars.iter()
        .zip(like)
        .map(|(&v, t)| grads.get_or_zeros(v, t))
        .collect()
}
