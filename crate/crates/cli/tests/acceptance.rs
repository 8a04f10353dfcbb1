//! One PASS/FAIL line per acceptance criterion. Exits nonzero if any fail.

mod common;

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use pathovc::corpus::{
    pair_speakers, partition_blocks, CorpusManifest, ManifestOptions, PairingOptions, Percent,
};
use pathovc::diffcore::gradcheck::{check_primitive, relative_error, Primitive};
use pathovc::dsp::{
    griffin_lim_traced, invert_mel_cepstrum, mel_cepstrum, mel_spectrogram, DspConfig,
    MelCepstrogram, Stft, Waveform, LOG_FLOOR,
};
use pathovc::stats::{
    ab_agreement, midranks, mos_summary, wilcoxon_signed_rank, AbTrial, Condition, Expectation,
    Judgment, MosRating, PairKind,
};
use pathovc::vqvae::toy::{
    desk_model_config, desk_train_config, mean_sq_distance, two_speaker_corpus,
};
use pathovc::vqvae::{
    read_checkpoint, train, write_checkpoint, Codebook, HVqVaeModel, ModelConfig, TrainingSet,
};
use pathovc_cli::commands::{cmd_preprocess, cmd_train};
use pathovc_cli::{Run, RunConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(t: Instant, limit: Duration) -> Result<(), String> {
    ensure(
        t.elapsed() < limit,
        format!("took {:?}, limit {limit:?}", t.elapsed()),
    )
}

fn ac1_gradients() -> Outcome {
    let t = Instant::now();
    let mut worst = 0.0f64;
    for p in Primitive::ALL {
        let r = check_primitive(p, 100, 2024).map_err(|e| e.to_string())?;
        ensure(
            r.max_rel_error <= 1e-4,
            format!("{}: {:e}", p.name(), r.max_rel_error),
        )?;
        worst = worst.max(r.max_rel_error);
    }

    let cfg = ModelConfig {
        n_coeffs: 5,
        hidden: 6,
        latent_dim: 3,
        codebook_size: 4,
        speaker_dim: 2,
        kernel: 3,
        ..ModelConfig::default()
    };
    let m = HVqVaeModel::new(cfg, vec!["A".into(), "B".into()], 11).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = MelCepstrogram::new(
        (0..16 * 5).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        16,
        5,
    )
    .unwrap();
    let frozen = m.freeze_quantization(&x).unwrap();
    let (_, grads) = m.loss_and_gradients(&x, "A").unwrap();
    let mut probe = m.clone();
    let h = 1e-5;
    let mut composite = 0.0f64;
    for _ in 0..150 {
        let i = rng.gen_range(0..m.parameters().len());
        let j = rng.gen_range(0..m.parameters()[i].len());
        let x0 = m.parameters()[i].data()[j];
        probe.parameters_mut()[i].data_mut()[j] = x0 + h;
        let up = probe.frozen_loss(&x, "A", &frozen).unwrap();
        probe.parameters_mut()[i].data_mut()[j] = x0 - h;
        let down = probe.frozen_loss(&x, "A", &frozen).unwrap();
        probe.parameters_mut()[i].data_mut()[j] = x0;
        composite = composite.max(relative_error(grads[i].data()[j], (up - down) / (2.0 * h)));
    }
    ensure(composite <= 1e-4, format!("forward_loss: {composite:e}"))?;
    within(t, Duration::from_secs(60))?;
    Ok(format!(
        "{} primitives x 100 cases max {worst:.1e}; forward_loss 150 cases max {composite:.1e}",
        Primitive::ALL.len()
    ))
}

fn ac2_quantizer() -> Outcome {
    let t = Instant::now();
    let (k, d) = (64, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut ties = 0;
    for case in 0..1000 {
        let grid = case % 2 == 0;
        let draw = |rng: &mut ChaCha8Rng| {
            if grid {
                rng.gen_range(-1i32..=1) as f64
            } else {
                rng.gen_range(-1.0..1.0)
            }
        };
        let cb: Vec<f64> = (0..k * d).map(|_| draw(&mut rng)).collect();
        let row: Vec<f64> = (0..d).map(|_| draw(&mut rng)).collect();
        let dist: Vec<f64> = (0..k)
            .map(|i| (0..d).map(|j| (cb[i * d + j] - row[j]).powi(2)).sum())
            .collect();
        let best = dist.iter().cloned().fold(f64::INFINITY, f64::min);
        let want = dist.iter().position(|&v| v == best).unwrap();
        if dist.iter().filter(|&&v| v == best).count() > 1 {
            ties += 1;
        }
        let (_, idx) = Codebook::new(k, d, cb)
            .unwrap()
            .quantize_rows(&row)
            .unwrap();
        ensure(
            idx[0] == want,
            format!("case {case}: got {} want {want}", idx[0]),
        )?;
    }
    within(t, Duration::from_secs(10))?;
    Ok(format!("1000 cases index-exact, {ties} with tied minima"))
}

fn ac3_conversion() -> Outcome {
    let t = Instant::now();
    let corpus = two_speaker_corpus(40, 8, 64, 1);
    let model = HVqVaeModel::new(desk_model_config(), corpus.speakers.clone(), 7)
        .map_err(|e| e.to_string())?;
    let set =
        TrainingSet::new(corpus.utterances.clone(), &corpus.speakers).map_err(|e| e.to_string())?;
    let (m, reports) = train(model, set, desk_train_config()).map_err(|e| e.to_string())?;
    let ratio = reports[reports.len() - 1].loss.reconstruction / reports[0].loss.reconstruction;
    ensure(reports.len() == 200, "expected 200 steps")?;
    ensure(ratio <= 0.5, format!("reconstruction ratio {ratio:.3}"))?;
    let mut detail = format!("ratio {ratio:.3}");
    for (src, tgt) in [("A", "B"), ("B", "A")] {
        let (mut dt, mut ds) = (0.0, 0.0);
        for u in corpus.utterances.iter().filter(|u| u.speaker == src) {
            let y = m.convert(&u.features, tgt).unwrap();
            dt += mean_sq_distance(&y, corpus.prototype(tgt).unwrap());
            ds += mean_sq_distance(&y, corpus.prototype(src).unwrap());
        }
        ensure(
            dt < ds,
            format!("{src}->{tgt}: target {dt:.3} source {ds:.3}"),
        )?;
        detail.push_str(&format!(
            "; {src}->{tgt} d(target) {:.2} < d(source) {:.2}",
            dt / 8.0,
            ds / 8.0
        ));
    }
    within(t, Duration::from_secs(300))?;
    Ok(detail)
}

fn ac4_protocol() -> Outcome {
    let mut text = String::from(common::HEADER);
    for (id, score) in common::TABLE_ONE {
        text.push_str(&format!("{id},M,{score},,,,\n"));
        for b in ["B1", "B2", "B3"] {
            for w in 0..449 {
                text.push_str(&format!("{id},,,,W{w:03},{b},{id}/{b}_W{w:03}.wav\n"));
            }
        }
    }
    let opts = ManifestOptions {
        check_audio: false,
        ..ManifestOptions::default()
    };
    let m = CorpusManifest::from_reader(text.as_bytes(), PathBuf::from("."), &opts)
        .map_err(|e| e.to_string())?;
    let p = partition_blocks(&m);
    p.check(&m).map_err(|e| e.to_string())?;
    let train: BTreeSet<String> = p.train.iter().map(|u| u.key()).collect();
    let test: BTreeSet<String> = p.test.iter().map(|u| u.key()).collect();
    ensure(
        p.train.len() == 2 * p.test.len(),
        format!("{} train vs {} test", p.train.len(), p.test.len()),
    )?;
    ensure(
        train.is_disjoint(&test) && train.len() + test.len() == m.utterances.len(),
        "not a partition",
    )?;

    let pairs = pair_speakers(&m, Percent::MAX, &PairingOptions::default());
    let got: Vec<String> = pairs
        .pairs
        .iter()
        .map(|p| format!("{}-{} {}", p.a, p.b, p.delta))
        .collect();
    ensure(
        got == ["M04-M12 5.4", "M05-M11 4.0", "M08-M10 0.0"],
        format!("pairs {got:?}"),
    )?;
    Ok(format!(
        "{} utterances: {} train / {} test; {}",
        m.utterances.len(),
        p.train.len(),
        p.test.len(),
        got.join(", ")
    ))
}

fn ac5_wilcoxon() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut tested = 0;
    while tested < 200 {
        let n = rng.gen_range(1..=12);
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=5) as f64).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=5) as f64).collect();
        let Ok(r) = wilcoxon_signed_rank(&a, &b) else {
            continue;
        };
        let mags: Vec<f64> = a
            .iter()
            .zip(&b)
            .map(|(x, y)| x - y)
            .filter(|d| *d != 0.0)
            .map(f64::abs)
            .collect();
        let ranks = midranks(&mags);
        let total: f64 = ranks.iter().sum();
        let extreme = (0u32..1 << ranks.len())
            .filter(|mask| {
                let wp: f64 = (0..ranks.len())
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| ranks[i])
                    .sum();
                wp <= r.w + 1e-9 || wp >= total - r.w - 1e-9
            })
            .count();
        let oracle = extreme as f64 / (1u64 << ranks.len()) as f64;
        ensure(
            r.p_two_sided == oracle,
            format!("n {}: p {} oracle {oracle}", r.n, r.p_two_sided),
        )?;
        tested += 1;
    }
    let f =
        wilcoxon_signed_rank(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0.0; 5]).map_err(|e| e.to_string())?;
    ensure(
        f.w == 0.0 && f.p_two_sided == 0.0625,
        format!("fixture W {} p {}", f.w, f.p_two_sided),
    )?;
    within(t, Duration::from_secs(30))?;
    Ok(format!(
        "200 random sets equal enumeration; n=5 all positive p = {}",
        f.p_two_sided
    ))
}

fn ac6_stats() -> Outcome {
    let trials = |kind: PairKind, spec: &[(Judgment, usize)]| -> Vec<AbTrial> {
        spec.iter()
            .flat_map(|&(j, n)| std::iter::repeat_n(j, n))
            .enumerate()
            .map(|(i, judgment)| AbTrial {
                listener_id: format!("L{}", i % 10),
                pair_kind: kind,
                judgment,
            })
            .collect()
    };
    use Judgment::*;
    let cases: [(PairKind, Expectation, Vec<(Judgment, usize)>, bool, f64); 6] = [
        (
            PairKind::VcVsTarget,
            Expectation::Same,
            vec![(SameSure, 10), (SameNotSure, 12), (DifferentSure, 8)],
            false,
            73.33,
        ),
        (
            PairKind::VcVsTarget,
            Expectation::Same,
            vec![(SameSure, 100), (SameNotSure, 69), (DifferentNotSure, 131)],
            false,
            56.33,
        ),
        (
            PairKind::VcVsTarget,
            Expectation::Same,
            vec![(SameSure, 4), (SameNotSure, 10), (DifferentSure, 16)],
            false,
            46.66,
        ),
        (
            PairKind::VcVsTarget,
            Expectation::Same,
            vec![(SameSure, 20), (SameNotSure, 10), (DifferentSure, 10)],
            false,
            75.0,
        ),
        (
            PairKind::VcVsSource,
            Expectation::Different,
            vec![(DifferentSure, 20), (DifferentNotSure, 7), (SameSure, 3)],
            false,
            90.0,
        ),
        (
            PairKind::VcVsTarget,
            Expectation::Same,
            vec![(SameSure, 6), (SameNotSure, 4), (DifferentSure, 20)],
            true,
            20.0,
        ),
    ];
    let mut got = Vec::new();
    for (kind, exp, spec, sure, want) in cases {
        let a = ab_agreement(&trials(kind, &spec), exp).map_err(|e| e.to_string())?;
        let v = if sure {
            a.reported_matching_sure()
        } else {
            a.reported_matching()
        };
        ensure(v == want, format!("{kind}: {v} want {want}"))?;
        ensure(
            a.percent_matching() + a.percent_not_matching() == 100.0,
            "percentages do not sum to 100",
        )?;
        got.push(format!("{v:.2}"));
    }

    let scores = [4u8, 5, 3, 4, 4, 5, 3, 4, 2, 5];
    let ratings: Vec<MosRating> = scores
        .iter()
        .enumerate()
        .map(|(i, &s)| MosRating::new(format!("L{i}"), Condition::GtMid, s).unwrap())
        .collect();
    let s = mos_summary(&ratings)[0];
    let half = 2.2621571627409915 * (8.9f64 / 9.0).sqrt() / 10f64.sqrt();
    let (lo, hi) = s.ci95.ok_or("no interval")?;
    ensure(
        (s.mean - 3.9).abs() <= 1e-9
            && (lo - 3.9 + half).abs() <= 1e-9
            && (hi - 3.9 - half).abs() <= 1e-9,
        format!("mos {s:?}"),
    )?;
    let two: Vec<MosRating> = [1u8, 5]
        .iter()
        .map(|&v| MosRating::new("L", Condition::VcLow, v).unwrap())
        .collect();
    let h2 = mos_summary(&two)[0].half_width().unwrap();
    let closed = (1.0 / (std::f64::consts::PI * 0.025).tan()) * 8f64.sqrt() / 2f64.sqrt();
    ensure(
        (h2 - closed).abs() <= 1e-9,
        format!("{{1,5}} half width {h2} vs {closed}"),
    )?;
    Ok(format!(
        "AB {}; MOS 3.9 +/- {half:.4}; {{1,5}} +/- {h2:.2}",
        got.join(" ")
    ))
}

fn ac7_dsp() -> Outcome {
    let cfg = DspConfig::default();
    let sr = cfg.sample_rate as f64;
    let w = Waveform::new(
        (0..12_000)
            .map(|i| (i as f64 * 0.031).sin() + 0.3 * (i as f64 * 0.211).cos())
            .collect(),
        cfg.sample_rate,
    )
    .unwrap();
    let ms = mel_spectrogram(&w, &cfg).map_err(|e| e.to_string())?;
    let back =
        invert_mel_cepstrum(&mel_cepstrum(&ms, cfg.n_mels - 1).unwrap(), cfg.n_mels).unwrap();
    let err = ms
        .data
        .iter()
        .zip(&back.data)
        .map(|(a, b)| (a.max(LOG_FLOOR).ln() - b.ln()).abs())
        .fold(0.0f64, f64::max);
    ensure(err <= 1e-9, format!("cepstrum round trip {err:e}"))?;

    let tone = Waveform::new(
        (0..24_000)
            .map(|i| 0.5 * (2.0 * std::f64::consts::PI * 440.0 * i as f64 / sr).sin())
            .collect(),
        cfg.sample_rate,
    )
    .unwrap();
    let trace = griffin_lim_traced(&mel_spectrogram(&tone, &cfg).unwrap(), &cfg, 60)
        .map_err(|e| e.to_string())?;
    let stft = Stft::new(cfg.fft_size, cfg.window_size, cfg.hop_size);
    let peak = |x: &[f64]| {
        let mut acc = vec![0.0; stft.n_bins()];
        for f in stft.analyze(x) {
            for (a, c) in acc.iter_mut().zip(&f) {
                *a += c.norm();
            }
        }
        (0..acc.len())
            .max_by(|&i, &j| acc[i].total_cmp(&acc[j]))
            .unwrap()
    };
    let (want, got) = (peak(&tone.samples), peak(&trace.waveform.samples));
    ensure(
        want.abs_diff(got) <= 1,
        format!("peak bin {got}, tone at {want}"),
    )?;
    let sc = &trace.spectral_convergence;
    ensure(
        sc.windows(2).all(|p| p[1] <= p[0] + 1e-12),
        "spectral convergence increased",
    )?;
    Ok(format!(
        "log-mel error {err:.1e}; 440 Hz peak bin {want} -> {got}; convergence {:.3} -> {:.3}",
        sc[0],
        sc[sc.len() - 1]
    ))
}

fn ac8_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let manifest = common::write_corpus(d, 2);
    let cfg = RunConfig::from_toml(common::TINY_CONFIG).map_err(|e| e.to_string())?;
    let feats = Run::new(cfg.clone(), d.join("feats")).map_err(|e| e.to_string())?;
    cmd_preprocess(&feats, &manifest).map_err(|e| e.to_string())?;
    let mut bytes = Vec::new();
    let mut losses = Vec::new();
    for name in ["a", "b"] {
        let run = Run::new(cfg.clone(), d.join(name)).map_err(|e| e.to_string())?;
        let out = cmd_train(&run, &feats.out, None).map_err(|e| e.to_string())?;
        bytes.push(std::fs::read(&out.checkpoint).map_err(|e| e.to_string())?);
        losses.push(out.steps.last().unwrap().loss.total);
    }
    ensure(bytes[0] == bytes[1], "checkpoints differ")?;
    ensure(
        losses[0].to_bits() == losses[1].to_bits(),
        "final losses differ",
    )?;
    let model = read_checkpoint(&bytes[0][..]).map_err(|e| e.to_string())?;
    let mut again = Vec::new();
    write_checkpoint(&model, &mut again).map_err(|e| e.to_string())?;
    ensure(again == bytes[0], "re-encoding changed the checkpoint")?;
    let reread = read_checkpoint(&again[..]).map_err(|e| e.to_string())?;
    let exact = reread
        .parameters()
        .iter()
        .zip(model.parameters())
        .all(|(a, b)| {
            a.shape() == b.shape()
                && a.data()
                    .iter()
                    .zip(b.data())
                    .all(|(x, y)| x.to_bits() == y.to_bits())
        });
    ensure(
        exact && reread.feature_norm() == model.feature_norm(),
        "round trip not bit-exact",
    )?;
    Ok(format!(
        "two runs, {} identical checkpoint bytes, final loss {}",
        bytes[0].len(),
        losses[0]
    ))
}

fn main() {
    let checks: [(&str, fn() -> Outcome); 8] = [
        ("AC1", ac1_gradients),
        ("AC2", ac2_quantizer),
        ("AC3", ac3_conversion),
        ("AC4", ac4_protocol),
        ("AC5", ac5_wilcoxon),
        ("AC6", ac6_stats),
        ("AC7", ac7_dsp),
        ("AC8", ac8_determinism),
    ];
    let mut failed = 0;
    for (name, f) in checks {
        let t = Instant::now();
        let r = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match r {
            Ok(msg) => println!("{name} PASS ({:.1}s) {msg}", t.elapsed().as_secs_f64()),
            Err(msg) => {
                failed += 1;
                println!("{name} FAIL ({:.1}s) {msg}", t.elapsed().as_secs_f64());
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
