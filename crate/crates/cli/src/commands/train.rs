use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use pathovc::corpus::FeatureStore;
use pathovc::vqvae::{
    save_checkpoint, HVqVaeModel, StepReport, Trainer, TrainingSet, TrainingUtterance,
};

use super::{require_dir, require_file, Run};
use crate::{CliError, Result};

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const REPORT_FILE: &str = "train_report.csv";
const REPORT_HEADER: [&str; 8] = [
    "step",
    "loss",
    "reconstruction",
    "codebook",
    "commitment",
    "perplexity_1",
    "perplexity_2",
    "perplexity_3",
];

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub checkpoint: PathBuf,
    pub report: PathBuf,
    pub steps: Vec<StepReport>,
    pub utterances: usize,
    pub speakers: Vec<String>,
}

/// One utterance key per line; blank lines and `#` comments are ignored.
pub fn read_key_list(path: &Path) -> Result<Vec<String>> {
    require_file(path, "key list")?;
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

fn select_training_keys(store: &FeatureStore, list: Option<&Path>) -> Result<Vec<String>> {
    let Some(path) = list else {
        return Ok(store
            .entries
            .iter()
            .filter(|(_, e)| !e.block.is_test())
            .map(|(k, _)| k.clone())
            .collect());
    };
    let keys = read_key_list(path)?;
    let unknown: Vec<&str> = keys
        .iter()
        .filter(|k| !store.entries.contains_key(*k))
        .map(String::as_str)
        .collect();
    if !unknown.is_empty() {
        return Err(CliError::User(format!(
            "training list names {} key(s) missing from the feature store: {}",
            unknown.len(),
            unknown.join(", ")
        )));
    }
    let test: Vec<&str> = keys
        .iter()
        .filter(|k| store.entries[*k].block.is_test())
        .map(String::as_str)
        .collect();
    if !test.is_empty() {
        return Err(CliError::User(format!(
            "refusing to train: {} test-block (B2) utterance(s) in the training list: {}",
            test.len(),
            test.join(", ")
        )));
    }
    let mut seen = BTreeSet::new();
    Ok(keys
        .into_iter()
        .filter(|k| seen.insert(k.clone()))
        .collect())
}

/// Trains on the B1 and B3 utterances of a feature store, or on an explicit
/// key list that must not contain B2 utterances. Writes the checkpoint and
/// a per-step report CSV.
pub fn cmd_train(run: &Run, features: &Path, train_list: Option<&Path>) -> Result<TrainOutput> {
    let seed = run.config.require_seed()?;
    require_dir(features, "feature store")?;
    let store = FeatureStore::open(features).map_err(|e| {
        CliError::User(format!(
            "cannot open feature store {}: {e}",
            features.display()
        ))
    })?;
    let keys = select_training_keys(&store, train_list)?;
    if keys.is_empty() {
        return Err(CliError::user("no B1/B3 utterances to train on"));
    }

    let mut utterances = Vec::with_capacity(keys.len());
    for k in &keys {
        let features = store.read(k)?;
        if features.n_coeffs != run.config.model.n_coeffs {
            return Err(CliError::User(format!(
                "{k}: {} coefficients, model.n_coeffs is {}",
                features.n_coeffs, run.config.model.n_coeffs
            )));
        }
        utterances.push(TrainingUtterance {
            key: k.clone(),
            speaker: store.entries[k].speaker_id.clone(),
            features,
        });
    }
    let speakers: Vec<String> = utterances
        .iter()
        .map(|u| u.speaker.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n_utts = utterances.len();
    let set = TrainingSet::new(utterances, &speakers)?;

    let model = HVqVaeModel::new(run.config.model.clone(), speakers.clone(), seed)?;
    let cfg = pathovc::vqvae::TrainConfig {
        seed: seed.wrapping_add(1),
        ..run.config.train.clone()
    };
    let total = cfg.steps;
    let mut trainer = Trainer::new(model, set, cfg)?;
    log::info!(
        "training on {n_utts} utterances from {} speakers for {total} steps",
        speakers.len()
    );
    let mut steps = Vec::with_capacity(total);
    for _ in 0..total {
        let r = trainer.step()?;
        if r.step % 50 == 0 || r.step == total {
            log::info!("step {}: loss {:.5}", r.step, r.loss.total);
        }
        steps.push(r);
    }

    run.create_out()?;
    let checkpoint = run.out.join(CHECKPOINT_FILE);
    save_checkpoint(trainer.model(), &checkpoint)?;
    let report = run.out.join(REPORT_FILE);
    let mut w = csv::Writer::from_path(&report)?;
    w.write_record(REPORT_HEADER)?;
    for r in &steps {
        let l = r.loss;
        let mut row = vec![
            r.step.to_string(),
            l.total.to_string(),
            l.reconstruction.to_string(),
            l.codebook.to_string(),
            l.commitment.to_string(),
        ];
        row.extend(r.perplexity.iter().map(|p| p.to_string()));
        w.write_record(row)?;
    }
    w.flush()?;
    std::fs::write(run.out.join("run_config.toml"), run.config.to_toml()?)?;
    Ok(TrainOutput {
        checkpoint,
        report,
        steps,
        utterances: n_utts,
        speakers,
    })
}
