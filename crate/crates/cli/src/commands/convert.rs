use std::path::{Path, PathBuf};

use pathovc::corpus::FeatureStore;
use pathovc::dsp::{griffin_lim, invert_mel_cepstrum, write_mcep, write_wav};
use pathovc::vqvae::load_checkpoint;

use super::{read_key_list, require_dir, require_file, Run};
use crate::{CliError, Result};

#[derive(Debug, Clone)]
pub struct ConvertRequest<'a> {
    pub checkpoint: &'a Path,
    pub features: &'a Path,
    pub target: &'a str,
    /// Restrict the default selection to one source speaker.
    pub source: Option<&'a str>,
    /// Explicit utterance keys instead of every B2 utterance.
    pub keys: Option<&'a Path>,
    /// Also allow B1/B3 utterances.
    pub allow_train_blocks: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Converted {
    pub key: String,
    pub features: PathBuf,
    pub wav: Option<PathBuf>,
}

/// Decodes each selected utterance with the target speaker's embedding and
/// writes `KEY_to_TARGET.mcep`, plus a Griffin-Lim waveform unless disabled.
pub fn cmd_convert(run: &Run, req: &ConvertRequest<'_>) -> Result<Vec<Converted>> {
    require_file(req.checkpoint, "checkpoint")?;
    require_dir(req.features, "feature store")?;
    let model = load_checkpoint(req.checkpoint)?;
    model.speaker_index(req.target)?;
    if let Some(s) = req.source {
        if !model.speakers().iter().any(|m| m == s) {
            log::warn!("source speaker {s} has no embedding in the checkpoint");
        }
    }
    let store = FeatureStore::open(req.features).map_err(|e| {
        CliError::User(format!(
            "cannot open feature store {}: {e}",
            req.features.display()
        ))
    })?;
    let allow_train = req.allow_train_blocks || run.config.convert.allow_train_blocks;

    let keys: Vec<String> = match req.keys {
        Some(path) => {
            let keys = read_key_list(path)?;
            let unknown: Vec<&str> = keys
                .iter()
                .filter(|k| !store.entries.contains_key(*k))
                .map(String::as_str)
                .collect();
            if !unknown.is_empty() {
                return Err(CliError::User(format!(
                    "no features for {}",
                    unknown.join(", ")
                )));
            }
            let trained: Vec<&str> = keys
                .iter()
                .filter(|k| !store.entries[*k].block.is_test())
                .map(String::as_str)
                .collect();
            if !allow_train && !trained.is_empty() {
                return Err(CliError::User(format!(
                    "{} utterance(s) outside B2 (pass --allow-train-blocks to convert them): {}",
                    trained.len(),
                    trained.join(", ")
                )));
            }
            keys
        }
        None => store
            .entries
            .iter()
            .filter(|(_, e)| allow_train || e.block.is_test())
            .filter(|(_, e)| req.source.is_none_or(|s| e.speaker_id == s))
            .map(|(k, _)| k.clone())
            .collect(),
    };
    if keys.is_empty() {
        return Err(CliError::user("no utterances selected for conversion"));
    }

    run.create_out()?;
    let dsp = &run.config.dsp;
    let mut out = Vec::with_capacity(keys.len());
    for key in keys {
        let x = store.read(&key)?;
        let y = model.convert(&x, req.target)?;
        let stem = format!("{key}_to_{}", req.target);
        let features = run.out.join(format!("{stem}.mcep"));
        write_mcep(&features, &y)?;
        let wav = if run.config.convert.write_wav {
            let mut ms = invert_mel_cepstrum(&y, dsp.n_mels)?;
            ms.sample_rate = dsp.sample_rate;
            ms.frame_shift = dsp.hop_size as f64 / dsp.sample_rate as f64;
            let w = griffin_lim(&ms, dsp, dsp.griffin_lim_iterations)?;
            let path = run.out.join(format!("{stem}.wav"));
            write_wav(&path, &w)?;
            Some(path)
        } else {
            None
        };
        log::info!("converted {key}");
        out.push(Converted { key, features, wav });
    }
    Ok(out)
}
