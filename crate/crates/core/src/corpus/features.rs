use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dsp::{
    mel_cepstrum, mel_spectrogram, read_mcep, read_wav, reduce_noise, resample, trim_silence,
    write_mcep, DspConfig, DspError, MelCepstrogram,
};

use super::{Block, CorpusError, CorpusManifest, Result, UtteranceRecord};

pub const INDEX_FILE: &str = "index.json";
pub const SKIP_LOG: &str = "skipped.txt";
pub const ERROR_LOG: &str = "errors.txt";
const FEATURE_DIR: &str = "features";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureEntry {
    /// Relative to the store directory.
    pub feature_path: PathBuf,
    pub frames: usize,
    pub speaker_id: String,
    pub word_id: String,
    pub block: Block,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedClip {
    pub key: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileError {
    pub key: String,
    pub path: PathBuf,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStoreReport {
    pub store: FeatureStore,
    pub skipped: Vec<SkippedClip>,
    pub errors: Vec<FileError>,
}

/// A directory of MCEP1 files plus a JSON index keyed by utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStore {
    pub root: PathBuf,
    pub entries: BTreeMap<String, FeatureEntry>,
}

impl FeatureStore {
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let text = std::fs::read_to_string(root.join(INDEX_FILE))?;
        let entries = serde_json::from_str(&text)?;
        Ok(Self { root, entries })
    }

    pub fn read(&self, key: &str) -> Result<MelCepstrogram> {
        let e = self
            .entries
            .get(key)
            .ok_or_else(|| CorpusError::Invalid(format!("no features for {key}")))?;
        let mc = read_mcep(self.root.join(&e.feature_path))?;
        if mc.n_frames != e.frames {
            return Err(CorpusError::Invalid(format!(
                "{key}: index says {} frames, file has {}",
                e.frames, mc.n_frames
            )));
        }
        Ok(mc)
    }

    pub fn write_index(&self) -> Result<()> {
        let mut text = serde_json::to_string_pretty(&self.entries)?;
        text.push('\n');
        std::fs::write(self.root.join(INDEX_FILE), text)?;
        Ok(())
    }
}

enum Outcome {
    Stored(String, FeatureEntry),
    Skipped(SkippedClip),
    Failed(FileError),
}

/// The full front end on one clip: denoise, trim, resample, normalise, mel
/// analysis and cepstrum.
pub fn extract_features(
    path: &Path,
    cfg: &DspConfig,
) -> std::result::Result<MelCepstrogram, DspError> {
    let raw = read_wav(path)?;
    let clean = reduce_noise(&raw, cfg);
    let trimmed = trim_silence(&clean, cfg.trim_threshold_db, cfg.trim_frame_ms)?;
    let wave = resample(&trimmed, cfg.sample_rate)?.normalize();
    let mel = mel_spectrogram(&wave, cfg)?;
    mel_cepstrum(&mel, cfg.cepstral_order)
}

fn process(m: &CorpusManifest, u: &UtteranceRecord, cfg: &DspConfig, root: &Path) -> Outcome {
    let key = u.key();
    let path = m.resolve(u);
    let fail = |message: String| {
        Outcome::Failed(FileError {
            key: key.clone(),
            path: path.clone(),
            message,
        })
    };
    let mc = match extract_features(&path, cfg) {
        Ok(mc) => mc,
        Err(DspError::AllSilent) => {
            return Outcome::Skipped(SkippedClip {
                key,
                reason: "all frames below trim threshold".into(),
            })
        }
        Err(e @ DspError::TooShort { .. }) => {
            return Outcome::Skipped(SkippedClip {
                key,
                reason: e.to_string(),
            })
        }
        Err(e) => return fail(e.to_string()),
    };
    let rel = PathBuf::from(FEATURE_DIR).join(format!("{key}.mcep"));
    if let Err(e) = write_mcep(root.join(&rel), &mc) {
        return fail(e.to_string());
    }
    let entry = FeatureEntry {
        feature_path: rel,
        frames: mc.n_frames,
        speaker_id: u.speaker_id.clone(),
        word_id: u.word_id.clone(),
        block: u.block,
    };
    Outcome::Stored(key, entry)
}

/// Extracts features for every utterance of `m` into `out_dir`, then writes
/// the index, the skip log and the error log. Unreadable clips are recorded
/// and the run continues.
pub fn build_feature_store(
    m: &CorpusManifest,
    cfg: &DspConfig,
    out_dir: impl AsRef<Path>,
) -> Result<FeatureStoreReport> {
    cfg.validate()?;
    let root = out_dir.as_ref().to_path_buf();
    std::fs::create_dir_all(root.join(FEATURE_DIR))?;

    #[cfg(feature = "parallel")]
    let outcomes: Vec<Outcome> = {
        use rayon::prelude::*;
        m.utterances
            .par_iter()
            .map(|u| process(m, u, cfg, &root))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<Outcome> = m
        .utterances
        .iter()
        .map(|u| process(m, u, cfg, &root))
        .collect();

    let mut entries = BTreeMap::new();
    let (mut skipped, mut errors) = (Vec::new(), Vec::new());
    for o in outcomes {
        match o {
            Outcome::Stored(k, e) => {
                entries.insert(k, e);
            }
            Outcome::Skipped(s) => {
                log::info!("skipping {}: {}", s.key, s.reason);
                skipped.push(s);
            }
            Outcome::Failed(e) => {
                log::warn!("{}: {}", e.path.display(), e.message);
                errors.push(e);
            }
        }
    }
    let store = FeatureStore {
        root: root.clone(),
        entries,
    };
    store.write_index()?;
    let mut log = std::io::BufWriter::new(std::fs::File::create(root.join(SKIP_LOG))?);
    for s in &skipped {
        writeln!(log, "{}\t{}", s.key, s.reason)?;
    }
    log.flush()?;
    let mut log = std::io::BufWriter::new(std::fs::File::create(root.join(ERROR_LOG))?);
    for e in &errors {
        writeln!(log, "{}\t{}\t{}", e.key, e.path.display(), e.message)?;
    }
    log.flush()?;
    Ok(FeatureStoreReport {
        store,
        skipped,
        errors,
    })
}
