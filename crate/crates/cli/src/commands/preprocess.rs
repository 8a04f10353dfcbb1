use std::fmt::Write as _;
use std::path::Path;

use pathovc::corpus::{build_feature_store, CorpusManifest, FeatureStoreReport, ManifestOptions};

use super::{require_file, Run};
use crate::{CliError, Result};

/// Extracts features for every utterance in `manifest` into the output
/// directory. Missing audio is reported before any extraction starts;
/// files that fail to decode are listed after the run and make it fail.
pub fn cmd_preprocess(run: &Run, manifest: &Path) -> Result<FeatureStoreReport> {
    require_file(manifest, "manifest")?;
    let opts = ManifestOptions {
        bands: run.config.corpus.bands()?,
        check_audio: false,
    };
    let text = std::fs::read(manifest)?;
    let base = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
    let m = CorpusManifest::from_reader(&text[..], base, &opts)?;

    let missing: Vec<String> = m
        .utterances
        .iter()
        .map(|u| m.resolve(u))
        .filter(|p| !p.is_file())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::User(format!(
            "{} audio file(s) not found:\n  {}",
            missing.len(),
            missing.join("\n  ")
        )));
    }

    run.create_out()?;
    let report = build_feature_store(&m, &run.config.dsp, &run.out)?;
    if !report.errors.is_empty() {
        let mut msg = format!(
            "{} of {} file(s) failed:",
            report.errors.len(),
            m.utterances.len()
        );
        for e in &report.errors {
            let _ = write!(msg, "\n  {}: {}", e.path.display(), e.message);
        }
        return Err(CliError::User(msg));
    }
    Ok(report)
}
