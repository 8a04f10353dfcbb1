use std::path::Path;

use pathovc::corpus::{pair_speakers, CorpusManifest, ManifestOptions, Pairing};

use super::{require_file, Run};
use crate::Result;

pub const PAIRS_FILE: &str = "pairs.csv";

/// Greedy severity-matched pairing; writes `pairs.csv` with columns
/// `speaker_a,speaker_b,delta`.
pub fn cmd_pair(run: &Run, manifest: &Path) -> Result<Pairing> {
    require_file(manifest, "manifest")?;
    let c = &run.config.corpus;
    let opts = ManifestOptions {
        bands: c.bands()?,
        check_audio: false,
    };
    let text = std::fs::read(manifest)?;
    let m = CorpusManifest::from_reader(
        &text[..],
        manifest.parent().map(Path::to_path_buf).unwrap_or_default(),
        &opts,
    )?;
    let pairing = pair_speakers(&m, c.max_delta, &c.pairing());
    run.create_out()?;
    let mut w = csv::Writer::from_path(run.out.join(PAIRS_FILE))?;
    w.write_record(["speaker_a", "speaker_b", "delta"])?;
    for p in &pairing.pairs {
        w.write_record([p.a.as_str(), p.b.as_str(), &p.delta.to_string()])?;
    }
    w.flush()?;
    Ok(pairing)
}
