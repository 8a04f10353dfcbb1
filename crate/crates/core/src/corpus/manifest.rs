use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::{Band, BandBoundaries, Block, CorpusError, Percent, Result, Sex};

pub const MANIFEST_HEADER: [&str; 7] = [
    "speaker_id",
    "sex",
    "intelligibility_score",
    "band",
    "word_id",
    "block",
    "audio_path",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpeakerRecord {
    pub speaker_id: String,
    pub sex: Sex,
    pub intelligibility_score: Percent,
    pub band: Band,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtteranceRecord {
    pub speaker_id: String,
    pub word_id: String,
    pub block: Block,
    /// As written in the manifest; see [`CorpusManifest::resolve`].
    pub audio_path: PathBuf,
}

impl UtteranceRecord {
    /// `SPEAKER_BLOCK_WORD`, unique within a manifest.
    pub fn key(&self) -> String {
        format!("{}_{}_{}", self.speaker_id, self.block, self.word_id)
    }
}

#[derive(Debug, Clone)]
pub struct ManifestOptions {
    pub bands: BandBoundaries,
    /// Require every audio path to exist when the manifest is read.
    pub check_audio: bool,
}

impl Default for ManifestOptions {
    fn default() -> Self {
        Self {
            bands: BandBoundaries::default(),
            check_audio: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorpusManifest {
    /// Sorted by id.
    pub speakers: Vec<SpeakerRecord>,
    /// In file order.
    pub utterances: Vec<UtteranceRecord>,
    /// Directory relative audio paths are resolved against.
    pub base_dir: PathBuf,
}

pub fn parse_manifest(path: impl AsRef<Path>) -> Result<CorpusManifest> {
    parse_manifest_with(path, &ManifestOptions::default())
}

pub fn parse_manifest_with(
    path: impl AsRef<Path>,
    opts: &ManifestOptions,
) -> Result<CorpusManifest> {
    let path = path.as_ref();
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    CorpusManifest::from_reader(std::fs::File::open(path)?, base, opts)
}

fn parse_err(line: usize, message: impl Into<String>) -> CorpusError {
    CorpusError::Parse {
        line,
        message: message.into(),
    }
}

impl CorpusManifest {
    pub fn from_reader<R: Read>(r: R, base_dir: PathBuf, opts: &ManifestOptions) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_reader(r);
        let header = rdr
            .headers()
            .map_err(|e| parse_err(1, e.to_string()))?
            .clone();
        if header.iter().map(str::trim).ne(MANIFEST_HEADER) {
            return Err(parse_err(
                1,
                format!("header must be {}", MANIFEST_HEADER.join(",")),
            ));
        }
        let mut speakers: BTreeMap<String, (SpeakerRecord, usize)> = BTreeMap::new();
        let mut references: Vec<(String, usize)> = Vec::new();
        let mut utterances = Vec::new();
        let mut keys = BTreeSet::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                parse_err(line, e.to_string())
            })?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            let field = |i: usize| rec.get(i).unwrap_or("").trim();
            let id = field(0);
            if id.is_empty() {
                return Err(parse_err(line, "empty speaker_id"));
            }
            let (sex, score, band) = (field(1), field(2), field(3));
            if !(sex.is_empty() && score.is_empty() && band.is_empty()) {
                if sex.is_empty() || score.is_empty() {
                    return Err(parse_err(
                        line,
                        "speaker rows need both sex and intelligibility_score",
                    ));
                }
                let sex: Sex = sex.parse().map_err(|e: String| parse_err(line, e))?;
                let score: Percent = score.parse().map_err(|e: String| parse_err(line, e))?;
                if score > Percent::MAX {
                    return Err(parse_err(line, format!("score {score} exceeds 100")));
                }
                let expected = opts.bands.band_of(score);
                if !band.is_empty() {
                    let given: Band = band.parse().map_err(|e: String| parse_err(line, e))?;
                    if given != expected {
                        return Err(parse_err(
                            line,
                            format!(
                                "band {given} disagrees with score {score} (expected {expected})"
                            ),
                        ));
                    }
                }
                let rec = SpeakerRecord {
                    speaker_id: id.to_string(),
                    sex,
                    intelligibility_score: score,
                    band: expected,
                };
                match speakers.get(id) {
                    Some((prev, prev_line)) if *prev != rec => {
                        return Err(parse_err(
                            line,
                            format!("speaker {id} redefined differently from line {prev_line}"),
                        ));
                    }
                    Some(_) => {}
                    None => {
                        speakers.insert(id.to_string(), (rec, line));
                    }
                }
            }
            let (word, block, audio) = (field(4), field(5), field(6));
            if word.is_empty() && block.is_empty() && audio.is_empty() {
                if sex.is_empty() {
                    return Err(parse_err(
                        line,
                        format!("row for {id} has neither speaker details nor an utterance"),
                    ));
                }
                continue;
            }
            if word.is_empty() || block.is_empty() || audio.is_empty() {
                return Err(parse_err(
                    line,
                    "utterance rows need word_id, block and audio_path",
                ));
            }
            let block: Block = block.parse().map_err(|e: String| parse_err(line, e))?;
            let u = UtteranceRecord {
                speaker_id: id.to_string(),
                word_id: word.to_string(),
                block,
                audio_path: PathBuf::from(audio),
            };
            if !keys.insert(u.key()) {
                return Err(parse_err(line, format!("duplicate utterance {}", u.key())));
            }
            references.push((id.to_string(), line));
            utterances.push(u);
        }
        for (id, line) in &references {
            if !speakers.contains_key(id) {
                return Err(parse_err(
                    *line,
                    format!("utterance cites unknown speaker {id}"),
                ));
            }
        }
        let m = Self {
            speakers: speakers.into_values().map(|(s, _)| s).collect(),
            utterances,
            base_dir,
        };
        if opts.check_audio {
            for (u, (_, line)) in m.utterances.iter().zip(&references) {
                let p = m.resolve(u);
                if !p.is_file() {
                    return Err(parse_err(
                        *line,
                        format!("audio file {} not found", p.display()),
                    ));
                }
            }
        }
        Ok(m)
    }

    pub fn speaker(&self, id: &str) -> Option<&SpeakerRecord> {
        self.speakers.iter().find(|s| s.speaker_id == id)
    }

    pub fn resolve(&self, u: &UtteranceRecord) -> PathBuf {
        if u.audio_path.is_absolute() {
            u.audio_path.clone()
        } else {
            self.base_dir.join(&u.audio_path)
        }
    }

    /// Writes the manifest back out: one speaker row per speaker followed by
    /// reference-only utterance rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(MANIFEST_HEADER)?;
        for s in &self.speakers {
            let score = s.intelligibility_score.to_string();
            wr.write_record([
                s.speaker_id.as_str(),
                &s.sex.to_string(),
                &score,
                s.band.as_str(),
                "",
                "",
                "",
            ])?;
        }
        for u in &self.utterances {
            let path = u.audio_path.to_string_lossy();
            wr.write_record([
                u.speaker_id.as_str(),
                "",
                "",
                "",
                &u.word_id,
                u.block.as_str(),
                &path,
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}
