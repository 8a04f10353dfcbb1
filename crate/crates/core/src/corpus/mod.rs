//! Corpus manifest, block-wise partitioning, speaker pairing and the feature
//! store.

mod features;
mod manifest;
mod pairing;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::DspError;

pub use features::{
    build_feature_store, extract_features, FeatureEntry, FeatureStore, FeatureStoreReport,
    FileError, SkippedClip, ERROR_LOG, INDEX_FILE, SKIP_LOG,
};
pub use manifest::{
    parse_manifest, parse_manifest_with, CorpusManifest, ManifestOptions, SpeakerRecord,
    UtteranceRecord, MANIFEST_HEADER,
};
pub use pairing::{pair_speakers, Pairing, PairingOptions, SpeakerPair};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CorpusError>;

/// A percentage held in hundredths, so that differences of scores are exact.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(try_from = "String", into = "String")]
pub struct Percent(u32);

impl TryFrom<String> for Percent {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

impl From<Percent> for String {
    fn from(p: Percent) -> String {
        p.to_string()
    }
}

impl Percent {
    pub const MAX: Percent = Percent(10_000);

    pub fn from_hundredths(h: u32) -> Self {
        Self(h)
    }

    pub fn hundredths(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }

    pub fn abs_diff(self, other: Percent) -> Percent {
        Percent(self.0.abs_diff(other.0))
    }
}

impl FromStr for Percent {
    type Err = String;

    /// Decimal with at most two fractional digits, optionally followed by `%`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let t = s.trim().trim_end_matches('%');
        let (int, frac) = t.split_once('.').unwrap_or((t, "0"));
        let digits = |x: &str| !x.is_empty() && x.bytes().all(|b| b.is_ascii_digit());
        if !digits(int) || !digits(frac) || frac.len() > 2 {
            return Err(format!(
                "{s:?} is not a percentage with at most two decimals"
            ));
        }
        let int: u32 = int.parse().map_err(|_| format!("{s:?} is out of range"))?;
        let frac: u32 = format!("{frac:0<2}").parse().unwrap_or(0);
        let h = int
            .checked_mul(100)
            .and_then(|v| v.checked_add(frac))
            .ok_or_else(|| format!("{s:?} is out of range"))?;
        Ok(Percent(h))
    }
}

impl fmt::Display for Percent {
    /// Always one decimal at least: `5.4`, `4.0`, `62.25`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (i, r) = (self.0 / 100, self.0 % 100);
        if r % 10 == 0 {
            write!(f, "{i}.{}", r / 10)
        } else {
            write!(f, "{i}.{r:02}")
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sex {
    Male,
    Female,
}

impl FromStr for Sex {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "m" | "male" => Ok(Sex::Male),
            "f" | "female" => Ok(Sex::Female),
            _ => Err(format!("unknown sex {s:?}, expected M or F")),
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sex::Male => "M",
            Sex::Female => "F",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    VeryLow,
    Low,
    Mid,
    High,
}

impl Band {
    pub const ALL: [Band; 4] = [Band::VeryLow, Band::Low, Band::Mid, Band::High];

    pub fn as_str(self) -> &'static str {
        match self {
            Band::VeryLow => "very_low",
            Band::Low => "low",
            Band::Mid => "mid",
            Band::High => "high",
        }
    }
}

impl FromStr for Band {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Band::ALL
            .into_iter()
            .find(|b| b.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| format!("unknown band {s:?}, expected very_low, low, mid or high"))
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Cut points between the four bands. A score equal to a cut point belongs
/// to the band above it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandBoundaries {
    pub cuts: [Percent; 3],
}

impl Default for BandBoundaries {
    fn default() -> Self {
        Self {
            cuts: [Percent(2500), Percent(5000), Percent(7500)],
        }
    }
}

impl BandBoundaries {
    pub fn new(cuts: [Percent; 3]) -> Result<Self> {
        if !(cuts[0] < cuts[1] && cuts[1] < cuts[2] && cuts[2] <= Percent::MAX) {
            return Err(CorpusError::Invalid(format!(
                "band cut points {cuts:?} must increase within [0, 100]"
            )));
        }
        Ok(Self { cuts })
    }

    pub fn band_of(&self, score: Percent) -> Band {
        match self.cuts.iter().filter(|&&c| score >= c).count() {
            0 => Band::VeryLow,
            1 => Band::Low,
            2 => Band::Mid,
            _ => Band::High,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Block {
    B1,
    B2,
    B3,
}

impl Block {
    pub fn as_str(self) -> &'static str {
        match self {
            Block::B1 => "B1",
            Block::B2 => "B2",
            Block::B3 => "B3",
        }
    }

    pub fn is_test(self) -> bool {
        self == Block::B2
    }
}

impl FromStr for Block {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_uppercase().as_str() {
            "B1" | "1" => Ok(Block::B1),
            "B2" | "2" => Ok(Block::B2),
            "B3" | "3" => Ok(Block::B3),
            _ => Err(format!("unknown block {s:?}, expected B1, B2 or B3")),
        }
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Training blocks B1 and B3 against test block B2.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub train: Vec<UtteranceRecord>,
    pub test: Vec<UtteranceRecord>,
}

pub fn partition_blocks(m: &CorpusManifest) -> Partition {
    let (test, train): (Vec<_>, Vec<_>) = m
        .utterances
        .iter()
        .cloned()
        .partition(|u| u.block.is_test());
    if train.is_empty() {
        log::warn!("partition has no training utterances ({} test)", test.len());
    }
    let p = Partition { train, test };
    debug_assert!(p.check(m).is_ok());
    p
}

impl Partition {
    /// Verifies that the two sides are disjoint, together cover `m`, and
    /// that no B2 utterance sits on the training side.
    pub fn check(&self, m: &CorpusManifest) -> Result<()> {
        let mut keys = std::collections::BTreeSet::new();
        for u in &self.train {
            if u.block.is_test() {
                return Err(CorpusError::Invalid(format!(
                    "test-block utterance {} in training set",
                    u.key()
                )));
            }
            keys.insert(u.key());
        }
        for u in &self.test {
            if !u.block.is_test() {
                return Err(CorpusError::Invalid(format!(
                    "training-block utterance {} in test set",
                    u.key()
                )));
            }
            if !keys.insert(u.key()) {
                return Err(CorpusError::Invalid(format!(
                    "utterance {} on both sides",
                    u.key()
                )));
            }
        }
        if keys.len() != m.utterances.len() || m.utterances.iter().any(|u| !keys.contains(&u.key()))
        {
            return Err(CorpusError::Invalid(
                "partition does not cover the manifest".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percent_parsing_is_exact() {
        assert_eq!("7.4".parse::<Percent>().unwrap().hundredths(), 740);
        assert_eq!("93".parse::<Percent>().unwrap().hundredths(), 9300);
        assert_eq!("62.25%".parse::<Percent>().unwrap().hundredths(), 6225);
        for bad in ["", "-1", "1.234", "abc", "1.", ".5"] {
            assert!(bad.parse::<Percent>().is_err(), "{bad}");
        }
        let d = Percent(740).abs_diff(Percent(200));
        assert_eq!(d.to_string(), "5.4");
        assert_eq!(Percent(400).to_string(), "4.0");
        assert_eq!(Percent(0).to_string(), "0.0");
        assert_eq!(Percent(6225).to_string(), "62.25");
    }

    #[test]
    fn default_bands() {
        let b = BandBoundaries::default();
        let band = |s: &str| b.band_of(s.parse().unwrap());
        assert_eq!(band("2"), Band::VeryLow);
        assert_eq!(band("24.99"), Band::VeryLow);
        assert_eq!(band("25"), Band::Low);
        assert_eq!(band("58"), Band::Mid);
        assert_eq!(band("93"), Band::High);
        assert!(BandBoundaries::new([Percent(50), Percent(40), Percent(90)]).is_err());
    }

    #[test]
    fn enum_round_trips() {
        for b in Band::ALL {
            assert_eq!(b.as_str().parse::<Band>().unwrap(), b);
        }
        for b in [Block::B1, Block::B2, Block::B3] {
            assert_eq!(b.to_string().parse::<Block>().unwrap(), b);
        }
        assert_eq!("female".parse::<Sex>().unwrap(), Sex::Female);
    }
}
