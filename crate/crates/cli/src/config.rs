use std::path::Path;

use pathovc::corpus::{BandBoundaries, PairingOptions, Percent};
use pathovc::dsp::DspConfig;
use pathovc::stats::Condition;
use pathovc::vqvae::{ModelConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    /// Lower edges of the low, mid and high bands.
    pub band_cuts: [Percent; 3],
    pub allow_female: bool,
    pub allow_cross_sex: bool,
    /// Largest score difference a pair may have.
    pub max_delta: Percent,
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self {
            band_cuts: BandBoundaries::default().cuts,
            allow_female: false,
            allow_cross_sex: false,
            max_delta: Percent::MAX,
        }
    }
}

impl CorpusSection {
    pub fn bands(&self) -> Result<BandBoundaries> {
        Ok(BandBoundaries::new(self.band_cuts)?)
    }

    pub fn pairing(&self) -> PairingOptions {
        PairingOptions {
            allow_female: self.allow_female,
            allow_cross_sex: self.allow_cross_sex,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvertSection {
    /// Allow converting B1/B3 utterances, which the model was trained on.
    pub allow_train_blocks: bool,
    pub write_wav: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsSection {
    /// Condition pairs compared by the signed-rank test.
    pub wilcoxon_pairs: Vec<[String; 2]>,
}

impl Default for StatsSection {
    fn default() -> Self {
        let p = |a: Condition, b: Condition| [a.to_string(), b.to_string()];
        Self {
            wilcoxon_pairs: vec![
                p(Condition::GtHigh, Condition::VcHigh),
                p(Condition::GtMid, Condition::VcMid),
                p(Condition::GtLow, Condition::VcLow),
            ],
        }
    }
}

impl StatsSection {
    pub fn pairs(&self) -> Result<Vec<(Condition, Condition)>> {
        self.wilcoxon_pairs
            .iter()
            .map(|[a, b]| {
                Ok((
                    a.parse().map_err(CliError::User)?,
                    b.parse().map_err(CliError::User)?,
                ))
            })
            .collect()
    }
}

/// Everything a run depends on. `seed` may also come from `--seed`; it is
/// required by `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub dsp: DspConfig,
    pub corpus: CorpusSection,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub convert: ConvertSection,
    pub stats: StatsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            dsp: DspConfig::default(),
            corpus: CorpusSection::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            convert: ConvertSection {
                allow_train_blocks: false,
                write_wav: true,
            },
            stats: StatsSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::User(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::User(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        let body = toml::to_string_pretty(self).map_err(|e| CliError::Internal(e.to_string()))?;
        Ok(match self.seed {
            Some(_) => body,
            None => format!("# seed = 0  (required by train; or pass --seed)\n{body}"),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.dsp.validate()?;
        self.model.validate()?;
        self.corpus.bands()?;
        self.stats.pairs()?;
        if self.model.n_coeffs != self.dsp.n_cepstra() {
            return Err(CliError::User(format!(
                "model.n_coeffs = {} but dsp.cepstral_order {} gives {} coefficients",
                self.model.n_coeffs,
                self.dsp.cepstral_order,
                self.dsp.n_cepstra()
            )));
        }
        Ok(())
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| {
            CliError::user("train needs a seed: set `seed` in the config or pass --seed")
        })
    }
}
