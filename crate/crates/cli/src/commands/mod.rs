mod convert;
mod pair;
mod preprocess;
mod stats;
mod train;

use std::path::{Path, PathBuf};

pub use convert::{cmd_convert, ConvertRequest, Converted};
pub use pair::cmd_pair;
pub use preprocess::cmd_preprocess;
pub use stats::{cmd_stats, StatsMode, StatsOutput};
pub use train::{cmd_train, read_key_list, TrainOutput, CHECKPOINT_FILE, REPORT_FILE};

use crate::{CliError, Result, RunConfig};

/// Validated configuration plus the output directory.
#[derive(Debug, Clone)]
pub struct Run {
    pub config: RunConfig,
    pub out: PathBuf,
}

impl Run {
    pub fn new(config: RunConfig, out: impl Into<PathBuf>) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            out: out.into(),
        })
    }

    fn create_out(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out).map_err(|e| {
            CliError::User(format!(
                "cannot create output directory {}: {e}",
                self.out.display()
            ))
        })
    }
}

fn require_file(p: &Path, what: &str) -> Result<()> {
    if p.is_file() {
        Ok(())
    } else {
        Err(CliError::User(format!("{what} {} not found", p.display())))
    }
}

fn require_dir(p: &Path, what: &str) -> Result<()> {
    if p.is_dir() {
        Ok(())
    } else {
        Err(CliError::User(format!(
            "{what} {} is not a directory",
            p.display()
        )))
    }
}
