//! Listening-test arithmetic: MOS intervals, the signed-rank test and AB
//! speaker-similarity agreement, plus the ratings CSV and table export.

mod ab;
mod export;
mod mos;
mod ratings;
mod wilcoxon;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use ab::{ab_agreement, report_percent, AbAgreement, AbTrial, Expectation, Judgment, PairKind};
pub use export::{
    export_tables, write_mos_csv, write_similarity_csv, write_wilcoxon_csv, StatsTables,
    MOS_HEADER, SIMILARITY_HEADER, WILCOXON_HEADER,
};
pub use mos::{mos_summary, summarize, t_quantile_975, MosSummary};
pub use ratings::{
    paired_by_listener, similarity_grid, wilcoxon_by_listener, AbGroup, PairedComparison,
    RatingSet, SimilarityRow, RATINGS_HEADER,
};
pub use wilcoxon::{
    midranks, wilcoxon_signed_rank, wilcoxon_signed_rank_with, PMethod, WilcoxonResult, EXACT_MAX_N,
};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("{0}")]
    Invalid(String),
    /// Every paired difference is zero.
    #[error("all paired differences are zero; no test possible")]
    NoTest,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, StatsError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Condition {
    HealthyNatural,
    GtHigh,
    GtMid,
    GtLow,
    VcHigh,
    VcMid,
    VcLow,
}

impl Condition {
    pub const ALL: [Condition; 7] = [
        Condition::HealthyNatural,
        Condition::GtHigh,
        Condition::GtMid,
        Condition::GtLow,
        Condition::VcHigh,
        Condition::VcMid,
        Condition::VcLow,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::HealthyNatural => "healthy_natural",
            Condition::GtHigh => "gt_high",
            Condition::GtMid => "gt_mid",
            Condition::GtLow => "gt_low",
            Condition::VcHigh => "vc_high",
            Condition::VcMid => "vc_mid",
            Condition::VcLow => "vc_low",
        }
    }
}

impl FromStr for Condition {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Condition::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim())
            .ok_or_else(|| format!("unknown condition {s:?}"))
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MosRating {
    pub listener_id: String,
    pub condition: Condition,
    pub score: u8,
}

impl MosRating {
    pub fn new(listener_id: impl Into<String>, condition: Condition, score: u8) -> Result<Self> {
        if !(1..=5).contains(&score) {
            return Err(StatsError::Invalid(format!(
                "MOS score {score} outside 1..=5"
            )));
        }
        Ok(Self {
            listener_id: listener_id.into(),
            condition,
            score,
        })
    }
}
