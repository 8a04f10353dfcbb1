use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use pathovc::stats::{
    mos_summary, similarity_grid, wilcoxon_by_listener, write_mos_csv, write_similarity_csv,
    write_wilcoxon_csv, RatingSet,
};

use super::{require_file, Run};
use crate::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatsMode {
    Mos,
    Wilcoxon,
    Ab,
}

impl FromStr for StatsMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mos" => Ok(StatsMode::Mos),
            "wilcoxon" => Ok(StatsMode::Wilcoxon),
            "ab" => Ok(StatsMode::Ab),
            _ => Err(format!(
                "unknown stats mode {s:?}, expected mos, wilcoxon or ab"
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StatsOutput {
    /// Human-readable table for standard output.
    pub summary: String,
    pub csv: PathBuf,
}

pub fn cmd_stats(run: &Run, ratings: &Path, mode: StatsMode) -> Result<StatsOutput> {
    require_file(ratings, "ratings file")?;
    let rs = RatingSet::from_reader(std::fs::File::open(ratings)?)?;
    run.create_out()?;
    let mut s = String::new();
    let csv = match mode {
        StatsMode::Mos => {
            if rs.mos.is_empty() {
                return Err(CliError::user("no mos rows in the ratings file"));
            }
            let rows = mos_summary(&rs.mos);
            let _ = writeln!(
                s,
                "{:<16} {:>4} {:>7} {:>7} {:>7}",
                "condition", "n", "mean", "ci_low", "ci_high"
            );
            for r in &rows {
                let (lo, hi) = r.ci95.map_or(("-".into(), "-".into()), |(l, h)| {
                    (format!("{l:.3}"), format!("{h:.3}"))
                });
                let _ = writeln!(
                    s,
                    "{:<16} {:>4} {:>7.3} {lo:>7} {hi:>7}",
                    r.condition, r.n, r.mean
                );
            }
            let p = run.out.join("mos.csv");
            write_mos_csv(&p, &rows)?;
            p
        }
        StatsMode::Wilcoxon => {
            let rows = wilcoxon_by_listener(&rs, &run.config.stats.pairs()?)?;
            for c in &rows {
                match &c.test {
                    Some(t) => {
                        let _ = writeln!(
                            s,
                            "{} vs {}: n = {}, W = {}, p = {:.4} ({:?})",
                            c.a, c.b, t.n, t.w, t.p_two_sided, t.method
                        );
                    }
                    None => {
                        let _ = writeln!(
                            s,
                            "{} vs {}: no test, all {} paired differences are zero",
                            c.a,
                            c.b,
                            c.listeners.len()
                        );
                    }
                }
            }
            let p = run.out.join("wilcoxon.csv");
            write_wilcoxon_csv(&p, &rows)?;
            p
        }
        StatsMode::Ab => {
            if rs.ab.is_empty() {
                return Err(CliError::user("no ab rows in the ratings file"));
            }
            let rows = similarity_grid(&rs)?;
            for r in &rows {
                let a = &r.agreement;
                let _ = writeln!(
                    s,
                    "{} {:<8} {:>3}/{:<3} {:>6.2}% matching, {:>6.2}% sure",
                    r.group.direction(),
                    r.group.kind,
                    a.matching,
                    a.n,
                    a.reported_matching(),
                    a.reported_matching_sure()
                );
            }
            let p = run.out.join("similarity.csv");
            write_similarity_csv(&p, &rows)?;
            p
        }
    };
    Ok(StatsOutput { summary: s, csv })
}
