use std::path::{Path, PathBuf};

use super::{MosSummary, PairedComparison, Result, SimilarityRow};

pub const MOS_HEADER: [&str; 5] = ["condition", "n", "mean", "ci_low", "ci_high"];
pub const WILCOXON_HEADER: [&str; 9] = [
    "condition_a",
    "condition_b",
    "n_listeners",
    "n",
    "w_plus",
    "w_minus",
    "w",
    "p",
    "method",
];
pub const SIMILARITY_HEADER: [&str; 10] = [
    "pair",
    "direction",
    "kind",
    "expectation",
    "n",
    "matching",
    "matching_sure",
    "percent_matching",
    "percent_matching_sure",
    "counts",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StatsTables {
    pub mos: Vec<MosSummary>,
    pub wilcoxon: Vec<PairedComparison>,
    pub similarity: Vec<SimilarityRow>,
}

fn write_table(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let mut wr = csv::Writer::from_path(path)?;
    wr.write_record(header)?;
    for r in rows {
        wr.write_record(r)?;
    }
    wr.flush()?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_mos_csv(path: impl AsRef<Path>, rows: &[MosSummary]) -> Result<()> {
    let rows = rows
        .iter()
        .map(|s| {
            vec![
                s.condition.to_string(),
                s.n.to_string(),
                s.mean.to_string(),
                opt(s.ci95.map(|c| c.0)),
                opt(s.ci95.map(|c| c.1)),
            ]
        })
        .collect();
    write_table(path.as_ref(), &MOS_HEADER, rows)
}

/// `method` is `exact`, `normal` or `no_test` when every paired difference
/// is zero.
pub fn write_wilcoxon_csv(path: impl AsRef<Path>, rows: &[PairedComparison]) -> Result<()> {
    let rows = rows
        .iter()
        .map(|c| {
            let mut row = vec![
                c.a.to_string(),
                c.b.to_string(),
                c.listeners.len().to_string(),
            ];
            match &c.test {
                Some(r) => row.extend([
                    r.n.to_string(),
                    r.w_plus.to_string(),
                    r.w_minus.to_string(),
                    r.w.to_string(),
                    r.p_two_sided.to_string(),
                    format!("{:?}", r.method).to_lowercase(),
                ]),
                None => row.extend(["0", "", "", "", "", "no_test"].map(String::from)),
            }
            row
        })
        .collect();
    write_table(path.as_ref(), &WILCOXON_HEADER, rows)
}

/// Percentages are written as reported, truncated to two decimals.
pub fn write_similarity_csv(path: impl AsRef<Path>, rows: &[SimilarityRow]) -> Result<()> {
    let rows = rows
        .iter()
        .map(|s| {
            let a = &s.agreement;
            vec![
                s.group.pair(),
                s.group.direction(),
                s.group.kind.to_string(),
                format!("{:?}", a.expectation).to_lowercase(),
                a.n.to_string(),
                a.matching.to_string(),
                a.matching_sure.to_string(),
                format!("{:.2}", a.reported_matching()),
                format!("{:.2}", a.reported_matching_sure()),
                a.counts.map(|c| c.to_string()).join(" "),
            ]
        })
        .collect();
    write_table(path.as_ref(), &SIMILARITY_HEADER, rows)
}

/// Writes `mos.csv`, `wilcoxon.csv` and `similarity.csv` into `out_dir`
/// and returns their paths. Empty tables produce header-only files.
pub fn export_tables(t: &StatsTables, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let paths = ["mos.csv", "wilcoxon.csv", "similarity.csv"].map(|f| dir.join(f));
    write_mos_csv(&paths[0], &t.mos)?;
    write_wilcoxon_csv(&paths[1], &t.wilcoxon)?;
    write_similarity_csv(&paths[2], &t.similarity)?;
    Ok(paths.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{
        mos_summary, similarity_grid, AbGroup, AbTrial, Condition, Judgment, MosRating, PairKind,
        RatingSet,
    };

    #[test]
    fn empty_tables_are_headers_only() {
        let dir = tempfile::tempdir().unwrap();
        let paths = export_tables(&StatsTables::default(), dir.path()).unwrap();
        assert_eq!(
            std::fs::read_to_string(&paths[0]).unwrap(),
            "condition,n,mean,ci_low,ci_high\n"
        );
        for p in &paths {
            assert_eq!(std::fs::read_to_string(p).unwrap().lines().count(), 1);
        }
    }

    #[test]
    fn twelve_panels() {
        let mut rs = RatingSet::default();
        for (a, b) in [("M04", "M12"), ("M05", "M11"), ("M08", "M10")] {
            for (s, t) in [(a, b), (b, a)] {
                for kind in [PairKind::VcVsSource, PairKind::VcVsTarget] {
                    let g = AbGroup {
                        source: s.into(),
                        target: t.into(),
                        kind,
                    };
                    for l in 0..3 {
                        rs.ab.push((
                            g.clone(),
                            AbTrial {
                                listener_id: format!("L{l}"),
                                pair_kind: kind,
                                judgment: Judgment::SameNotSure,
                            },
                        ));
                    }
                }
            }
        }
        rs.mos
            .push(MosRating::new("L0", Condition::GtHigh, 4).unwrap());
        let tables = StatsTables {
            mos: mos_summary(&rs.mos),
            wilcoxon: vec![],
            similarity: similarity_grid(&rs).unwrap(),
        };
        let dir = tempfile::tempdir().unwrap();
        let paths = export_tables(&tables, dir.path()).unwrap();
        let grid = std::fs::read_to_string(&paths[2]).unwrap();
        assert_eq!(grid.lines().count(), 13);
        assert!(grid
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("M04-M12,M04>M12,VC_vs_S,different,3,0,0,0.00,0.00"));
        let mos = std::fs::read_to_string(&paths[0]).unwrap();
        assert_eq!(mos.lines().nth(1).unwrap(), "gt_high,1,4,,");
    }
}
