use super::{CorpusManifest, Percent, Sex, SpeakerRecord};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpeakerPair {
    pub a: String,
    pub b: String,
    pub delta: Percent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pairing {
    /// Ordered by the first speaker's id.
    pub pairs: Vec<SpeakerPair>,
    pub unmatched: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[derive(Default)]
pub struct PairingOptions {
    pub allow_female: bool,
    pub allow_cross_sex: bool,
}


impl PairingOptions {
    pub(crate) fn eligible(&self, x: &SpeakerRecord, y: &SpeakerRecord) -> bool {
        if x.band != y.band {
            return false;
        }
        if !self.allow_female && (x.sex == Sex::Female || y.sex == Sex::Female) {
            return false;
        }
        self.allow_cross_sex || x.sex == y.sex
    }
}

/// Candidate pairs within `max_delta`, in the greedy order: delta, then the
/// two ids.
pub(crate) fn candidates(
    speakers: &[SpeakerRecord],
    max_delta: Percent,
    opts: &PairingOptions,
) -> Vec<(Percent, usize, usize)> {
    let mut order: Vec<usize> = (0..speakers.len()).collect();
    order.sort_by(|&i, &j| speakers[i].speaker_id.cmp(&speakers[j].speaker_id));
    let mut out = Vec::new();
    for (x, &i) in order.iter().enumerate() {
        for &j in &order[x + 1..] {
            let (si, sj) = (&speakers[i], &speakers[j]);
            let delta = si.intelligibility_score.abs_diff(sj.intelligibility_score);
            if delta <= max_delta && opts.eligible(si, sj) {
                out.push((delta, i, j));
            }
        }
    }
    out.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then_with(|| speakers[a.1].speaker_id.cmp(&speakers[b.1].speaker_id))
            .then_with(|| speakers[a.2].speaker_id.cmp(&speakers[b.2].speaker_id))
    });
    out
}

/// Greedy minimum-difference matching inside each intelligibility band.
/// Repeatedly takes the closest remaining eligible pair.
pub fn pair_speakers(m: &CorpusManifest, max_delta: Percent, opts: &PairingOptions) -> Pairing {
    let speakers = &m.speakers;
    let mut used = vec![false; speakers.len()];
    let mut pairs = Vec::new();
    for (delta, i, j) in candidates(speakers, max_delta, opts) {
        if used[i] || used[j] {
            continue;
        }
        used[i] = true;
        used[j] = true;
        pairs.push(SpeakerPair {
            a: speakers[i].speaker_id.clone(),
            b: speakers[j].speaker_id.clone(),
            delta,
        });
    }
    pairs.sort_by(|p, q| p.a.cmp(&q.a));
    let mut unmatched: Vec<String> = speakers
        .iter()
        .zip(&used)
        .filter(|(_, &u)| !u)
        .map(|(s, _)| s.speaker_id.clone())
        .collect();
    unmatched.sort();
    Pairing { pairs, unmatched }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::BandBoundaries;
    use proptest::prelude::*;

    fn spk(id: &str, sex: Sex, score: u32) -> SpeakerRecord {
        let score = Percent::from_hundredths(score);
        SpeakerRecord {
            speaker_id: id.into(),
            sex,
            intelligibility_score: score,
            band: BandBoundaries::default().band_of(score),
        }
    }

    fn manifest(speakers: Vec<SpeakerRecord>) -> CorpusManifest {
        let mut speakers = speakers;
        speakers.sort_by(|a, b| a.speaker_id.cmp(&b.speaker_id));
        CorpusManifest {
            speakers,
            ..Default::default()
        }
    }

    fn table_one() -> CorpusManifest {
        manifest(vec![
            spk("M04", Sex::Male, 200),
            spk("M12", Sex::Male, 740),
            spk("M05", Sex::Male, 5800),
            spk("M11", Sex::Male, 6200),
            spk("M08", Sex::Male, 9300),
            spk("M10", Sex::Male, 9300),
        ])
    }

    #[test]
    fn reproduces_table_one() {
        let p = pair_speakers(&table_one(), Percent::MAX, &PairingOptions::default());
        let got: Vec<(&str, &str, String)> = p
            .pairs
            .iter()
            .map(|p| (p.a.as_str(), p.b.as_str(), p.delta.to_string()))
            .collect();
        assert_eq!(
            got,
            vec![
                ("M04", "M12", "5.4".into()),
                ("M05", "M11", "4.0".into()),
                ("M08", "M10", "0.0".into())
            ]
        );
        assert!(p.unmatched.is_empty());
    }

    #[test]
    fn single_speaker_unmatched() {
        let p = pair_speakers(
            &manifest(vec![spk("M04", Sex::Male, 200)]),
            Percent::MAX,
            &PairingOptions::default(),
        );
        assert!(p.pairs.is_empty());
        assert_eq!(p.unmatched, vec!["M04"]);
    }

    #[test]
    fn female_and_cross_sex_gated() {
        let m = manifest(vec![
            spk("F02", Sex::Female, 2900),
            spk("M07", Sex::Male, 2800),
            spk("F03", Sex::Female, 3000),
        ]);
        assert!(pair_speakers(&m, Percent::MAX, &PairingOptions::default())
            .pairs
            .is_empty());
        let f = pair_speakers(
            &m,
            Percent::MAX,
            &PairingOptions {
                allow_female: true,
                allow_cross_sex: false,
            },
        );
        assert_eq!(
            (f.pairs[0].a.as_str(), f.pairs[0].b.as_str()),
            ("F02", "F03")
        );
        let x = pair_speakers(
            &m,
            Percent::MAX,
            &PairingOptions {
                allow_female: true,
                allow_cross_sex: true,
            },
        );
        // F02-M07 and F02-F03 tie at 1.0; id order picks F02-F03
        assert_eq!(x.pairs.len(), 1);
        assert_eq!(x.pairs[0].b, "F03");
        assert_eq!(x.unmatched, vec!["M07"]);
    }

    #[test]
    fn max_delta_filters() {
        let p = pair_speakers(
            &table_one(),
            Percent::from_hundredths(450),
            &PairingOptions::default(),
        );
        assert_eq!(p.pairs.len(), 2);
        assert_eq!(p.unmatched, vec!["M04", "M12"]);
    }

    /// Exhaustive oracle: among all maximal matchings of the eligible graph,
    /// the one whose edges, in greedy order, form the lexicographically
    /// smallest sequence.
    fn oracle(
        speakers: &[SpeakerRecord],
        max_delta: Percent,
        opts: &PairingOptions,
    ) -> Vec<(usize, usize)> {
        let edges = candidates(speakers, max_delta, opts);
        let n = speakers.len();
        let mut best: Option<Vec<usize>> = None;
        fn rec(
            e: usize,
            edges: &[(Percent, usize, usize)],
            used: &mut Vec<bool>,
            chosen: &mut Vec<usize>,
            best: &mut Option<Vec<usize>>,
        ) {
            if e == edges.len() {
                let maximal = edges.iter().all(|&(_, i, j)| used[i] || used[j]);
                if maximal && best.as_ref().is_none_or(|b| *chosen < *b) {
                    *best = Some(chosen.clone());
                }
                return;
            }
            let (_, i, j) = edges[e];
            if !used[i] && !used[j] {
                used[i] = true;
                used[j] = true;
                chosen.push(e);
                rec(e + 1, edges, used, chosen, best);
                chosen.pop();
                used[i] = false;
                used[j] = false;
            }
            rec(e + 1, edges, used, chosen, best);
        }
        rec(0, &edges, &mut vec![false; n], &mut Vec::new(), &mut best);
        best.unwrap_or_default()
            .into_iter()
            .map(|e| (edges[e].1, edges[e].2))
            .collect()
    }

    proptest! {
        #[test]
        fn greedy_matches_exhaustive_oracle(
            scores in prop::collection::vec((0u32..=10_000, any::<bool>()), 2..=8),
            max_delta in 0u32..=10_000,
            allow_female in any::<bool>(),
        ) {
            let speakers: Vec<SpeakerRecord> = scores
                .iter()
                .enumerate()
                .map(|(i, &(s, f))| spk(&format!("S{i:02}"), if f { Sex::Female } else { Sex::Male }, s / 50 * 50))
                .collect();
            let opts = PairingOptions { allow_female, allow_cross_sex: allow_female };
            let max_delta = Percent::from_hundredths(max_delta);
            let m = manifest(speakers.clone());
            let p = pair_speakers(&m, max_delta, &opts);
            let mut expect: Vec<(String, String)> = oracle(&m.speakers, max_delta, &opts)
                .into_iter()
                .map(|(i, j)| (m.speakers[i].speaker_id.clone(), m.speakers[j].speaker_id.clone()))
                .collect();
            expect.sort();
            let got: Vec<(String, String)> = p.pairs.iter().map(|q| (q.a.clone(), q.b.clone())).collect();
            prop_assert_eq!(got, expect);
            for q in &p.pairs {
                let (a, b) = (m.speaker(&q.a).unwrap(), m.speaker(&q.b).unwrap());
                prop_assert_eq!(q.delta, a.intelligibility_score.abs_diff(b.intelligibility_score));
                prop_assert!(a.band == b.band && q.delta <= max_delta);
            }
            prop_assert_eq!(p.pairs.len() * 2 + p.unmatched.len(), m.speakers.len());
        }
    }
}
