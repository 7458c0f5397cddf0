//! Use-case-centric scores.
//!
//! Per record:
//! * fixed score: the share of the four criteria the record meets, each
//!   weighted `1/4`;
//! * relative score: the sum of the weights of the criteria the record
//!   meets, where a criterion's weight is its rareness normalised over all
//!   criteria and rareness is `1 - |Q_i| / |D|`.
//!
//! Per repository, the arithmetic means of both over the repository's
//! records of interest. When every record meets every criterion the total
//! rareness is zero and the weights fall back to a uniform `1/4`.

use alloc::string::String;

use serde::{Deserialize, Serialize};

pub const N_CRITERIA: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Chrono,
    Geo,
    Lic,
    Ret,
}

impl Criterion {
    pub const ALL: [Criterion; N_CRITERIA] =
        [Criterion::Chrono, Criterion::Geo, Criterion::Lic, Criterion::Ret];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::Chrono => "chrono",
            Criterion::Geo => "geo",
            Criterion::Lic => "lic",
            Criterion::Ret => "ret",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Outcome of the four predicates for one record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash, Serialize, Deserialize)]
pub struct Predicates {
    pub chrono: bool,
    pub geo: bool,
    pub lic: bool,
    pub ret: bool,
}

impl Predicates {
    pub const ALL_MET: Predicates = Predicates { chrono: true, geo: true, lic: true, ret: true };

    pub fn met(&self, c: Criterion) -> bool {
        match c {
            Criterion::Chrono => self.chrono,
            Criterion::Geo => self.geo,
            Criterion::Lic => self.lic,
            Criterion::Ret => self.ret,
        }
    }

    pub fn set(&mut self, c: Criterion, value: bool) {
        match c {
            Criterion::Chrono => self.chrono = value,
            Criterion::Geo => self.geo = value,
            Criterion::Lic => self.lic = value,
            Criterion::Ret => self.ret = value,
        }
    }

    pub fn met_count(&self) -> usize {
        Criterion::ALL.iter().filter(|c| self.met(**c)).count()
    }
}

/// Per-criterion counts of records meeting it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MetCounts {
    pub chrono: u64,
    pub geo: u64,
    pub lic: u64,
    pub ret: u64,
}

impl MetCounts {
    pub fn get(&self, c: Criterion) -> u64 {
        match c {
            Criterion::Chrono => self.chrono,
            Criterion::Geo => self.geo,
            Criterion::Lic => self.lic,
            Criterion::Ret => self.ret,
        }
    }

    pub fn add(&mut self, p: &Predicates) {
        self.chrono += p.chrono as u64;
        self.geo += p.geo as u64;
        self.lic += p.lic as u64;
        self.ret += p.ret as u64;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScoringError {
    #[error("corpus contains no records of interest")]
    EmptyCorpus,
    #[error("repository {0} has no records of interest")]
    EmptyRepository(String),
    #[error("criterion {criterion} met by {q_size} records but corpus has only {d_size}")]
    CountExceedsCorpus { criterion: &'static str, q_size: u64, d_size: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionStats {
    pub criterion: Criterion,
    /// |Q_i|: number of records meeting the criterion.
    pub q_size: u64,
    pub rareness: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusTotals {
    /// |D|: records of interest.
    pub d_size: u64,
    pub total_rareness: f64,
    pub n_criteria: u32,
    /// Weights are uniform because the total rareness is zero.
    pub uniform_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    /// Indexed in [`Criterion::ALL`] order.
    pub criteria: [CriterionStats; N_CRITERIA],
    pub totals: CorpusTotals,
}

impl CorpusStats {
    /// Builds stats from per-criterion counts over a corpus of `d_size`.
    pub fn from_counts(met: MetCounts, d_size: u64) -> Result<CorpusStats, ScoringError> {
        if d_size == 0 {
            return Err(ScoringError::EmptyCorpus);
        }
        for c in Criterion::ALL {
            if met.get(c) > d_size {
                return Err(ScoringError::CountExceedsCorpus {
                    criterion: c.name(),
                    q_size: met.get(c),
                    d_size,
                });
            }
        }
        let rareness = Criterion::ALL.map(|c| 1.0 - met.get(c) as f64 / d_size as f64);
        let total = total_rareness_of(&rareness);
        let uniform = total <= 0.0;
        let criteria = Criterion::ALL.map(|c| {
            let r = rareness[c.index()];
            CriterionStats {
                criterion: c,
                q_size: met.get(c),
                rareness: r,
                weight: if uniform { 1.0 / N_CRITERIA as f64 } else { r / total },
            }
        });
        Ok(CorpusStats {
            criteria,
            totals: CorpusTotals {
                d_size,
                total_rareness: total,
                n_criteria: N_CRITERIA as u32,
                uniform_fallback: uniform,
            },
        })
    }

    pub fn get(&self, c: Criterion) -> &CriterionStats {
        &self.criteria[c.index()]
    }

    pub fn weight(&self, c: Criterion) -> f64 {
        self.criteria[c.index()].weight
    }
}

fn total_rareness_of(values: &[f64]) -> f64 {
    values.iter().sum()
}

/// Share of met criteria, each weighted `1/n`.
pub fn score_fixed(p: &Predicates) -> f64 {
    let share = 1.0 / N_CRITERIA as f64;
    Criterion::ALL.iter().filter(|c| p.met(**c)).map(|_| share).sum()
}

/// Single pass over the corpus of interest.
pub fn compute_stats<I>(assessments: I) -> Result<CorpusStats, ScoringError>
where
    I: IntoIterator<Item = Predicates>,
{
    let (met, d) = assessments.into_iter().fold((MetCounts::default(), 0u64), |(mut m, d), p| {
        m.add(&p);
        (m, d + 1)
    });
    CorpusStats::from_counts(met, d)
}

/// Sum of the weights of the met criteria, capped at 1.
pub fn score_relative(p: &Predicates, stats: &CorpusStats) -> f64 {
    let s: f64 = Criterion::ALL
        .iter()
        .filter(|c| p.met(**c))
        .map(|c| stats.weight(*c))
        .sum();
    s.min(1.0)
}

pub fn total_rareness(stats: &[CriterionStats]) -> f64 {
    stats.iter().map(|s| s.rareness).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepositoryScore {
    pub repository: String,
    /// |D_R|
    pub items_of_interest: u64,
    pub avfixed: f64,
    pub avrelative: f64,
    pub met: MetCounts,
}

/// Mean fixed and relative scores over one repository's records.
pub fn score_repository<I>(
    repository: &str,
    assessments: I,
    stats: &CorpusStats,
) -> Result<RepositoryScore, ScoringError>
where
    I: IntoIterator<Item = Predicates>,
{
    let mut met = MetCounts::default();
    let mut n = 0u64;
    let mut fixed_sum = 0.0;
    let mut relative_sum = 0.0;
    for p in assessments {
        met.add(&p);
        n += 1;
        fixed_sum += score_fixed(&p);
        relative_sum += score_relative(&p, stats);
    }
    if n == 0 {
        return Err(ScoringError::EmptyRepository(String::from(repository)));
    }
    Ok(RepositoryScore {
        repository: String::from(repository),
        items_of_interest: n,
        avfixed: fixed_sum / n as f64,
        avrelative: relative_sum / n as f64,
        met,
    })
}

/// Mean fixed score from met counts alone: `Σ met_i / (n · |D_R|)`.
pub fn avfixed_from_counts(met: MetCounts, items: u64) -> f64 {
    let total: u64 = Criterion::ALL.iter().map(|c| met.get(*c)).sum();
    total as f64 / (N_CRITERIA as f64 * items as f64)
}

/// Mean relative score from met counts alone: `Σ met_i · weight_i / |D_R|`.
pub fn avrelative_from_counts(met: MetCounts, items: u64, stats: &CorpusStats) -> f64 {
    let s: f64 = Criterion::ALL
        .iter()
        .map(|c| met.get(*c) as f64 * stats.weight(*c))
        .sum();
    s / items as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testgen::{arb_corpus, arb_predicates};
    use alloc::vec::Vec;
    use proptest::prelude::*;

    const D: u64 = 1_408_929;

    fn published_stats() -> CorpusStats {
        CorpusStats::from_counts(MetCounts { chrono: 8, geo: 34, lic: 184_852, ret: 34 }, D).unwrap()
    }

    fn only(c: Criterion) -> Predicates {
        let mut p = Predicates::default();
        p.set(c, true);
        p
    }

    #[test]
    fn fixed_scores() {
        assert_eq!(score_fixed(&only(Criterion::Lic)), 0.25);
        assert_eq!(score_fixed(&Predicates::ALL_MET), 1.0);
        assert_eq!(score_fixed(&Predicates::default()), 0.0);
    }

    #[test]
    fn published_rareness_and_weights() {
        let s = published_stats();
        let expect = [
            (Criterion::Lic, 0.8687996, 0.2245688),
            (Criterion::Geo, 0.9999759, 0.2584755),
            (Criterion::Ret, 0.9999759, 0.2584755),
            (Criterion::Chrono, 0.9999943, 0.2584802),
        ];
        for (c, r, w) in expect {
            assert!((s.get(c).rareness - r).abs() < 1e-7, "{c:?} rareness");
            assert!((s.get(c).weight - w).abs() < 1e-7, "{c:?} weight");
        }
        assert!((s.get(Criterion::Lic).rareness - (1.0 - 184_852.0 / D as f64)).abs() < 1e-12);
        assert!((s.totals.total_rareness - 3.8687456927).abs() < 1e-9);
        assert!(!s.totals.uniform_fallback);
    }

    #[test]
    fn uniform_fallback_when_everything_met() {
        let s = CorpusStats::from_counts(MetCounts { chrono: 5, geo: 5, lic: 5, ret: 5 }, 5).unwrap();
        assert!(s.totals.uniform_fallback);
        assert_eq!(s.totals.total_rareness, 0.0);
        for c in &s.criteria {
            assert_eq!(c.rareness, 0.0);
            assert_eq!(c.weight, 0.25);
        }
    }

    #[test]
    fn total_rareness_extremes() {
        let nobody = CorpusStats::from_counts(MetCounts::default(), 7).unwrap();
        assert_eq!(total_rareness(&nobody.criteria), 4.0);
        let all = CorpusStats::from_counts(MetCounts { chrono: 7, geo: 7, lic: 7, ret: 7 }, 7).unwrap();
        assert_eq!(total_rareness(&all.criteria), 0.0);
        let s = published_stats();
        assert_eq!(alloc::format!("{:.2}", total_rareness(&s.criteria)), "3.87");
    }

    #[test]
    fn empty_and_inconsistent_corpora() {
        assert_eq!(compute_stats(core::iter::empty()), Err(ScoringError::EmptyCorpus));
        assert!(matches!(
            CorpusStats::from_counts(MetCounts { lic: 3, ..Default::default() }, 2),
            Err(ScoringError::CountExceedsCorpus { .. })
        ));
        let s = published_stats();
        assert!(matches!(
            score_repository("x", core::iter::empty(), &s),
            Err(ScoringError::EmptyRepository(_))
        ));
    }

    #[test]
    fn relative_scores_with_published_weights() {
        let s = published_stats();
        assert!((score_relative(&only(Criterion::Lic), &s) - 0.2245688).abs() < 5e-8);
        assert!((score_relative(&only(Criterion::Chrono), &s) - 0.2584802).abs() < 5e-8);
        assert!((score_relative(&Predicates::ALL_MET, &s) - 1.0).abs() < 1e-12);
    }

    fn corpus(n: u64, met: MetCounts) -> impl Iterator<Item = Predicates> {
        (0..n).map(move |i| Predicates {
            chrono: i < met.chrono,
            geo: i < met.geo,
            lic: i < met.lic,
            ret: i < met.ret,
        })
    }

    #[test]
    fn published_repository_scores() {
        let s = published_stats();
        let rows = [
            ("GFZ", 9, MetCounts { chrono: 8, geo: 5, lic: 6, ret: 0 }, "0.5277778", "0.5230702"),
            ("PANGAEA", 35, MetCounts { chrono: 0, geo: 29, lic: 32, ret: 32 }, "0.6642857", "0.6558059"),
            ("PUB", 18, MetCounts { lic: 18, ..Default::default() }, "0.2500000", "0.2245688"),
        ];
        for (name, n, met, fx, rel) in rows {
            let r = score_repository(name, corpus(n, met), &s).unwrap();
            assert_eq!(r.met, met);
            assert_eq!(alloc::format!("{:.7}", r.avfixed), fx, "{name}");
            assert_eq!(alloc::format!("{:.7}", r.avrelative), rel, "{name}");
        }
    }

    #[test]
    fn closed_forms_match_published_rows() {
        let s = published_stats();
        let figshare = MetCounts { ret: 2, ..Default::default() };
        assert_eq!(alloc::format!("{:.7}", avfixed_from_counts(figshare, 1_224_071)), "0.0000004");
        assert_eq!(alloc::format!("{:.7}", avrelative_from_counts(figshare, 1_224_071, &s)), "0.0000004");
        let zenodo = MetCounts { lic: 184_796, ..Default::default() };
        assert_eq!(alloc::format!("{:.7}", avrelative_from_counts(zenodo, 184_796, &s)), "0.2245688");
    }

    // Naive recomputation straight from the definitions, independent of the
    // fold and helper functions above.
    fn naive(corpus: &[Predicates]) -> (Vec<f64>, Vec<f64>, f64, f64) {
        let d = corpus.len() as f64;
        let flags = |p: &Predicates| [p.chrono, p.geo, p.lic, p.ret];
        let mut q = [0.0f64; 4];
        for p in corpus {
            for (i, f) in flags(p).iter().enumerate() {
                if *f {
                    q[i] += 1.0;
                }
            }
        }
        let rare: Vec<f64> = q.iter().map(|qi| 1.0 - qi / d).collect();
        let total: f64 = rare[0] + rare[1] + rare[2] + rare[3];
        let w: Vec<f64> = if total == 0.0 {
            alloc::vec![0.25; 4]
        } else {
            rare.iter().map(|r| r / total).collect()
        };
        let mut fx = 0.0;
        let mut rl = 0.0;
        for p in corpus {
            let f = flags(p);
            for i in 0..4 {
                if f[i] {
                    fx += 0.25;
                    rl += w[i];
                }
            }
        }
        (rare, w, fx / d, rl / d)
    }

    proptest! {
        #[test]
        fn brute_force_equivalence(c in arb_corpus(1000)) {
            let s = compute_stats(c.iter().copied()).unwrap();
            let (rare, w, avf, avr) = naive(&c);
            for (i, crit) in Criterion::ALL.iter().enumerate() {
                prop_assert!((s.get(*crit).rareness - rare[i]).abs() < 1e-12);
                prop_assert!((s.get(*crit).weight - w[i]).abs() < 1e-12);
            }
            let r = score_repository("r", c.iter().copied(), &s).unwrap();
            prop_assert!((r.avfixed - avf).abs() < 1e-12);
            prop_assert!((r.avrelative - avr).abs() < 1e-12);
        }

        #[test]
        fn linearity_of_means(c in arb_corpus(1000)) {
            let s = compute_stats(c.iter().copied()).unwrap();
            let r = score_repository("r", c.iter().copied(), &s).unwrap();
            let n = c.len() as u64;
            prop_assert!((r.avfixed - avfixed_from_counts(r.met, n)).abs() < 1e-12);
            prop_assert!((r.avrelative - avrelative_from_counts(r.met, n, &s)).abs() < 1e-12);
        }

        #[test]
        fn weights_sum_to_one(c in arb_corpus(300)) {
            let s = compute_stats(c.iter().copied()).unwrap();
            let sum: f64 = s.criteria.iter().map(|c| c.weight).sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(s.totals.total_rareness >= 0.0 && s.totals.total_rareness <= 4.0);
            prop_assert!((total_rareness(&s.criteria) - s.totals.total_rareness).abs() < 1e-15);
        }

        #[test]
        fn range_and_monotonicity(c in arb_corpus(200), p in arb_predicates()) {
            let s = compute_stats(c.iter().copied()).unwrap();
            let fx = score_fixed(&p);
            let rl = score_relative(&p, &s);
            prop_assert!((0.0..=1.0).contains(&fx) && (0.0..=1.0).contains(&rl));
            prop_assert_eq!(fx == 1.0, p == Predicates::ALL_MET);
            let all_positive_met = Criterion::ALL.iter().all(|k| s.weight(*k) == 0.0 || p.met(*k));
            prop_assert_eq!((rl - 1.0).abs() < 1e-12, all_positive_met);
            for k in Criterion::ALL {
                if !p.met(k) {
                    let mut up = p;
                    up.set(k, true);
                    prop_assert!(score_fixed(&up) >= fx);
                    prop_assert!(score_relative(&up, &s) >= rl);
                }
            }
        }

        #[test]
        fn rarer_criterion_scores_higher(c in arb_corpus(300)) {
            let s = compute_stats(c.iter().copied()).unwrap();
            for a in Criterion::ALL {
                for b in Criterion::ALL {
                    if s.get(a).q_size < s.get(b).q_size {
                        prop_assert!(score_relative(&only(a), &s) > score_relative(&only(b), &s));
                    }
                }
            }
        }
    }
}
