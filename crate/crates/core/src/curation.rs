//! Turning QC scores into detector datasets: held-out test sampling,
//! top-k / random-k training selection, matched real sampling and quality
//! quartiles.
//!
//! Ties in score are always broken by ascending record id, so curation is
//! identical across platforms.

use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature::FeatureSet;
use crate::rng;

const TEST_STREAM: u64 = 1;
const RANDOM_K_STREAM: u64 = 2;
const REALS_STREAM: u64 = 3;

/// A feature set with one finite score per record.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSet {
    set: FeatureSet,
    scores: Vec<f64>,
}

impl ScoredSet {
    pub fn new(set: FeatureSet, scores: Vec<f64>) -> Result<Self> {
        if set.len() != scores.len() {
            return Err(Error::DimMismatch {
                expected: set.len(),
                found: scores.len(),
            });
        }
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite(set.records()[i].id.clone()));
        }
        Ok(Self { set, scores })
    }

    pub fn set(&self) -> &FeatureSet {
        &self.set
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> Result<ScoredSet> {
        Ok(ScoredSet {
            set: self.set.select(indices)?,
            scores: indices.iter().map(|&i| self.scores[i]).collect(),
        })
    }

    /// Highest score first; equal scores by ascending id.
    fn cmp_desc(&self, a: usize, b: usize) -> Ordering {
        self.scores[b]
            .total_cmp(&self.scores[a])
            .then_with(|| self.set.records()[a].id.cmp(&self.set.records()[b].id))
    }

    fn cmp_asc(&self, a: usize, b: usize) -> Ordering {
        self.scores[a]
            .total_cmp(&self.scores[b])
            .then_with(|| self.set.records()[a].id.cmp(&self.set.records()[b].id))
    }

    fn top_k_indices(&self, among: &[usize], k: usize) -> Vec<usize> {
        let mut idx = among.to_vec();
        idx.sort_by(|&a, &b| self.cmp_desc(a, b));
        idx.truncate(k);
        idx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Qc,
    Random,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Qc => "qc",
            Strategy::Random => "random",
        })
    }
}

impl core::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qc" => Ok(Strategy::Qc),
            "random" => Ok(Strategy::Random),
            other => Err(Error::Config(format!("unknown strategy `{other}`"))),
        }
    }
}

/// When the fake test split is drawn relative to training selection.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HoldOut {
    /// Test drawn uniformly from the full pool; training picked from the rest.
    #[default]
    BeforeSelection,
    /// Training picked from the full pool; test drawn uniformly from the rest.
    AfterSelection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurationPlan {
    pub pool_size: usize,
    pub test_size: usize,
    pub k: usize,
    pub seed: u64,
    pub hold_out: HoldOut,
}

impl Default for CurationPlan {
    fn default() -> Self {
        Self {
            pool_size: 20_000,
            test_size: 2_000,
            k: 10_000,
            seed: 0,
            hold_out: HoldOut::BeforeSelection,
        }
    }
}

impl CurationPlan {
    pub fn validate(&self) -> Result<()> {
        if self.test_size >= self.pool_size {
            return Err(Error::Config(format!(
                "plan: test_size {} must be below pool_size {}",
                self.test_size, self.pool_size
            )));
        }
        if self.k > self.pool_size - self.test_size {
            return Err(Error::Config(format!(
                "plan: k {} exceeds pool_size - test_size = {}",
                self.k,
                self.pool_size - self.test_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub plan: CurationPlan,
    pub strategy: Strategy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CuratedSplit {
    pub train_fake: FeatureSet,
    pub train_real: FeatureSet,
    pub test_fake: FeatureSet,
    pub test_real: FeatureSet,
    /// QC scores of `test_fake`, parallel to its records.
    pub test_fake_scores: Vec<f64>,
    pub provenance: Provenance,
}

impl CuratedSplit {
    pub fn test_fake_scored(&self) -> Result<ScoredSet> {
        ScoredSet::new(self.test_fake.clone(), self.test_fake_scores.clone())
    }
}

/// `k` distinct indices of `0..n` drawn by a seeded shuffle, returned ascending.
fn sample_sorted(n: usize, k: usize, seed: u64, stream: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed, stream));
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

fn complement(n: usize, sorted: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(n - sorted.len());
    let mut it = sorted.iter().peekable();
    for i in 0..n {
        if it.peek() == Some(&&i) {
            it.next();
        } else {
            out.push(i);
        }
    }
    out
}

/// Uniformly samples `test_size` records as a test set; the remainder keeps
/// its original order.
pub fn hold_out_test(pool: &FeatureSet, test_size: usize, seed: u64) -> Result<(FeatureSet, FeatureSet)> {
    if test_size >= pool.len() {
        return Err(Error::Config(format!(
            "hold-out: test_size {test_size} must be below pool size {}",
            pool.len()
        )));
    }
    let test = sample_sorted(pool.len(), test_size, seed, TEST_STREAM);
    let rest = complement(pool.len(), &test);
    Ok((pool.select(&test)?, pool.select(&rest)?))
}

/// The `k` highest-scoring records, highest first.
pub fn select_top_k(scored: &ScoredSet, k: usize) -> Result<FeatureSet> {
    if k > scored.len() {
        return Err(Error::TooFewRecords {
            needed: k,
            found: scored.len(),
        });
    }
    let all: Vec<usize> = (0..scored.len()).collect();
    scored.set.select(&scored.top_k_indices(&all, k))
}

/// `k` records sampled uniformly without replacement, original order kept.
pub fn select_random_k(set: &FeatureSet, k: usize, seed: u64) -> Result<FeatureSet> {
    if k > set.len() {
        return Err(Error::TooFewRecords {
            needed: k,
            found: set.len(),
        });
    }
    set.select(&sample_sorted(set.len(), k, seed, RANDOM_K_STREAM))
}

pub const QUARTILE_LABELS: [&str; 4] = [
    "0-25% (lowest quality)",
    "25-50%",
    "50-75%",
    "75-100% (highest quality)",
];

fn quartile_sizes(n: usize) -> [usize; 4] {
    let (base, rem) = (n / 4, n % 4);
    core::array::from_fn(|i| base + usize::from(i < rem))
}

/// Four contiguous rank bins, lowest scores first. Remainders go to the
/// lowest-quality bins.
pub fn quartile_partition(scored: &ScoredSet) -> Result<[ScoredSet; 4]> {
    if scored.len() < 4 {
        return Err(Error::TooFewRecords {
            needed: 4,
            found: scored.len(),
        });
    }
    let mut idx: Vec<usize> = (0..scored.len()).collect();
    idx.sort_by(|&a, &b| scored.cmp_asc(a, b));
    let sizes = quartile_sizes(scored.len());
    let mut start = 0;
    let mut bins = Vec::with_capacity(4);
    for size in sizes {
        bins.push(scored.select(&idx[start..start + size])?);
        start += size;
    }
    Ok(bins.try_into().expect("four bins"))
}

pub fn build_curated_split(
    fakes: &ScoredSet,
    reals: &FeatureSet,
    plan: &CurationPlan,
    strategy: Strategy,
) -> Result<CuratedSplit> {
    plan.validate()?;
    if fakes.len() != plan.pool_size {
        return Err(Error::Config(format!(
            "curation: plan expects a pool of {} fakes, got {}",
            plan.pool_size,
            fakes.len()
        )));
    }
    if fakes.set.dim() != reals.dim() {
        return Err(Error::DimMismatch {
            expected: fakes.set.dim(),
            found: reals.dim(),
        });
    }
    let needed = plan.k + plan.test_size;
    if reals.len() < needed {
        return Err(Error::TooFewRecords {
            needed,
            found: reals.len(),
        });
    }
    let n = fakes.len();
    let pick_train = |among: &[usize]| -> Vec<usize> {
        match strategy {
            Strategy::Qc => fakes.top_k_indices(among, plan.k),
            Strategy::Random => sample_sorted(among.len(), plan.k, plan.seed, RANDOM_K_STREAM)
                .into_iter()
                .map(|i| among[i])
                .collect(),
        }
    };
    let (test_idx, train_idx) = match plan.hold_out {
        HoldOut::BeforeSelection => {
            let test = sample_sorted(n, plan.test_size, plan.seed, TEST_STREAM);
            let rest = complement(n, &test);
            (test, pick_train(&rest))
        }
        HoldOut::AfterSelection => {
            let all: Vec<usize> = (0..n).collect();
            let train = pick_train(&all);
            let mut sorted = train.clone();
            sorted.sort_unstable();
            let rest = complement(n, &sorted);
            let test = sample_sorted(rest.len(), plan.test_size, plan.seed, TEST_STREAM)
                .into_iter()
                .map(|i| rest[i])
                .collect();
            (test, train)
        }
    };

    let mut real_idx: Vec<usize> = (0..reals.len()).collect();
    real_idx.shuffle(&mut rng::stream(plan.seed, REALS_STREAM));
    let mut test_real: Vec<usize> = real_idx[..plan.test_size].to_vec();
    let mut train_real: Vec<usize> = real_idx[plan.test_size..needed].to_vec();
    test_real.sort_unstable();
    train_real.sort_unstable();

    Ok(CuratedSplit {
        train_fake: fakes.set.select(&train_idx)?,
        train_real: reals.select(&train_real)?,
        test_fake: fakes.set.select(&test_idx)?,
        test_real: reals.select(&test_real)?,
        test_fake_scores: test_idx.iter().map(|&i| fakes.scores[i]).collect(),
        provenance: Provenance {
            plan: plan.clone(),
            strategy,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::Strategy;
    use super::*;
    use crate::feature::{FeatureRecord, Label};
    use alloc::collections::BTreeSet;
    use alloc::string::String;
    use alloc::vec;
    use proptest::prelude::*;
    use proptest::strategy::Strategy as _;

    fn pool(n: usize, label: Label) -> FeatureSet {
        let tag = if label == Label::Fake { "f" } else { "r" };
        FeatureSet::from_records(
            1,
            (0..n).map(|i| FeatureRecord::new(format!("{tag}{i:05}"), label, "c", "s", vec![i as f32])),
        )
        .unwrap()
    }

    fn scored(ids_scores: &[(&str, f64)]) -> ScoredSet {
        let set = FeatureSet::from_records(
            1,
            ids_scores
                .iter()
                .map(|(id, _)| FeatureRecord::new(*id, Label::Fake, "c", "s", vec![0.0])),
        )
        .unwrap();
        ScoredSet::new(set, ids_scores.iter().map(|p| p.1).collect()).unwrap()
    }

    fn ids(set: &FeatureSet) -> Vec<String> {
        set.iter().map(|r| r.id.clone()).collect()
    }

    #[test]
    fn hold_out_sizes_and_order() {
        let p = pool(100, Label::Fake);
        let (test, rest) = hold_out_test(&p, 0, 1).unwrap();
        assert!(test.is_empty());
        assert_eq!(rest, p);
        let (test, rest) = hold_out_test(&p, 10, 1).unwrap();
        assert_eq!((test.len(), rest.len()), (10, 90));
        let pos: Vec<f32> = rest.iter().map(|r| r.vector[0]).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert!(hold_out_test(&p, 100, 1).is_err());
    }

    #[test]
    fn hold_out_full_scale_sizes() {
        let p = pool(20_000, Label::Fake);
        let (test, rest) = hold_out_test(&p, 2_000, 0).unwrap();
        assert_eq!((test.len(), rest.len()), (2_000, 18_000));
    }

    #[test]
    fn hold_out_seeding() {
        let p = pool(100, Label::Fake);
        let first = ids(&hold_out_test(&p, 10, 0).unwrap().0);
        assert_eq!(ids(&hold_out_test(&p, 10, 0).unwrap().0), first);
        let differing = (1..=20u64)
            .filter(|&s| ids(&hold_out_test(&p, 10, s).unwrap().0) != first)
            .count();
        assert!(differing >= 1);
    }

    #[test]
    fn top_k_examples() {
        let s = scored(&[("x", 5.0), ("y", 1.0), ("z", 9.0)]);
        assert_eq!(ids(&select_top_k(&s, 2).unwrap()), ["z", "x"]);
        assert_eq!(ids(&select_top_k(&s, 3).unwrap()), ["z", "x", "y"]);
        assert!(select_top_k(&s, 4).is_err());
        let tie = scored(&[("b", 3.0), ("a", 3.0), ("c", 2.0)]);
        assert_eq!(ids(&select_top_k(&tie, 1).unwrap()), ["a"]);
    }

    #[test]
    fn random_k_examples() {
        let p = pool(30, Label::Fake);
        assert!(select_random_k(&p, 0, 3).unwrap().is_empty());
        let all = select_random_k(&p, 30, 3).unwrap();
        let a: BTreeSet<_> = ids(&all).into_iter().collect();
        assert_eq!(a, ids(&p).into_iter().collect());
        assert_eq!(select_random_k(&p, 12, 8).unwrap(), select_random_k(&p, 12, 8).unwrap());
        assert!(select_random_k(&p, 31, 3).is_err());
    }

    #[test]
    fn quartile_sizes_follow_remainder_rule() {
        // Brute force: lay out n items round-robin over bins starting from the lowest bin,
        // which is exactly "differ by at most one, extras to the lowest bins".
        for n in 4..40 {
            let mut want = [0usize; 4];
            for i in 0..n {
                want[i % 4] += 1;
            }
            assert_eq!(quartile_sizes(n), want, "n={n}");
        }
        assert_eq!(quartile_sizes(8), [2, 2, 2, 2]);
        assert_eq!(quartile_sizes(10), [3, 3, 2, 2]);
    }

    #[test]
    fn quartiles_are_ordered_low_to_high() {
        let pairs: Vec<(String, f64)> = (0..10).map(|i| (format!("id{i}"), ((i * 7) % 10) as f64)).collect();
        let refs: Vec<(&str, f64)> = pairs.iter().map(|(a, b)| (a.as_str(), *b)).collect();
        let bins = quartile_partition(&scored(&refs)).unwrap();
        let sizes: Vec<usize> = bins.iter().map(|b| b.len()).collect();
        assert_eq!(sizes, [3, 3, 2, 2]);
        assert_eq!(bins[0].scores(), [0.0, 1.0, 2.0]);
        assert_eq!(bins[3].scores(), [8.0, 9.0]);
        assert!(quartile_partition(&scored(&[("a", 1.0), ("b", 2.0), ("c", 3.0)])).is_err());
    }

    fn scored_pool(n: usize) -> ScoredSet {
        let set = pool(n, Label::Fake);
        let scores = (0..n).map(|i| ((i * 37) % 101) as f64).collect();
        ScoredSet::new(set, scores).unwrap()
    }

    #[test]
    fn curated_split_full_scale_sizes() {
        let fakes = scored_pool(20_000);
        let reals = pool(12_000, Label::Real);
        let split = build_curated_split(&fakes, &reals, &CurationPlan::default(), Strategy::Qc).unwrap();
        assert_eq!(split.train_fake.len(), 10_000);
        assert_eq!(split.test_fake.len(), 2_000);
        assert_eq!(split.train_real.len(), 10_000);
        assert_eq!(split.test_real.len(), 2_000);
    }

    #[test]
    fn full_pool_plan_takes_everything() {
        let fakes = scored_pool(40);
        let reals = pool(40, Label::Real);
        let plan = CurationPlan {
            pool_size: 40,
            test_size: 0,
            k: 40,
            seed: 5,
            hold_out: HoldOut::BeforeSelection,
        };
        for strategy in [Strategy::Qc, Strategy::Random] {
            let split = build_curated_split(&fakes, &reals, &plan, strategy).unwrap();
            let got: BTreeSet<_> = ids(&split.train_fake).into_iter().collect();
            assert_eq!(got, ids(fakes.set()).into_iter().collect());
        }
    }

    #[test]
    fn strategies_share_test_partition() {
        let fakes = scored_pool(400);
        let reals = pool(300, Label::Real);
        let plan = CurationPlan {
            pool_size: 400,
            test_size: 40,
            k: 200,
            seed: 17,
            hold_out: HoldOut::BeforeSelection,
        };
        let qc = build_curated_split(&fakes, &reals, &plan, Strategy::Qc).unwrap();
        let rnd = build_curated_split(&fakes, &reals, &plan, Strategy::Random).unwrap();
        assert_eq!(qc.test_fake, rnd.test_fake);
        assert_eq!(qc.test_real, rnd.test_real);
        assert_ne!(qc.train_fake, rnd.train_fake);
    }

    #[test]
    fn after_selection_keeps_disjointness() {
        let fakes = scored_pool(100);
        let reals = pool(100, Label::Real);
        let plan = CurationPlan {
            pool_size: 100,
            test_size: 10,
            k: 50,
            seed: 2,
            hold_out: HoldOut::AfterSelection,
        };
        let split = build_curated_split(&fakes, &reals, &plan, Strategy::Qc).unwrap();
        let top: BTreeSet<_> = ids(&select_top_k(&fakes, 50).unwrap()).into_iter().collect();
        assert_eq!(ids(&split.train_fake).into_iter().collect::<BTreeSet<_>>(), top);
        assert!(split.test_fake.iter().all(|r| !top.contains(&r.id)));
    }

    #[test]
    fn split_errors() {
        let fakes = scored_pool(50);
        let plan = CurationPlan {
            pool_size: 50,
            test_size: 5,
            k: 20,
            ..CurationPlan::default()
        };
        assert!(matches!(
            build_curated_split(&fakes, &pool(24, Label::Real), &plan, Strategy::Qc),
            Err(Error::TooFewRecords { needed: 25, found: 24 })
        ));
        let bad = CurationPlan { k: 46, ..plan.clone() };
        assert!(build_curated_split(&fakes, &pool(100, Label::Real), &bad, Strategy::Qc).is_err());
        let wrong_pool = CurationPlan { pool_size: 60, ..plan };
        assert!(build_curated_split(&fakes, &pool(100, Label::Real), &wrong_pool, Strategy::Qc).is_err());
    }

    fn arb_scored() -> impl proptest::strategy::Strategy<Value = ScoredSet> {
        proptest::collection::vec(0i32..20, 4..60).prop_map(|raw| {
            let set = FeatureSet::from_records(
                1,
                (0..raw.len())
                    .map(|i| FeatureRecord::new(format!("{:03}", (i * 7919) % 1000), Label::Fake, "c", "s", vec![0.0])),
            )
            .unwrap();
            ScoredSet::new(set, raw.iter().map(|&v| f64::from(v) * 0.5).collect()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn top_k_dominates(s in arb_scored(), frac in 0.0f64..1.0) {
            let k = ((s.len() as f64) * frac) as usize;
            let top = select_top_k(&s, k).unwrap();
            let chosen: BTreeSet<_> = ids(&top).into_iter().collect();
            let key = |i: usize| (s.scores()[i], s.set().records()[i].id.clone());
            let min_in = (0..s.len()).filter(|&i| chosen.contains(&s.set().records()[i].id)).map(key)
                .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| b.1.cmp(&a.1)));
            if let Some((m, mid)) = min_in {
                for i in 0..s.len() {
                    if !chosen.contains(&s.set().records()[i].id) {
                        let (o, oid) = key(i);
                        prop_assert!(m > o || (m == o && mid < oid));
                    }
                }
            }
        }

        #[test]
        fn quartiles_partition_input(s in arb_scored()) {
            let bins = quartile_partition(&s).unwrap();
            let sizes: Vec<usize> = bins.iter().map(|b| b.len()).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            let mut all: Vec<String> = bins.iter().flat_map(|b| ids(b.set())).collect();
            prop_assert_eq!(all.len(), s.len());
            all.sort();
            all.dedup();
            prop_assert_eq!(all.len(), s.len());
            for w in bins.windows(2) {
                let hi = w[0].scores().iter().copied().fold(f64::MIN, f64::max);
                let lo = w[1].scores().iter().copied().fold(f64::MAX, f64::min);
                prop_assert!(hi <= lo);
            }
        }

        #[test]
        fn splits_disjoint_and_balanced(seed in 0u64..1000, strat in prop_oneof![Just(Strategy::Qc), Just(Strategy::Random)]) {
            let fakes = scored_pool(60);
            let reals = pool(45, Label::Real);
            let plan = CurationPlan { pool_size: 60, test_size: 9, k: 30, seed, hold_out: HoldOut::BeforeSelection };
            let split = build_curated_split(&fakes, &reals, &plan, strat).unwrap();
            prop_assert_eq!(split.train_fake.len(), split.train_real.len());
            prop_assert_eq!(split.test_fake.len(), split.test_real.len());
            prop_assert!(split.test_fake.iter().all(|r| !split.train_fake.contains_id(&r.id)));
            prop_assert!(split.test_real.iter().all(|r| !split.train_real.contains_id(&r.id)));
        }
    }
}
