use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DatasetError;

pub const MAX_FOLDS: usize = 5;
pub const DEV_RATIO: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub folds: Vec<Fold>,
}

/// 70:10:20 train/dev/test folds. The shuffled corpus is cut into five
/// test chunks, so test sets of different folds are disjoint; each fold's
/// dev set is the next tenth of the corpus after its test chunk.
pub fn make_splits(ids: &[String], folds: usize, seed: u64) -> Result<SplitPlan, DatasetError> {
    if folds == 0 || folds > MAX_FOLDS {
        return Err(DatasetError::Schema(format!("fold count must be 1..={MAX_FOLDS}, got {folds}")));
    }
    let mut shuffled = ids.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = shuffled.len();
    let dev_n = (n as f64 * DEV_RATIO).round() as usize;
    let out = (0..folds)
        .map(|k| {
            let (lo, hi) = (k * n / MAX_FOLDS, (k + 1) * n / MAX_FOLDS);
            let test = shuffled[lo..hi].to_vec();
            let rest: Vec<&String> = shuffled[hi..].iter().chain(&shuffled[..lo]).collect();
            let dev = rest[..dev_n.min(rest.len())].iter().map(|s| s.to_string()).collect();
            let train = rest[dev_n.min(rest.len())..].iter().map(|s| s.to_string()).collect();
            Fold { train, dev, test }
        })
        .collect();
    Ok(SplitPlan { seed, folds: out })
}

/// One fold with a fixed test set. The pool is shuffled and split into
/// train and dev at the 70:10 ratio of the cross-validation folds.
pub fn fixed_test_split(pool: &[String], test: &[String], seed: u64) -> SplitPlan {
    let mut shuffled = pool.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let dev_n = (shuffled.len() as f64 / 8.0).round() as usize;
    let train = shuffled.split_off(dev_n);
    SplitPlan { seed, folds: vec![Fold { train, dev: shuffled, test: test.to_vec() }] }
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use proptest::prelude::*;

    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("q{i}")).collect()
    }

    #[test]
    fn sizes_for_3253() {
        let plan = make_splits(&ids(3253), 5, 7).unwrap();
        for f in &plan.folds {
            assert!(f.train.len().abs_diff(2277) <= 1, "{}", f.train.len());
            assert_eq!(f.dev.len(), 325);
            assert!(f.test.len().abs_diff(651) <= 1, "{}", f.test.len());
        }
        let covered: HashSet<&String> = plan.folds.iter().flat_map(|f| &f.test).collect();
        assert_eq!(covered.len(), 3253);
    }

    #[test]
    fn seeded() {
        assert_eq!(make_splits(&ids(50), 5, 1).unwrap(), make_splits(&ids(50), 5, 1).unwrap());
        assert_ne!(make_splits(&ids(50), 5, 1).unwrap(), make_splits(&ids(50), 5, 2).unwrap());
        assert!(make_splits(&ids(5), 6, 1).is_err());
    }

    #[test]
    fn fixed_test_keeps_test_and_splits_pool() {
        let plan = fixed_test_split(&ids(80), &["t1".to_string(), "t2".to_string()], 3);
        let f = &plan.folds[0];
        assert_eq!((f.train.len(), f.dev.len(), f.test.len()), (70, 10, 2));
        let mut all: Vec<&String> = f.train.iter().chain(&f.dev).collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 80);
    }

    proptest! {
        #[test]
        fn folds_partition_and_tests_are_disjoint(n in 0usize..200, folds in 1usize..=5, seed in 0u64..50) {
            let all = ids(n);
            let plan = make_splits(&all, folds, seed).unwrap();
            let mut seen_tests = HashSet::new();
            for f in &plan.folds {
                let mut union: Vec<&String> = f.train.iter().chain(&f.dev).chain(&f.test).collect();
                union.sort();
                union.dedup();
                prop_assert_eq!(union.len(), n);
                prop_assert_eq!(f.train.len() + f.dev.len() + f.test.len(), n);
                for t in &f.test {
                    prop_assert!(seen_tests.insert(t.clone()));
                }
            }
        }
    }
}
