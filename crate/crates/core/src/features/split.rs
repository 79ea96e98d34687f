//! Seeded, class-stratified holdout and k-fold partitions.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::corpus::Gender;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitKind {
    Holdout { test_fraction: f64 },
    StratifiedKFold { k: usize },
}

/// Assignment of every row to a fold. For a holdout plan fold 1 is the test
/// partition and fold 0 the training partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub kind: SplitKind,
    pub seed: u64,
    pub assignments: Vec<usize>,
}

impl SplitPlan {
    /// Number of evaluation folds (1 for a holdout plan).
    pub fn n_folds(&self) -> usize {
        match self.kind {
            SplitKind::Holdout { .. } => 1,
            SplitKind::StratifiedKFold { k } => k,
        }
    }

    fn test_fold(&self, fold: usize) -> usize {
        match self.kind {
            SplitKind::Holdout { .. } => 1,
            SplitKind::StratifiedKFold { .. } => fold,
        }
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        let t = self.test_fold(fold);
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == t)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        let t = self.test_fold(fold);
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != t)
            .collect()
    }
}

fn shuffled_class(labels: &[Gender], class: Gender, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
    idx.shuffle(rng);
    idx
}

/// Stratified split. Each class is shuffled with a generator seeded from
/// `seed`; k-fold assignment deals the shuffled males and then the shuffled
/// females round-robin over the folds, continuing the rotation across the
/// class boundary so fold sizes differ by at most one.
pub fn make_split(labels: &[Gender], kind: SplitKind, seed: u64) -> Result<SplitPlan, FeatureError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let males = shuffled_class(labels, Gender::Male, &mut rng);
    let females = shuffled_class(labels, Gender::Female, &mut rng);
    let mut assignments = vec![0usize; labels.len()];
    match kind {
        SplitKind::Holdout { test_fraction } => {
            if !(test_fraction > 0.0 && test_fraction < 1.0) {
                return Err(FeatureError::InvalidSplit(format!(
                    "test fraction {test_fraction} outside (0, 1)"
                )));
            }
            for class in [&males, &females] {
                let n_test = (class.len() as f64 * test_fraction).round() as usize;
                for &i in &class[..n_test] {
                    assignments[i] = 1;
                }
            }
        }
        SplitKind::StratifiedKFold { k } => {
            if k < 2 {
                return Err(FeatureError::InvalidSplit(format!("k = {k} < 2")));
            }
            for (class, members) in [(Gender::Male, &males), (Gender::Female, &females)] {
                if members.len() < k {
                    return Err(FeatureError::TooFewForFolds {
                        class,
                        count: members.len(),
                        k,
                    });
                }
            }
            for (pos, &i) in males.iter().chain(&females).enumerate() {
                assignments[i] = pos % k;
            }
        }
    }
    Ok(SplitPlan {
        kind,
        seed,
        assignments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(m: usize, f: usize) -> Vec<Gender> {
        let mut v = vec![Gender::Male; m];
        v.extend(vec![Gender::Female; f]);
        v
    }

    fn count(labels: &[Gender], idx: &[usize], g: Gender) -> usize {
        idx.iter().filter(|&&i| labels[i] == g).count()
    }

    #[test]
    fn ml1m_shaped_ten_fold() {
        let l = labels(4331, 1709);
        let plan = make_split(&l, SplitKind::StratifiedKFold { k: 10 }, 42).unwrap();
        for fold in 0..10 {
            let test = plan.test_indices(fold);
            assert_eq!(test.len(), 604);
            assert!((433..=434).contains(&count(&l, &test, Gender::Male)));
            assert!((170..=171).contains(&count(&l, &test, Gender::Female)));
        }
    }

    #[test]
    fn holdout_100_users() {
        let l = labels(70, 30);
        let plan = make_split(&l, SplitKind::Holdout { test_fraction: 0.2 }, 1).unwrap();
        let test = plan.test_indices(0);
        assert_eq!(test.len(), 20);
        assert_eq!(count(&l, &test, Gender::Male), 14);
        assert_eq!(count(&l, &test, Gender::Female), 6);
        assert_eq!(plan.train_indices(0).len(), 80);
    }

    #[test]
    fn same_seed_same_plan() {
        let l = labels(50, 20);
        let kind = SplitKind::StratifiedKFold { k: 5 };
        assert_eq!(make_split(&l, kind, 9).unwrap(), make_split(&l, kind, 9).unwrap());
        assert_ne!(make_split(&l, kind, 9).unwrap(), make_split(&l, kind, 10).unwrap());
    }

    #[test]
    fn rejects_bad_parameters() {
        let l = labels(50, 3);
        assert!(matches!(
            make_split(&l, SplitKind::StratifiedKFold { k: 5 }, 0),
            Err(FeatureError::TooFewForFolds { class: Gender::Female, count: 3, k: 5 })
        ));
        assert!(make_split(&l, SplitKind::StratifiedKFold { k: 1 }, 0).is_err());
        assert!(make_split(&l, SplitKind::Holdout { test_fraction: 1.0 }, 0).is_err());
    }

    proptest! {
        #[test]
        fn kfold_is_a_stratified_partition(m in 5usize..200, f in 5usize..200, k in 2usize..6, seed in any::<u64>()) {
            let l = labels(m, f);
            let plan = make_split(&l, SplitKind::StratifiedKFold { k }, seed).unwrap();
            let mut seen = vec![0usize; l.len()];
            for fold in 0..k {
                let test = plan.test_indices(fold);
                for &i in &test { seen[i] += 1; }
                let tm = count(&l, &test, Gender::Male) as f64;
                let tf = count(&l, &test, Gender::Female) as f64;
                prop_assert!((tm - m as f64 / k as f64).abs() <= 1.0);
                prop_assert!((tf - f as f64 / k as f64).abs() <= 1.0);
                prop_assert_eq!(test.len() + plan.train_indices(fold).len(), l.len());
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
        }

        #[test]
        fn holdout_disjoint_and_exhaustive(m in 1usize..200, f in 1usize..200, frac in 0.05f64..0.95, seed in any::<u64>()) {
            let l = labels(m, f);
            let plan = make_split(&l, SplitKind::Holdout { test_fraction: frac }, seed).unwrap();
            let mut all = plan.test_indices(0);
            all.extend(plan.train_indices(0));
            all.sort();
            prop_assert_eq!(all, (0..l.len()).collect::<Vec<_>>());
        }
    }
}
