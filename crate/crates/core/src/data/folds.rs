use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{DatasetIndex, Role};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Fold {
    pub fn ids(&self, role: Role) -> &[usize] {
        match role {
            Role::Train => &self.train,
            Role::Validation => &self.val,
            Role::Test => &self.test,
        }
    }
}

/// `k` folds over sample ids; every id list is sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<Fold>,
}

impl FoldPlan {
    pub fn fold(&self, f: usize) -> Result<&Fold> {
        self.folds
            .get(f)
            .ok_or_else(|| Error::invalid("fold_plan", format!("fold {} outside [0, {})", f, self.folds.len())))
    }

    /// Checks that every fold partitions `0..n` and, for `k > 1`, that the
    /// test sets partition `0..n` across folds.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.folds.len() != self.k || self.k == 0 {
            return Err(Error::Dataset(format!("plan declares k={} but has {} folds", self.k, self.folds.len())));
        }
        let mut tested = vec![0usize; n];
        for (f, fold) in self.folds.iter().enumerate() {
            let mut seen = vec![false; n];
            for &i in fold.train.iter().chain(&fold.val).chain(&fold.test) {
                if i >= n || seen[i] {
                    return Err(Error::Dataset(format!("fold {}: id {} out of range or repeated", f, i)));
                }
                seen[i] = true;
            }
            if seen.iter().any(|&s| !s) {
                return Err(Error::Dataset(format!("fold {} does not cover every sample", f)));
            }
            fold.test.iter().for_each(|&i| tested[i] += 1);
        }
        if self.k > 1 && tested.iter().any(|&t| t != 1) {
            return Err(Error::Dataset("test sets do not partition the samples".into()));
        }
        Ok(())
    }
}

fn check_val_frac(val_frac: f64) -> Result<()> {
    if !(0.0..1.0).contains(&val_frac) {
        return Err(Error::invalid("make_folds", format!("val_frac {} outside [0, 1)", val_frac)));
    }
    Ok(())
}

/// Stratified per-class validation carve-out of `pool`: `round(val_frac·n_c)`
/// samples of each class, leaving at least one for training.
fn split_validation(index: &DatasetIndex, pool: &[usize], val_frac: f64, base: u64, fold: u64) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut val = Vec::new();
    for c in 0..index.num_classes() {
        let mut ids: Vec<usize> = pool.iter().copied().filter(|&i| index.samples()[i].class_id == c).collect();
        ids.shuffle(&mut seed::derived_rng(base, "validation", &[fold, c as u64]));
        let n = ids.len();
        let take = (Float::round(val_frac * n as f64) as usize).min(n.saturating_sub(1));
        val.extend_from_slice(&ids[..take]);
        train.extend_from_slice(&ids[take..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// Stratified k-fold plan.
///
/// Each class is shuffled independently, the shuffled classes are laid end to
/// end, and position `i` of that sequence goes to part `i mod k`. Every part
/// therefore holds `floor` or `ceil` of `N_c/k` samples of each class, and
/// part sizes differ by at most one.
pub fn make_folds(index: &DatasetIndex, k: usize, base_seed: u64, val_frac: f64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::invalid("make_folds", format!("k must be at least 2, got {}", k)));
    }
    check_val_frac(val_frac)?;
    if let Some(c) = index.counts().iter().position(|&n| n < k) {
        return Err(Error::Dataset(format!(
            "class {} has {} samples, fewer than k={}",
            index.class_names()[c],
            index.counts()[c],
            k
        )));
    }
    let mut part = vec![0usize; index.len()];
    let mut pos = 0usize;
    for c in 0..index.num_classes() {
        let mut ids: Vec<usize> = (0..index.len()).filter(|&i| index.samples()[i].class_id == c).collect();
        ids.shuffle(&mut seed::derived_rng(base_seed, seed::FOLDS, &[c as u64]));
        for i in ids {
            part[i] = pos % k;
            pos += 1;
        }
    }
    let folds = (0..k)
        .map(|f| {
            let test: Vec<usize> = (0..index.len()).filter(|&i| part[i] == f).collect();
            let rest: Vec<usize> = (0..index.len()).filter(|&i| part[i] != f).collect();
            let (train, val) = split_validation(index, &rest, val_frac, base_seed, f as u64);
            Fold { train, val, test }
        })
        .collect();
    Ok(FoldPlan { k, seed: base_seed, folds })
}

/// Single-fold plan honoring a fixed train/test split: ids `0..n_train` are
/// the provided training list and the rest the test list. A stratified
/// validation subset is carved from the training list.
pub fn fixed_split(index: &DatasetIndex, n_train: usize, base_seed: u64, val_frac: f64) -> Result<FoldPlan> {
    check_val_frac(val_frac)?;
    if n_train == 0 || n_train >= index.len() {
        return Err(Error::Dataset(format!(
            "fixed split needs non-empty train and test lists, got {} of {}",
            n_train,
            index.len()
        )));
    }
    let pool: Vec<usize> = (0..n_train).collect();
    let (train, val) = split_validation(index, &pool, val_frac, base_seed, 0);
    let test = (n_train..index.len()).collect();
    Ok(FoldPlan { k: 1, seed: base_seed, folds: vec![Fold { train, val, test }] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Sample;
    use alloc::string::ToString;

    fn index(counts: &[usize]) -> DatasetIndex {
        let mut samples = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            for i in 0..n {
                samples.push(Sample { path: format!("{}/{}", c, i), class_id: c });
            }
        }
        DatasetIndex::new((0..counts.len()).map(|c| c.to_string()).collect(), samples).unwrap()
    }

    #[test]
    fn exact_stratification_five_per_class() {
        let idx = index(&[5, 5]);
        let plan = make_folds(&idx, 5, 3, 0.1).unwrap();
        plan.validate(idx.len()).unwrap();
        for fold in &plan.folds {
            assert_eq!(idx.counts_of(&fold.test), vec![1, 1]);
        }
    }

    #[test]
    fn seeds_matter() {
        let idx = index(&[40, 17, 9]);
        let a = make_folds(&idx, 5, 1, 0.1).unwrap();
        assert_eq!(a, make_folds(&idx, 5, 1, 0.1).unwrap());
        let distinct = (2..7).filter(|&s| make_folds(&idx, 5, s, 0.1).unwrap() != a).count();
        assert_eq!(distinct, 5);
    }

    #[test]
    fn small_class_rejected() {
        assert!(make_folds(&index(&[10, 4]), 5, 0, 0.1).is_err());
        assert!(make_folds(&index(&[10, 10]), 5, 0, 1.0).is_err());
    }

    #[test]
    fn fixed_split_keeps_test_list() {
        let idx = index(&[20, 20]);
        let plan = fixed_split(&idx, 30, 0, 0.1).unwrap();
        plan.validate(idx.len()).unwrap();
        assert_eq!(plan.folds[0].test, (30..40).collect::<Vec<_>>());
        assert!(plan.folds[0].train.iter().chain(&plan.folds[0].val).all(|&i| i < 30));
    }
}
