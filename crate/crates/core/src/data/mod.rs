//! Dataset index, stratified fold planning, class weights, image resampling,
//! augmentation and batch assembly.

mod batch;
mod folds;
mod image;
mod synth;
mod weights;

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use batch::{batches, epoch_order, Batch, BatchSpec, Batches, MemorySource, SampleSource};
pub use folds::{fixed_split, make_folds, Fold, FoldPlan};
pub use image::{apply_transform, augment, resize_nearest, AugmentConfig, Transform};
pub use synth::synthetic_images;
pub use weights::{class_weights, ClassWeights, WeightMode};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub path: String,
    pub class_id: usize,
}

/// Ordered sample list; sample ids are positions in this list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetIndex {
    samples: Vec<Sample>,
    class_names: Vec<String>,
    counts: Vec<usize>,
}

impl DatasetIndex {
    /// Requires at least two classes, dense class ids, unique paths and a
    /// non-empty sample set for every class.
    pub fn new(class_names: Vec<String>, samples: Vec<Sample>) -> Result<Self> {
        let k = class_names.len();
        if k < 2 {
            return Err(Error::Dataset(format!("need at least 2 classes, found {}", k)));
        }
        let mut counts = vec![0usize; k];
        let mut seen = BTreeSet::new();
        for s in &samples {
            if s.class_id >= k {
                return Err(Error::Label(format!("class id {} outside [0, {})", s.class_id, k)));
            }
            if !seen.insert(s.path.as_str()) {
                return Err(Error::Dataset(format!("duplicate path {}", s.path)));
            }
            counts[s.class_id] += 1;
        }
        if let Some(j) = counts.iter().position(|&c| c == 0) {
            return Err(Error::Dataset(format!("class {} has no samples", class_names[j])));
        }
        Ok(DatasetIndex { samples, class_names, counts })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.class_id).collect()
    }

    /// Per-class counts over a subset of sample ids.
    pub fn counts_of(&self, ids: &[usize]) -> Vec<usize> {
        let mut c = vec![0usize; self.num_classes()];
        for &i in ids {
            c[self.samples[i].class_id] += 1;
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Validation,
    Test,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::Validation => "validation",
            Role::Test => "test",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn sample(p: &str, c: usize) -> Sample {
        Sample { path: p.to_string(), class_id: c }
    }

    #[test]
    fn index_counts() {
        let names = vec!["NCP".to_string(), "NOR".to_string()];
        let idx = DatasetIndex::new(
            names,
            vec![sample("a", 1), sample("b", 1), sample("c", 1), sample("d", 0), sample("e", 0)],
        )
        .unwrap();
        assert_eq!(idx.counts(), &[2, 3]);
        assert_eq!(idx.len(), 5);
    }

    #[test]
    fn index_errors() {
        assert!(DatasetIndex::new(vec!["A".into()], vec![sample("a", 0)]).is_err());
        let names = vec!["A".to_string(), "B".to_string()];
        assert!(DatasetIndex::new(names.clone(), vec![sample("a", 0), sample("a", 1)]).is_err());
        assert!(DatasetIndex::new(names.clone(), vec![sample("a", 0)]).is_err());
        assert!(DatasetIndex::new(names, vec![sample("a", 0), sample("b", 2)]).is_err());
    }
}
