use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::{augment, AugmentConfig, Fold, Role};
use crate::ops::one_hot;
use crate::{seed, Error, Result, Scalar, Tensor};

/// Loads preprocessed 1×H×W×C images by sample id.
pub trait SampleSource<T: Scalar> {
    fn load(&self, id: usize) -> Result<Tensor<T>>;
    fn label(&self, id: usize) -> Result<usize>;
    fn num_classes(&self) -> usize;
}

/// Images held in memory.
#[derive(Debug, Clone)]
pub struct MemorySource<T> {
    pub images: Vec<Tensor<T>>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl<T: Scalar> SampleSource<T> for MemorySource<T> {
    fn load(&self, id: usize) -> Result<Tensor<T>> {
        self.images
            .get(id)
            .cloned()
            .ok_or_else(|| Error::Dataset(format!("sample {} not in memory source", id)))
    }

    fn label(&self, id: usize) -> Result<usize> {
        self.labels
            .get(id)
            .copied()
            .ok_or_else(|| Error::Dataset(format!("sample {} not in memory source", id)))
    }

    fn num_classes(&self) -> usize {
        self.num_classes
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BatchSpec<'a> {
    pub role: Role,
    pub batch_size: usize,
    pub shuffle_seed: u64,
    pub epoch: u64,
    /// Only allowed for the training role.
    pub augment: Option<&'a AugmentConfig>,
}

#[derive(Debug, Clone)]
pub struct Batch<T> {
    pub ids: Vec<usize>,
    pub images: Tensor<T>,
    pub labels: Vec<usize>,
    pub onehot: Tensor<T>,
}

/// Sample order for one epoch: a seeded shuffle of `(seed, epoch)` for the
/// training role, ascending id order otherwise.
pub fn epoch_order(ids: &[usize], role: Role, shuffle_seed: u64, epoch: u64) -> Vec<usize> {
    let mut order = ids.to_vec();
    if role == Role::Train {
        order.shuffle(&mut seed::derived_rng(shuffle_seed, seed::SHUFFLE, &[epoch]));
    }
    order
}

pub struct Batches<'a, T: Scalar, S: SampleSource<T>> {
    source: &'a S,
    order: Vec<usize>,
    pos: usize,
    spec: BatchSpec<'a>,
    _marker: core::marker::PhantomData<T>,
}

/// Streams the batches of one role of a fold. The final partial batch is kept.
pub fn batches<'a, T: Scalar, S: SampleSource<T>>(source: &'a S, fold: &Fold, spec: BatchSpec<'a>) -> Result<Batches<'a, T, S>> {
    if spec.batch_size == 0 {
        return Err(Error::invalid("batches", "batch size must be positive"));
    }
    if spec.augment.is_some() && spec.role != Role::Train {
        return Err(Error::invalid("batches", format!("augmentation is not allowed for the {} role", spec.role.name())));
    }
    if let Some(a) = spec.augment {
        a.validate()?;
    }
    let ids = fold.ids(spec.role);
    if ids.is_empty() {
        return Err(Error::Dataset(format!("{} set is empty", spec.role.name())));
    }
    let order = epoch_order(ids, spec.role, spec.shuffle_seed, spec.epoch);
    Ok(Batches { source, order, pos: 0, spec, _marker: core::marker::PhantomData })
}

impl<T: Scalar, S: SampleSource<T>> Batches<'_, T, S> {
    pub fn num_batches(&self) -> usize {
        self.order.len().div_ceil(self.spec.batch_size)
    }

    fn assemble(&self, ids: &[usize]) -> Result<Batch<T>> {
        let mut images = Vec::with_capacity(ids.len());
        let mut labels = Vec::with_capacity(ids.len());
        for &id in ids {
            let img = self.source.load(id)?;
            let img = match self.spec.augment {
                Some(cfg) => augment(&img, cfg, seed::derive(cfg.seed, seed::AUGMENT, &[self.spec.epoch, id as u64]))?,
                None => img,
            };
            images.push(img);
            labels.push(self.source.label(id)?);
        }
        Ok(Batch {
            ids: ids.to_vec(),
            images: Tensor::stack_batch(&images)?,
            onehot: one_hot(&labels, self.source.num_classes())?,
            labels,
        })
    }
}

impl<T: Scalar, S: SampleSource<T>> Iterator for Batches<'_, T, S> {
    type Item = Result<Batch<T>>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.spec.batch_size).min(self.order.len());
        let ids: Vec<usize> = self.order[self.pos..end].to_vec();
        self.pos = end;
        Some(self.assemble(&ids))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    fn source(n: usize) -> MemorySource<f32> {
        MemorySource {
            images: (0..n).map(|i| Tensor::from_fn(&[1, 4, 4, 1], |j| (i * 16 + j) as f32).unwrap()).collect(),
            labels: (0..n).map(|i| i % 2).collect(),
            num_classes: 2,
        }
    }

    fn fold(n: usize) -> Fold {
        Fold { train: (0..n).collect(), val: vec![0, 1], test: vec![2, 3] }
    }

    #[test]
    fn sizes_and_partition() {
        let src = source(10);
        let f = fold(10);
        let spec = BatchSpec { role: Role::Train, batch_size: 4, shuffle_seed: 1, epoch: 0, augment: None };
        let got: Vec<Batch<f32>> = batches(&src, &f, spec).unwrap().map(|b| b.unwrap()).collect();
        assert_eq!(got.iter().map(|b| b.ids.len()).collect::<Vec<_>>(), vec![4, 4, 2]);
        let mut ids: Vec<usize> = got.iter().flat_map(|b| b.ids.clone()).collect();
        ids.sort_unstable();
        assert_eq!(ids, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn epochs_reshuffle_deterministically() {
        let ids: Vec<usize> = (0..50).collect();
        assert_eq!(epoch_order(&ids, Role::Train, 3, 1), epoch_order(&ids, Role::Train, 3, 1));
        assert_ne!(epoch_order(&ids, Role::Train, 3, 1), epoch_order(&ids, Role::Train, 3, 2));
        assert_eq!(epoch_order(&ids, Role::Test, 3, 1), ids);
    }

    #[test]
    fn augmentation_only_for_train() {
        let src = source(4);
        let f = fold(4);
        let aug = AugmentConfig::default();
        let spec = BatchSpec { role: Role::Test, batch_size: 2, shuffle_seed: 0, epoch: 0, augment: Some(&aug) };
        assert!(batches(&src, &f, spec).is_err());
    }

    #[test]
    fn empty_role_errors() {
        let src = source(4);
        let f = Fold { train: vec![0, 1, 2, 3], val: vec![], test: vec![] };
        let spec = BatchSpec { role: Role::Validation, batch_size: 2, shuffle_seed: 0, epoch: 0, augment: None };
        assert!(batches(&src, &f, spec).is_err());
    }
}
