use alloc::vec::Vec;

use super::{AdamState, EpochRecord, LrState, TrainConfig, TrainReport};
use crate::data::{batches, class_weights, BatchSpec, ClassWeights, Fold, Role, SampleSource};
use crate::{Error, Mode, Model, ParamStore, Result, Scalar, Tensor};

/// Hooks into the epoch loop. `now` supplies wall-clock seconds, which core
/// code cannot read itself.
pub trait FitObserver {
    fn now(&mut self) -> f64 {
        0.0
    }

    fn epoch_done(&mut self, _record: &EpochRecord) {}
}

impl FitObserver for () {}

#[derive(Debug, Clone)]
pub struct FitOutput<T> {
    pub report: TrainReport,
    /// Parameters at the end of the epoch with the lowest validation loss.
    pub best: ParamStore<T>,
}

struct PassStats {
    loss: f64,
    correct: usize,
    seen: usize,
}

impl PassStats {
    fn new() -> Self {
        PassStats { loss: 0.0, correct: 0, seen: 0 }
    }

    fn add(&mut self, loss: f64, preds: &[usize], labels: &[usize]) {
        self.loss += loss * labels.len() as f64;
        self.correct += preds.iter().zip(labels).filter(|(p, l)| p == l).count();
        self.seen += labels.len();
    }

    fn mean_loss(&self) -> f64 {
        self.loss / self.seen as f64
    }

    fn accuracy(&self) -> f64 {
        self.correct as f64 / self.seen as f64
    }
}

/// Infer-mode loss and accuracy over one role of a fold, with unit class weights.
pub fn evaluate_role<T: Scalar, S: SampleSource<T>>(
    model: &Model<T>,
    source: &S,
    fold: &Fold,
    role: Role,
    batch_size: usize,
) -> Result<(f64, f64)> {
    let unit = ClassWeights::unit(model.config().num_classes).weights;
    let spec = BatchSpec { role, batch_size, shuffle_seed: 0, epoch: 0, augment: None };
    let mut stats = PassStats::new();
    for batch in batches(source, fold, spec)? {
        let batch = batch?;
        let out = model.forward(&batch.images, Mode::Infer)?;
        let loss = model.loss(&out, &batch.onehot, &unit)?;
        stats.add(loss.total.as_f64(), &out.predictions(), &batch.labels);
    }
    Ok((stats.mean_loss(), stats.accuracy()))
}

fn non_finite(err: Error, epoch: usize, lr: f64, ids: &[usize]) -> Error {
    match err {
        Error::NonFinite { .. } => Error::NonFiniteLoss { epoch, lr, batch_ids: ids.to_vec() },
        e => e,
    }
}

/// Trains `model` in place on `fold.train`, validating on `fold.val` after
/// every epoch, and returns the history with the best parameters seen.
pub fn fit<T: Scalar, S: SampleSource<T>>(
    model: &mut Model<T>,
    source: &S,
    fold: &Fold,
    config: &TrainConfig,
    observer: &mut dyn FitObserver,
) -> Result<FitOutput<T>> {
    config.validate()?;
    if source.num_classes() != model.config().num_classes {
        return Err(Error::Config(alloc::format!(
            "data has {} classes, model {}",
            source.num_classes(),
            model.config().num_classes
        )));
    }
    let mut counts = alloc::vec![0usize; source.num_classes()];
    for &id in &fold.train {
        counts[source.label(id)?] += 1;
    }
    let weights = class_weights(&counts, config.weight_mode)?.weights;
    let mut adam = AdamState::new(model.params(), config);
    let mut sched = LrState::new(config);
    let mut best = model.params().clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut records = Vec::with_capacity(config.epochs);
    let start = observer.now();

    for epoch in 1..=config.epochs {
        let lr = sched.current_lr;
        let spec = BatchSpec {
            role: Role::Train,
            batch_size: config.batch_size,
            shuffle_seed: config.seed,
            epoch: epoch as u64,
            augment: config.augment.as_ref(),
        };
        let mut stats = PassStats::new();
        for batch in batches(source, fold, spec)? {
            let batch = batch?;
            let step = model
                .loss_and_backward(&batch.images, &batch.onehot, &weights)
                .map_err(|e| non_finite(e, epoch, lr, &batch.ids))?;
            let loss = step.loss.total.as_f64();
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, lr, batch_ids: batch.ids });
            }
            adam.step(model.params_mut(), lr, config)?;
            stats.add(loss, &step.outputs.predictions(), &batch.labels);
        }
        let (val_loss, val_acc) = evaluate_role(model, source, fold, Role::Validation, config.batch_size)
            .map_err(|e| non_finite(e, epoch, lr, &fold.val))?;
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, lr, batch_ids: fold.val.clone() });
        }
        sched.step(val_loss)?;
        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            best.copy_values_from(model.params())?;
        }
        let record = EpochRecord {
            epoch,
            train_loss: stats.mean_loss(),
            train_acc: stats.accuracy(),
            val_loss,
            val_acc,
            lr,
            wall_time_s: observer.now() - start,
        };
        observer.epoch_done(&record);
        records.push(record);
    }
    Ok(FitOutput { report: TrainReport { epochs: records, best_epoch, best_val_loss: best_val }, best })
}

/// Repeats training steps on one fixed batch of at most 8 images at a
/// constant rate and returns the loss before each step.
pub fn overfit_single_batch<T: Scalar>(
    model: &mut Model<T>,
    images: &Tensor<T>,
    onehot: &Tensor<T>,
    steps: usize,
    lr: f64,
    config: &TrainConfig,
) -> Result<Vec<f64>> {
    let (b, _, _, _) = images.dims4("overfit_single_batch")?;
    if b == 0 || b > 8 {
        return Err(Error::invalid("overfit_single_batch", alloc::format!("batch of {} outside 1..=8", b)));
    }
    let unit = ClassWeights::unit(model.config().num_classes).weights;
    let mut adam = AdamState::new(model.params(), config);
    let mut trace = Vec::with_capacity(steps);
    for step in 0..steps {
        let out = model.loss_and_backward(images, onehot, &unit).map_err(|e| non_finite(e, step, lr, &[]))?;
        let loss = out.loss.total.as_f64();
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch: step, lr, batch_ids: Vec::new() });
        }
        trace.push(loss);
        adam.step(model.params_mut(), lr, config)?;
    }
    Ok(trace)
}
