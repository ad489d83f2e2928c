//! The two-encoder, five-head ensemble network.
//!
//! Heads and their inputs:
//!
//! | head | input                                   | scale |
//! |------|-----------------------------------------|-------|
//! | P1   | E13, residual stage 2                   | M/8   |
//! | P2   | E14, residual stage 3                   | M/16  |
//! | P3   | E15 ++ E25, both encoders' last stage   | M/32  |
//! | P4   | E23, flow stage 2                       | M/8   |
//! | P5   | E24, flow stage 3 (after middle flow)   | M/16  |
//!
//! The ensemble output is the plain mean of the five head probabilities.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::blocks::{
    init_store, Block, BlockConfig, Builder, Ctx, Encoder, EncoderCache, FclHead, HeadCache, ParamSpec, StatUpdate, Width,
};
use crate::ops::{concat_channels, softmax, softmax_cross_entropy, softmax_cross_entropy_backward, split_channels};
use crate::{DType, Error, Mode, ParamStore, Result, Scalar, Tensor};

pub const NUM_HEADS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_h: usize,
    pub input_w: usize,
    pub in_channels: usize,
    pub num_classes: usize,
    pub width: Width,
    pub head_widths: Vec<usize>,
    pub bn_momentum: f64,
    pub bn_epsilon: f64,
    pub dtype: DType,
}

impl ModelConfig {
    /// Full scale: 224×224 RGB, width 1.
    pub fn full_scale(num_classes: usize) -> Self {
        Self::scaled(224, 224, num_classes, Width::ONE)
    }

    pub fn scaled(input_h: usize, input_w: usize, num_classes: usize, width: Width) -> Self {
        ModelConfig {
            input_h,
            input_w,
            in_channels: 3,
            num_classes,
            width,
            head_widths: vec![256, 128, 64],
            bn_momentum: 0.99,
            bn_epsilon: 1e-3,
            dtype: DType::F32,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_h == 0 || self.input_w == 0 || !self.input_h.is_multiple_of(32) || !self.input_w.is_multiple_of(32) {
            return Err(Error::Config(format!(
                "input {}×{} must be positive multiples of 32",
                self.input_h, self.input_w
            )));
        }
        if self.num_classes < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {}", self.num_classes)));
        }
        if self.in_channels == 0 {
            return Err(Error::Config("in_channels must be positive".into()));
        }
        Width::new(self.width.num, self.width.den)?;
        if !(self.bn_momentum >= 0.0 && self.bn_momentum < 1.0) {
            return Err(Error::Config(format!("bn momentum {} outside [0, 1)", self.bn_momentum)));
        }
        if !(self.bn_epsilon > 0.0) {
            return Err(Error::Config("bn epsilon must be positive".into()));
        }
        Ok(())
    }

    pub fn input_shape(&self, batch: usize) -> [usize; 4] {
        [batch, self.input_h, self.input_w, self.in_channels]
    }
}

/// Named feature-map shapes of one forward pass, computed without tensors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapePlan {
    pub input: [usize; 4],
    /// `E11..E15` and `E21..E25` with their shapes, in that order.
    pub taps: Vec<(String, [usize; 4])>,
    pub concat: [usize; 4],
    pub head_inputs: [[usize; 4]; NUM_HEADS],
    pub logits: [usize; 2],
}

impl ShapePlan {
    pub fn tap(&self, name: &str) -> Option<[usize; 4]> {
        self.taps.iter().find(|(n, _)| n == name).map(|&(_, s)| s)
    }
}

/// Network topology plus the ordered parameter specs, without any values.
#[derive(Debug, Clone)]
pub struct Architecture {
    pub config: ModelConfig,
    pub enc1: Encoder,
    pub enc2: Encoder,
    pub heads: [FclHead; NUM_HEADS],
    pub specs: Vec<ParamSpec>,
}

impl Architecture {
    pub fn new(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut b = Builder::new();
        let enc1 = b.scope("enc1", |b| Encoder::residual(b, &BlockConfig::residual(config.width), config.in_channels))?;
        let enc2 = b.scope("enc2", |b| Encoder::flow(b, &BlockConfig::flow(config.width), config.in_channels))?;
        let probe = Self::head_input_shapes(&enc1, &enc2, config.input_shape(1))?;
        let mut heads = Vec::with_capacity(NUM_HEADS);
        for (i, s) in probe.iter().enumerate() {
            let name = format!("head.p{}", i + 1);
            heads.push(b.scope(&name, |b| FclHead::new(b, s[3], &config.head_widths, config.num_classes))?);
        }
        let heads: [FclHead; NUM_HEADS] = heads.try_into().map_err(|_| Error::Config("head count".into()))?;
        Ok(Architecture { config: config.clone(), enc1, enc2, heads, specs: b.into_specs() })
    }

    fn head_input_shapes(enc1: &Encoder, enc2: &Encoder, input: [usize; 4]) -> Result<[[usize; 4]; NUM_HEADS]> {
        let e1 = enc1.stage_shapes(input)?;
        let e2 = enc2.stage_shapes(input)?;
        if e1.len() != 4 || e2.len() != 4 {
            return Err(Error::Config("each encoder needs exactly four stages".into()));
        }
        let (a, b) = (e1[3], e2[3]);
        if a[..3] != b[..3] {
            return Err(Error::shape("concat_channels", format!("{:?} vs {:?}", a, b)));
        }
        let concat = [a[0], a[1], a[2], a[3] + b[3]];
        Ok([e1[1], e1[2], concat, e2[1], e2[2]])
    }

    pub fn plan(&self, batch: usize) -> Result<ShapePlan> {
        let input = self.config.input_shape(batch);
        let e1 = self.enc1.stage_shapes(input)?;
        let e2 = self.enc2.stage_shapes(input)?;
        let mut taps = Vec::with_capacity(10);
        taps.push((String::from("E11"), self.enc1.stem.conv_shape(input)?));
        for (k, s) in e1.iter().enumerate() {
            taps.push((format!("E1{}", k + 2), *s));
        }
        taps.push((String::from("E21"), self.enc2.stem.conv_shape(input)?));
        for (k, s) in e2.iter().enumerate() {
            taps.push((format!("E2{}", k + 2), *s));
        }
        let head_inputs = Self::head_input_shapes(&self.enc1, &self.enc2, input)?;
        for (head, s) in self.heads.iter().zip(&head_inputs) {
            head.output_shape(*s)?;
        }
        Ok(ShapePlan {
            input,
            taps,
            concat: head_inputs[2],
            head_inputs,
            logits: [batch, self.config.num_classes],
        })
    }

    pub fn num_trainable(&self) -> usize {
        self.count(|s| s.trainable)
    }

    /// Trainable parameter count under a name prefix.
    pub fn num_trainable_under(&self, prefix: &str) -> usize {
        self.count(|s| s.trainable && s.name.starts_with(prefix))
    }

    fn count(&self, f: impl Fn(&ParamSpec) -> bool) -> usize {
        self.specs.iter().filter(|s| f(s)).map(|s| s.shape.iter().product::<usize>()).sum()
    }

    /// Deterministic initial values; every tensor draws from its own stream
    /// keyed by `(seed, name)`.
    pub fn init_params<T: Scalar>(&self, init_seed: u64) -> Result<ParamStore<T>> {
        init_store(&self.specs, init_seed)
    }
}

#[derive(Debug, Clone)]
pub struct HeadOutputs<T> {
    pub logits: Vec<Tensor<T>>,
    /// P1..P5.
    pub probs: Vec<Tensor<T>>,
    /// P = mean(P1..P5).
    pub ensemble: Tensor<T>,
}

impl<T: Scalar> HeadOutputs<T> {
    pub fn from_logits(logits: Vec<Tensor<T>>) -> Result<Self> {
        if logits.is_empty() {
            return Err(Error::invalid("head_outputs", "no heads"));
        }
        let probs = logits.iter().map(softmax).collect::<Result<Vec<_>>>()?;
        let mut sum = probs[0].clone();
        for p in &probs[1..] {
            sum.add_assign(p)?;
        }
        let inv = T::one() / T::from_usize(probs.len());
        let ensemble = sum.map(|v| v * inv);
        Ok(HeadOutputs { logits, probs, ensemble })
    }

    /// Argmax of every ensemble row; ties go to the lowest class index.
    pub fn predictions(&self) -> Vec<usize> {
        argmax_rows(&self.ensemble)
    }
}

pub fn argmax_rows<T: Scalar>(t: &Tensor<T>) -> Vec<usize> {
    let k = *t.shape().last().unwrap_or(&1);
    t.data()
        .chunks_exact(k)
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct MultiHeadLoss<T> {
    /// `(1/5) Σ` of the per-head weighted cross-entropies.
    pub total: T,
    pub per_head: Vec<T>,
    targets: Vec<usize>,
}

/// Intermediate state of a forward pass needed by [`Model::backward`].
pub struct ForwardCache<T> {
    enc1: EncoderCache<T>,
    enc2: EncoderCache<T>,
    heads: Vec<HeadCache<T>>,
    e15_channels: usize,
}

#[derive(Debug, Clone)]
pub struct StepOutput<T> {
    pub loss: MultiHeadLoss<T>,
    pub outputs: HeadOutputs<T>,
}

#[derive(Debug, Clone)]
pub struct Model<T> {
    arch: Architecture,
    params: ParamStore<T>,
}

impl<T: Scalar> Model<T> {
    pub fn build(config: &ModelConfig, init_seed: u64) -> Result<Self> {
        let arch = Architecture::new(config)?;
        let params = arch.init_params(init_seed)?;
        Ok(Model { arch, params })
    }

    /// Pairs an architecture with an existing store; names and shapes must
    /// match the architecture's specs exactly and in order.
    pub fn from_parts(arch: Architecture, params: ParamStore<T>) -> Result<Self> {
        if params.len() != arch.specs.len() {
            return Err(Error::Config(format!(
                "{} parameters for an architecture with {}",
                params.len(),
                arch.specs.len()
            )));
        }
        for (spec, (name, value)) in arch.specs.iter().zip(params.iter()) {
            if spec.name != name || spec.shape != value.shape() {
                return Err(Error::Config(format!(
                    "parameter {} {:?} does not match {} {:?}",
                    name,
                    value.shape(),
                    spec.name,
                    spec.shape
                )));
            }
        }
        Ok(Model { arch, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.arch.config
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn into_params(self) -> ParamStore<T> {
        self.params
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let (_, h, w, c) = x.dims4("forward")?;
        let cfg = &self.arch.config;
        if (h, w, c) != (cfg.input_h, cfg.input_w, cfg.in_channels) {
            return Err(Error::shape(
                "forward",
                format!(
                    "input {}×{}×{} does not match configured {}×{}×{}",
                    h, w, c, cfg.input_h, cfg.input_w, cfg.in_channels
                ),
            ));
        }
        Ok(())
    }

    /// Forward pass with its backward cache and any BN running-stat updates.
    /// Parameters are not modified.
    pub fn forward_with_cache(
        &self,
        x: &Tensor<T>,
        mode: Mode,
    ) -> Result<(HeadOutputs<T>, ForwardCache<T>, Vec<StatUpdate<T>>)> {
        self.check_input(x)?;
        let cfg = &self.arch.config;
        let mut ctx = Ctx::new(&self.params, mode, cfg.bn_momentum, cfg.bn_epsilon);
        let (t1, enc1) = self.arch.enc1.forward(&mut ctx, x)?;
        let (t2, enc2) = self.arch.enc2.forward(&mut ctx, x)?;
        let concat = concat_channels(&t1[3], &t2[3])?;
        let inputs = [&t1[1], &t1[2], &concat, &t2[1], &t2[2]];
        let mut logits = Vec::with_capacity(NUM_HEADS);
        let mut heads = Vec::with_capacity(NUM_HEADS);
        for (head, input) in self.arch.heads.iter().zip(inputs) {
            let (z, c) = head.forward(&mut ctx, input)?;
            logits.push(z);
            heads.push(c);
        }
        let e15_channels = t1[3].shape()[3];
        let updates = ctx.updates;
        Ok((HeadOutputs::from_logits(logits)?, ForwardCache { enc1, enc2, heads, e15_channels }, updates))
    }

    /// Train mode normalizes with batch statistics but discards the
    /// running-stat updates; use [`Model::loss_and_backward`] to train.
    pub fn forward(&self, x: &Tensor<T>, mode: Mode) -> Result<HeadOutputs<T>> {
        Ok(self.forward_with_cache(x, mode)?.0)
    }

    /// Infer-mode ensemble probabilities and their argmax labels.
    pub fn predict(&self, x: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>)> {
        let out = self.forward(x, Mode::Infer)?;
        let labels = out.predictions();
        Ok((out.ensemble, labels))
    }

    /// Average of the five weighted cross-entropies.
    pub fn loss(&self, outputs: &HeadOutputs<T>, labels: &Tensor<T>, class_weights: &[f64]) -> Result<MultiHeadLoss<T>> {
        if class_weights.len() != self.arch.config.num_classes {
            return Err(Error::shape(
                "loss",
                format!("{} class weights for {} classes", class_weights.len(), self.arch.config.num_classes),
            ));
        }
        let w: Vec<T> = class_weights.iter().map(|&v| T::from_f64(v)).collect();
        let mut per_head = Vec::with_capacity(NUM_HEADS);
        let mut targets = Vec::new();
        for z in &outputs.logits {
            let out = softmax_cross_entropy(z, labels, &w)?;
            per_head.push(out.loss);
            targets = out.targets;
        }
        let total = per_head.iter().copied().sum::<T>() / T::from_usize(per_head.len());
        Ok(MultiHeadLoss { total, per_head, targets })
    }

    /// Accumulates gradients of `loss` into the parameter store.
    pub fn backward(
        &mut self,
        cache: ForwardCache<T>,
        outputs: &HeadOutputs<T>,
        loss: &MultiHeadLoss<T>,
        class_weights: &[f64],
    ) -> Result<()> {
        let w: Vec<T> = class_weights.iter().map(|&v| T::from_f64(v)).collect();
        let scale = T::one() / T::from_usize(NUM_HEADS);
        let Model { arch, params } = self;
        let mut d_inputs = Vec::with_capacity(NUM_HEADS);
        for ((head, c), p) in arch.heads.iter().zip(cache.heads).zip(&outputs.probs) {
            let dz = softmax_cross_entropy_backward(p, &loss.targets, &w, scale)?;
            d_inputs.push(head.backward(params, c, &dz)?);
        }
        let mut it = d_inputs.into_iter();
        let (d1, d2, d3, d4, d5) = match (it.next(), it.next(), it.next(), it.next(), it.next()) {
            (Some(a), Some(b), Some(c), Some(d), Some(e)) => (a, b, c, d, e),
            _ => return Err(Error::invalid("backward", "expected five head cotangents")),
        };
        let (d15, d25) = split_channels(&d3, cache.e15_channels)?;
        arch.enc2.backward(params, cache.enc2, vec![None, Some(d4), Some(d5), Some(d25)])?;
        arch.enc1.backward(params, cache.enc1, vec![None, Some(d1), Some(d2), Some(d15)])?;
        Ok(())
    }

    pub fn apply_stat_updates(&mut self, updates: Vec<StatUpdate<T>>) -> Result<()> {
        for u in updates {
            self.params.set(u.mean, u.new_mean)?;
            self.params.set(u.var, u.new_var)?;
        }
        Ok(())
    }

    /// One training-mode pass: zeroes gradients, runs forward, loss and
    /// backward, then applies the batch-norm running-stat updates.
    pub fn loss_and_backward(&mut self, x: &Tensor<T>, labels: &Tensor<T>, class_weights: &[f64]) -> Result<StepOutput<T>> {
        self.params.zero_grads();
        let (outputs, cache, updates) = self.forward_with_cache(x, Mode::Train)?;
        let loss = self.loss(&outputs, labels, class_weights)?;
        self.backward(cache, &outputs, &loss, class_weights)?;
        self.apply_stat_updates(updates)?;
        Ok(StepOutput { loss, outputs })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::one_hot;

    fn toy() -> ModelConfig {
        ModelConfig::scaled(32, 32, 2, Width::new(1, 8).unwrap())
    }

    #[test]
    fn full_scale_taps() {
        let arch = Architecture::new(&ModelConfig::full_scale(3)).unwrap();
        let plan = arch.plan(1).unwrap();
        assert_eq!(plan.tap("E13"), Some([1, 28, 28, 512]));
        assert_eq!(plan.tap("E14"), Some([1, 14, 14, 1024]));
        assert_eq!(plan.tap("E15"), Some([1, 7, 7, 2048]));
        assert_eq!(plan.tap("E23"), Some([1, 28, 28, 512]));
        assert_eq!(plan.tap("E24"), Some([1, 14, 14, 1024]));
        assert_eq!(plan.tap("E25"), Some([1, 7, 7, 2048]));
        assert_eq!(plan.concat, [1, 7, 7, 4096]);
        assert_eq!(plan.tap("E11"), Some([1, 112, 112, 64]));
        assert_eq!(plan.tap("E12"), Some([1, 56, 56, 256]));
    }

    #[test]
    fn toy_taps() {
        let plan = Architecture::new(&toy()).unwrap().plan(2).unwrap();
        for (e, s) in [("E13", [2, 4, 4, 64]), ("E14", [2, 2, 2, 128]), ("E15", [2, 1, 1, 256])] {
            assert_eq!(plan.tap(e), Some(s));
            let e2 = format!("E2{}", &e[2..]);
            assert_eq!(plan.tap(&e2), Some(s));
        }
    }

    #[test]
    fn config_errors() {
        assert!(Architecture::new(&ModelConfig::scaled(100, 100, 2, Width::ONE)).is_err());
        assert!(Architecture::new(&ModelConfig::scaled(32, 32, 1, Width::ONE)).is_err());
    }

    #[test]
    fn build_is_deterministic_and_seed_sensitive() {
        let a = Model::<f32>::build(&toy(), 5).unwrap();
        let b = Model::<f32>::build(&toy(), 5).unwrap();
        let c = Model::<f32>::build(&toy(), 6).unwrap();
        let same = a.params().iter().zip(b.params().iter()).all(|(x, y)| x.1 == y.1);
        assert!(same);
        let diff = a.params().iter().zip(c.params().iter()).any(|(x, y)| x.1 != y.1);
        assert!(diff);
    }

    #[test]
    fn forward_shapes_match_plan() {
        let model = Model::<f32>::build(&toy(), 1).unwrap();
        let x = Tensor::from_fn(&[2, 32, 32, 3], |i| ((i * 7919) % 255) as f32 / 255.0).unwrap();
        let out = model.forward(&x, Mode::Infer).unwrap();
        assert_eq!(out.ensemble.shape(), &[2, 2]);
        assert_eq!(out.logits.len(), 5);
        let bad = Tensor::<f32>::zeros(&[1, 64, 32, 3]).unwrap();
        assert!(model.forward(&bad, Mode::Infer).is_err());
    }

    #[test]
    fn ensemble_is_mean_of_heads() {
        let z0 = Tensor::new(&[1, 2], vec![50.0f64, 0.0]).unwrap();
        let z1 = Tensor::new(&[1, 2], vec![0.0f64, 50.0]).unwrap();
        let out = HeadOutputs::from_logits(vec![z0.clone(), z0.clone(), z0.clone(), z0, z1]).unwrap();
        assert!((out.ensemble.data()[0] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn argmax_tie_goes_low() {
        let t = Tensor::new(&[2, 2], vec![0.5f64, 0.5, 0.2, 0.8]).unwrap();
        assert_eq!(argmax_rows(&t), vec![0, 1]);
    }

    #[test]
    fn uniform_heads_give_ln_k() {
        let model = Model::<f64>::build(&toy(), 1).unwrap();
        let z = Tensor::<f64>::zeros(&[3, 2]).unwrap();
        let out = HeadOutputs::from_logits(vec![z; 5]).unwrap();
        let y = one_hot(&[0, 1, 1], 2).unwrap();
        let l = model.loss(&out, &y, &[1.0, 1.0]).unwrap();
        assert!((l.total - 2f64.ln()).abs() < 1e-12);
        assert!(model.loss(&out, &y, &[1.0]).is_err());
    }
}
