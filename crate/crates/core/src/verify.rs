//! Self-checks runnable from the command line: tap-shape conformance at full
//! scale and central finite-difference certification of every operator and
//! block in `f64`.
//!
//! Each gradient case builds a [`Probe`]: a set of differentiable inputs, a
//! forward map and its hand-written vector-Jacobian product. The scalar
//! objective is `Σ r ⊙ f(inputs)` for a random cotangent `r`, so the analytic
//! gradient is exactly the VJP applied to `r`.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::Rng as _;

use crate::blocks::{
    init_store, Block, Builder, ConvBlock, ConvBn, Ctx, DenseLayer, EntryUnit, ExitFlow, FclHead, FlowStem,
    IdentityBlock, MiddleUnit, ResStem, SepConvBn, Width,
};
use crate::model::{Architecture, ModelConfig};
use crate::ops::{self, ConvSpec, Padding};
use crate::{seed, Error, Mode, Model, ParamStore, Result, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Largest observed error (relative error for gradient checks).
    pub max_error: f64,
    pub tolerance: f64,
    pub seeds: usize,
    pub detail: String,
}

type EvalFn = Box<dyn Fn(&[Tensor<f64>]) -> Result<Tensor<f64>>>;
type VjpFn = Box<dyn Fn(&[Tensor<f64>], &Tensor<f64>) -> Result<Vec<Tensor<f64>>>>;

/// One differentiable function at one random point.
pub struct Probe {
    pub inputs: Vec<Tensor<f64>>,
    pub input_names: Vec<String>,
    pub cotangent: Tensor<f64>,
    eval: EvalFn,
    vjp: VjpFn,
}

impl Probe {
    pub fn output(&self, inputs: &[Tensor<f64>]) -> Result<Tensor<f64>> {
        (self.eval)(inputs)
    }

    /// `Σ r ⊙ f(inputs)`.
    pub fn objective(&self, inputs: &[Tensor<f64>]) -> Result<f64> {
        let y = self.output(inputs)?;
        if y.shape() != self.cotangent.shape() {
            return Err(Error::shape("probe", format!("output {:?} vs cotangent {:?}", y.shape(), self.cotangent.shape())));
        }
        Ok(y.data().iter().zip(self.cotangent.data()).map(|(a, b)| a * b).sum())
    }

    /// Gradient of [`Probe::objective`] with respect to every input.
    pub fn analytic(&self) -> Result<Vec<Tensor<f64>>> {
        let g = (self.vjp)(&self.inputs, &self.cotangent)?;
        if g.len() != self.inputs.len() || g.iter().zip(&self.inputs).any(|(a, b)| a.shape() != b.shape()) {
            return Err(Error::shape("probe", "gradient layout does not match inputs"));
        }
        Ok(g)
    }
}

#[derive(Clone, Copy)]
pub struct GradCase {
    pub name: &'static str,
    /// Linear (or multilinear) in each input: held to the tighter tolerance.
    pub linear: bool,
    /// Contains ReLU or max-pool kinks.
    pub kinked: bool,
    /// Coordinates checked per input tensor; 0 means all.
    pub per_tensor: usize,
    pub make: fn(u64) -> Result<Probe>,
}

impl GradCase {
    pub fn tolerance(&self) -> f64 {
        if self.linear {
            LINEAR_TOL
        } else {
            TOL
        }
    }
}

pub const TOL: f64 = 1e-4;
pub const LINEAR_TOL: f64 = 1e-5;
/// Denominator floor of the relative error.
pub const REL_FLOOR: f64 = 1e-3;
pub const STEP: f64 = 1e-5;
/// Tolerance of the sampled end-to-end model check.
pub const MODEL_TOL: f64 = 1e-3;

fn uniform(rng: &mut seed::Rng, shape: &[usize], lo: f64, hi: f64) -> Result<Tensor<f64>> {
    Tensor::from_fn(shape, |_| rng.gen_range(lo..hi))
}

/// Values with magnitude in `[0.05, 1)` and random sign: away from the ReLU kink.
fn off_kink(rng: &mut seed::Rng, shape: &[usize]) -> Result<Tensor<f64>> {
    Tensor::from_fn(shape, |_| {
        let m = rng.gen_range(0.05..1.0);
        if rng.gen_bool(0.5) {
            m
        } else {
            -m
        }
    })
}

/// A random permutation of evenly spaced values, so no two entries tie.
fn distinct(rng: &mut seed::Rng, shape: &[usize]) -> Result<Tensor<f64>> {
    let n: usize = shape.iter().product();
    let mut order = sample(rng, n, n).into_vec();
    let data = order.drain(..).map(|i| (i as f64 - n as f64 / 2.0) * 0.01).collect();
    Tensor::new(shape, data)
}

fn case_rng(case_seed: u64, tag: &str) -> seed::Rng {
    seed::derived_rng(case_seed, "gradcheck", &[seed::derive(0, tag, &[])])
}

fn probe(
    inputs: Vec<Tensor<f64>>,
    names: &[&str],
    rng: &mut seed::Rng,
    eval: impl Fn(&[Tensor<f64>]) -> Result<Tensor<f64>> + 'static,
    vjp: impl Fn(&[Tensor<f64>], &Tensor<f64>) -> Result<Vec<Tensor<f64>>> + 'static,
) -> Result<Probe> {
    let y = eval(&inputs)?;
    let cotangent = uniform(rng, y.shape(), -1.0, 1.0)?;
    Ok(Probe {
        inputs,
        input_names: names.iter().map(|s| String::from(*s)).collect(),
        cotangent,
        eval: Box::new(eval),
        vjp: Box::new(vjp),
    })
}

fn conv_probe(s: u64, kernel: usize, stride: usize, padding: Padding) -> Result<Probe> {
    let mut rng = case_rng(s, "conv2d");
    let spec = ConvSpec::new(kernel, stride, padding);
    let x = uniform(&mut rng, &[2, 5, 6, 3], -1.0, 1.0)?;
    let w = uniform(&mut rng, &[kernel, kernel, 3, 4], -1.0, 1.0)?;
    let b = uniform(&mut rng, &[4], -1.0, 1.0)?;
    probe(
        vec![x, w, b],
        &["input", "weights", "bias"],
        &mut rng,
        move |t| ops::conv2d(&t[0], &t[1], Some(&t[2]), &spec),
        move |t, dy| {
            let g = ops::conv2d_backward(&t[0], &t[1], &spec, dy)?;
            Ok(vec![g.input, g.weights, g.bias])
        },
    )
}

fn depthwise_probe(s: u64) -> Result<Probe> {
    let mut rng = case_rng(s, "depthwise");
    let spec = ConvSpec::depthwise(3, 2, 3);
    let x = uniform(&mut rng, &[2, 5, 4, 3], -1.0, 1.0)?;
    let w = uniform(&mut rng, &[3, 3, 3, 1], -1.0, 1.0)?;
    let b = uniform(&mut rng, &[3], -1.0, 1.0)?;
    probe(
        vec![x, w, b],
        &["input", "weights", "bias"],
        &mut rng,
        move |t| ops::depthwise_conv2d(&t[0], &t[1], Some(&t[2]), &spec),
        move |t, dy| {
            let g = ops::depthwise_conv2d_backward(&t[0], &t[1], &spec, dy)?;
            Ok(vec![g.input, g.weights, g.bias])
        },
    )
}

fn separable_probe(s: u64) -> Result<Probe> {
    let mut rng = case_rng(s, "separable");
    let spec = ConvSpec::depthwise(3, 1, 3);
    let x = uniform(&mut rng, &[2, 4, 4, 3], -1.0, 1.0)?;
    let dw = uniform(&mut rng, &[3, 3, 3, 1], -1.0, 1.0)?;
    let pw = uniform(&mut rng, &[1, 1, 3, 5], -1.0, 1.0)?;
    let db = uniform(&mut rng, &[3], -1.0, 1.0)?;
    let pb = uniform(&mut rng, &[5], -1.0, 1.0)?;
    probe(
        vec![x, dw, pw, db, pb],
        &["input", "dw_weights", "pw_weights", "dw_bias", "pw_bias"],
        &mut rng,
        move |t| ops::depthwise_separable_conv(&t[0], &t[1], &t[2], Some(&t[3]), Some(&t[4]), &spec),
        move |t, dy| {
            let g = ops::depthwise_separable_conv_backward(&t[0], &t[1], &t[2], Some(&t[3]), &spec, dy)?;
            Ok(vec![g.input, g.dw_weights, g.pw_weights, g.dw_bias, g.pw_bias])
        },
    )
}

fn dense_probe(s: u64) -> Result<Probe> {
    let mut rng = case_rng(s, "dense");
    let x = uniform(&mut rng, &[3, 5], -1.0, 1.0)?;
    let w = uniform(&mut rng, &[5, 4], -1.0, 1.0)?;
    let b = uniform(&mut rng, &[4], -1.0, 1.0)?;
    probe(
        vec![x, w, b],
        &["input", "weights", "bias"],
        &mut rng,
        |t| ops::dense(&t[0], &t[1], &t[2]),
        |t, dy| {
            let g = ops::dense_backward(&t[0], &t[1], dy)?;
            Ok(vec![g.input, g.weights, g.bias])
        },
    )
}

fn relu_probe(s: u64) -> Result<Probe> {
    let mut rng = case_rng(s, "relu");
    let x = off_kink(&mut rng, &[2, 3, 3, 2])?;
    probe(
        vec![x],
        &["input"],
        &mut rng,
        |t| Ok(ops::relu(&t[0])),
        |t, dy| Ok(vec![ops::relu_backward(&ops::relu(&t[0]), dy)?]),
    )
}

fn add_probe(s: u64) -> Result<Probe> {
    let mut rng = case_rng(s, "add");
    let a = uniform(&mut rng, &[2, 3, 3, 2], -1.0, 1.0)?;
    let b = uniform(&mut rng, &[2, 3, 3, 2], -1.0, 1.0)?;
    probe(vec![a, b], &["a", "b"], &mut rng, |t| ops::add(&t[0], &t[1]), |_, dy| Ok(vec![dy.clone(), dy.clone()]))
}

fn concat_probe(s: u64) -> Result<Probe> {
    let mut rng = case_rng(s, "concat");
    let a = uniform(&mut rng, &[2, 2, 3, 2], -1.0, 1.0)?;
    let b = uniform(&mut rng, &[2, 2, 3, 3], -1.0, 1.0)?;
    probe(
        vec![a, b],
        &["a", "b"],
        &mut rng,
        |t| ops::concat_channels(&t[0], &t[1]),
        |_, dy| {
            let (a, b) = ops::split_channels(dy, 2)?;
            Ok(vec![a, b])
        },
    )
}

fn split_probe(s: u64) -> Result<Probe> {
    let mut rng = case_rng(s, "split");
    let x = uniform(&mut rng, &[2, 2, 3, 5], -1.0, 1.0)?;
    probe(
        vec![x],
        &["input"],
        &mut rng,
        |t| {
            let (a, b) = ops::split_channels(&t[0], 2)?;
            let mut flat = a.into_data();
            flat.extend_from_slice(b.data());
            Tensor::new(&[flat.len()], flat)
        },
        |_, dy| {
            let half = 2 * 2 * 3 * 2;
            let a = Tensor::new(&[2, 2, 3, 2], dy.data()[..half].to_vec())?;
            let b = Tensor::new(&[2, 2, 3, 3], dy.data()[half..].to_vec())?;
            Ok(vec![ops::concat_channels(&a, &b)?])
        },
    )
}

fn maxpool_probe(s: u64) -> Result<Probe> {
    let mut rng = case_rng(s, "maxpool");
    let x = distinct(&mut rng, &[2, 5, 6, 2])?;
    probe(
        vec![x],
        &["input"],
        &mut rng,
        |t| ops::maxpool2d(&t[0], 3, 3, 2),
        |t, dy| {
            let out = ops::maxpool2d_indexed(&t[0], 3, 3, 2)?;
            Ok(vec![ops::maxpool2d_backward(t[0].shape(), &out.argmax, dy)?])
        },
    )
}

fn gap_probe(s: u64) -> Result<Probe> {
    let mut rng = case_rng(s, "gap");
    let x = uniform(&mut rng, &[2, 3, 4, 3], -1.0, 1.0)?;
    probe(
        vec![x],
        &["input"],
        &mut rng,
        |t| ops::global_avg_pool(&t[0]),
        |t, dy| Ok(vec![ops::global_avg_pool_backward(t[0].shape(), dy)?]),
    )
}

fn batch_norm_probe(s: u64, mode: Mode) -> Result<Probe> {
    let mut rng = case_rng(s, if mode == Mode::Train { "bn_train" } else { "bn_infer" });
    let x = uniform(&mut rng, &[3, 2, 2, 3], -1.0, 1.0)?;
    let gamma = uniform(&mut rng, &[3], 0.5, 1.5)?;
    let beta = uniform(&mut rng, &[3], -0.5, 0.5)?;
    let mean = uniform(&mut rng, &[3], -0.2, 0.2)?;
    let var = uniform(&mut rng, &[3], 0.5, 1.5)?;
    let run = move |t: &[Tensor<f64>]| ops::batch_norm(&t[0], &t[1], &t[2], &mean, &var, mode, 0.99, 1e-3);
    let run2 = run.clone();
    probe(
        vec![x, gamma, beta],
        &["input", "gamma", "beta"],
        &mut rng,
        move |t| Ok(run(t)?.output),
        move |t, dy| {
            let out = run2(t)?;
            let g = ops::batch_norm_backward(&out.cache, &t[1], dy)?;
            Ok(vec![g.input, g.gamma, g.beta])
        },
    )
}

fn softmax_probe(s: u64) -> Result<Probe> {
    let mut rng = case_rng(s, "softmax");
    let z = uniform(&mut rng, &[3, 4], -2.0, 2.0)?;
    probe(
        vec![z],
        &["logits"],
        &mut rng,
        |t| ops::softmax(&t[0]),
        |t, dy| {
            let p = ops::softmax(&t[0])?;
            let (b, k) = p.dims2("softmax")?;
            let mut dz = vec![0.0; b * k];
            for i in 0..b {
                let (pr, gr) = (&p.data()[i * k..(i + 1) * k], &dy.data()[i * k..(i + 1) * k]);
                let dot: f64 = pr.iter().zip(gr).map(|(a, b)| a * b).sum();
                for j in 0..k {
                    dz[i * k + j] = pr[j] * (gr[j] - dot);
                }
            }
            Ok(vec![Tensor::new(&[b, k], dz)?])
        },
    )
}

fn cross_entropy_probe(s: u64) -> Result<Probe> {
    let mut rng = case_rng(s, "cross_entropy");
    let z = uniform(&mut rng, &[4, 3], -2.0, 2.0)?;
    let labels: Vec<usize> = (0..4).map(|_| rng.gen_range(0..3)).collect();
    let onehot: Tensor<f64> = ops::one_hot(&labels, 3)?;
    let weights: Vec<f64> = (0..3).map(|_| rng.gen_range(0.2..3.0)).collect();
    let (oh2, w2) = (onehot.clone(), weights.clone());
    probe(
        vec![z],
        &["logits"],
        &mut rng,
        move |t| Tensor::scalar(ops::softmax_cross_entropy(&t[0], &onehot, &weights)?.loss).reshape(&[1]),
        move |t, dy| {
            let out = ops::softmax_cross_entropy(&t[0], &oh2, &w2)?;
            Ok(vec![ops::softmax_cross_entropy_backward(&out.probs, &out.targets, &w2, dy.data()[0])?])
        },
    )
}

/// Differentiates a block with respect to its input and every trainable
/// parameter, in train mode. Gamma and beta are randomized so that the
/// batch-norm affine terms are exercised away from their initial values.
fn block_probe<B: Block<f64> + 'static>(
    s: u64,
    tag: &str,
    build: impl FnOnce(&mut Builder) -> B,
    input_shape: &[usize],
) -> Result<Probe> {
    let mut rng = case_rng(s, tag);
    let mut b = Builder::new();
    let block = build(&mut b);
    let specs = b.into_specs();
    let mut base: ParamStore<f64> = init_store(&specs, seed::derive(s, tag, &[1]))?;
    let trainable: Vec<usize> = (0..specs.len()).filter(|&i| specs[i].trainable).collect();
    for id in base.ids().collect::<Vec<_>>() {
        let name = String::from(base.name(id));
        let shape = base.value(id).shape().to_vec();
        if name.ends_with("bn.gamma") {
            base.set(id, uniform(&mut rng, &shape, 0.5, 1.5)?)?;
        } else if name.ends_with("bn.beta") || name.ends_with(".bias") {
            base.set(id, uniform(&mut rng, &shape, -0.5, 0.5)?)?;
        }
    }
    let mut inputs = vec![uniform(&mut rng, input_shape, -1.0, 1.0)?];
    let mut names = vec![String::from("input")];
    let ids: Vec<_> = base.ids().collect();
    for &i in &trainable {
        inputs.push(base.value(ids[i]).clone());
        names.push(String::from(base.name(ids[i])));
    }
    let block = alloc::rc::Rc::new(block);
    let base = alloc::rc::Rc::new(base);
    let with = {
        let (base, trainable, ids) = (base.clone(), trainable.clone(), ids.clone());
        move |t: &[Tensor<f64>]| -> Result<ParamStore<f64>> {
            let mut store = (*base).clone();
            for (k, &i) in trainable.iter().enumerate() {
                store.set(ids[i], t[k + 1].clone())?;
            }
            Ok(store)
        }
    };
    let with2 = with.clone();
    let block2 = block.clone();
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    probe(
        inputs,
        &name_refs,
        &mut rng,
        move |t| {
            let store = with(t)?;
            let mut ctx = Ctx::new(&store, Mode::Train, 0.99, 1e-3);
            Ok(block.forward(&mut ctx, &t[0])?.0)
        },
        move |t, dy| {
            let mut store = with2(t)?;
            let (_, cache) = {
                let mut ctx = Ctx::new(&store, Mode::Train, 0.99, 1e-3);
                block2.forward(&mut ctx, &t[0])?
            };
            store.zero_grads();
            let dx = block2.backward(&mut store, cache, dy)?;
            let mut grads = vec![dx];
            for &i in &trainable {
                grads.push(store.grad(ids[i]).clone());
            }
            Ok(grads)
        },
    )
}

/// Every operator and block case of the certification suite.
pub fn grad_cases() -> Vec<GradCase> {
    let op = |name, linear, kinked, make| GradCase { name, linear, kinked, per_tensor: 0, make };
    let block = |name, make| GradCase { name, linear: false, kinked: true, per_tensor: 6, make };
    vec![
        op("op.conv2d.3x3.s1.same", true, false, |s| conv_probe(s, 3, 1, Padding::Same)),
        op("op.conv2d.3x3.s2.same", true, false, |s| conv_probe(s, 3, 2, Padding::Same)),
        op("op.conv2d.1x1.s2.same", true, false, |s| conv_probe(s, 1, 2, Padding::Same)),
        op("op.conv2d.3x3.s1.valid", true, false, |s| conv_probe(s, 3, 1, Padding::Valid)),
        op("op.depthwise_conv2d", true, false, depthwise_probe),
        op("op.depthwise_separable_conv", true, false, separable_probe),
        op("op.dense", true, false, dense_probe),
        op("op.add", true, false, add_probe),
        op("op.concat_channels", true, false, concat_probe),
        op("op.split_channels", true, false, split_probe),
        op("op.global_avg_pool", true, false, gap_probe),
        op("op.relu", false, true, relu_probe),
        op("op.maxpool2d", false, true, maxpool_probe),
        op("op.batch_norm.train", false, false, |s| batch_norm_probe(s, Mode::Train)),
        op("op.batch_norm.infer", false, false, |s| batch_norm_probe(s, Mode::Infer)),
        op("op.softmax", false, false, softmax_probe),
        op("op.softmax_cross_entropy", false, false, cross_entropy_probe),
        block("block.conv_bn", |s| block_probe(s, "conv_bn", |b| ConvBn::new(b, "c", 3, 4, 3, 2, true), &[2, 6, 6, 3])),
        block("block.sep_conv_bn", |s| block_probe(s, "sep_conv_bn", |b| SepConvBn::new(b, "s", 3, 4, true), &[2, 4, 4, 3])),
        block("block.dense", |s| block_probe(s, "dense", |b| DenseLayer::new(b, "d", 5, 4, true), &[3, 5])),
        block("block.res_stem", |s| block_probe(s, "res_stem", |b| ResStem::new(b, 3, 4), &[2, 8, 8, 3])),
        block("block.identity", |s| block_probe(s, "identity", |b| IdentityBlock::new(b, 4, 2), &[2, 4, 4, 4])),
        block("block.conv_block.s1", |s| block_probe(s, "conv_block1", |b| ConvBlock::new(b, 3, 4, 2, 1), &[2, 4, 4, 3])),
        block("block.conv_block.s2", |s| block_probe(s, "conv_block2", |b| ConvBlock::new(b, 3, 4, 2, 2), &[2, 4, 4, 3])),
        block("block.flow_stem", |s| block_probe(s, "flow_stem", |b| FlowStem::new(b, 3, 2, 4), &[2, 6, 6, 3])),
        block("block.entry", |s| block_probe(s, "entry", |b| EntryUnit::new(b, 3, 4), &[2, 4, 4, 3])),
        block("block.middle", |s| block_probe(s, "middle", |b| MiddleUnit::new(b, 3), &[2, 3, 3, 3])),
        block("block.exit", |s| block_probe(s, "exit", |b| ExitFlow::new(b, 3, 4, 5), &[2, 4, 4, 3])),
        block("block.fcl_head", |s| {
            block_probe(s, "fcl_head", |b| FclHead::new(b, 4, &[5, 3], 3).expect("valid head"), &[2, 2, 2, 4])
        }),
    ]
}

/// Multi-head training loss of a small model, differentiated with respect to
/// every trainable parameter.
pub fn model_probe(s: u64) -> Result<Probe> {
    let mut rng = case_rng(s, "model");
    let config = ModelConfig::scaled(32, 32, 2, Width::new(1, 16)?);
    let arch = Architecture::new(&config)?;
    let base: ParamStore<f64> = arch.init_params(seed::derive(s, "model", &[1]))?;
    let ids: Vec<_> = base.ids().filter(|&i| base.is_trainable(i)).collect();
    let inputs: Vec<Tensor<f64>> = ids.iter().map(|&i| base.value(i).clone()).collect();
    let names: Vec<String> = ids.iter().map(|&i| String::from(base.name(i))).collect();
    let x = uniform(&mut rng, &config.input_shape(2), 0.0, 1.0)?;
    let labels: Tensor<f64> = ops::one_hot(&[0, 1], 2)?;
    let weights = vec![0.7, 1.9];
    let build = {
        let (arch, base, ids) = (arch.clone(), base.clone(), ids.clone());
        move |t: &[Tensor<f64>]| -> Result<Model<f64>> {
            let mut store = base.clone();
            for (k, &i) in ids.iter().enumerate() {
                store.set(i, t[k].clone())?;
            }
            Model::from_parts(arch.clone(), store)
        }
    };
    let build2 = build.clone();
    let (x2, labels2, weights2) = (x.clone(), labels.clone(), weights.clone());
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    probe(
        inputs,
        &name_refs,
        &mut rng,
        move |t| {
            let model = build(t)?;
            let out = model.forward(&x, Mode::Train)?;
            Tensor::new(&[1], vec![model.loss(&out, &labels, &weights)?.total])
        },
        move |t, dy| {
            let mut model = build2(t)?;
            model.loss_and_backward(&x2, &labels2, &weights2)?;
            let r = dy.data()[0];
            Ok(ids.iter().map(|&i| model.params().grad(i).map(|g| g * r)).collect())
        },
    )
}

/// Relative error with a denominator floor.
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

struct Outcome {
    max_rel: f64,
    checked: usize,
    skipped: usize,
    worst: String,
}

fn central(p: &Probe, x: &mut [Tensor<f64>], t: usize, i: usize, h: f64) -> Result<f64> {
    let orig = x[t].data()[i];
    x[t].data_mut()[i] = orig + h;
    let fp = p.objective(x);
    x[t].data_mut()[i] = orig - h;
    let fm = p.objective(x);
    x[t].data_mut()[i] = orig;
    Ok((fp? - fm?) / (2.0 * h))
}

/// Central differences on sampled coordinates of every input. For kinked
/// functions a coordinate whose estimate changes when the step is halved is
/// treated as straddling a kink and skipped.
struct Sampling {
    per_tensor: usize,
    max_tensors: Option<usize>,
    step: f64,
    /// `None` for smooth functions; otherwise the step-halving disagreement
    /// above which a coordinate is skipped.
    kink_tol: Option<f64>,
}

fn check_probe(p: &Probe, how: &Sampling, sample_seed: u64) -> Result<Outcome> {
    let Sampling { per_tensor, max_tensors, step, kink_tol } = *how;
    let analytic = p.analytic()?;
    let mut rng = seed::rng(sample_seed);
    let mut out = Outcome { max_rel: 0.0, checked: 0, skipped: 0, worst: String::new() };
    let tensor_ids: Vec<usize> = match max_tensors {
        Some(m) if m < p.inputs.len() => {
            let mut v = sample(&mut rng, p.inputs.len(), m).into_vec();
            v.sort_unstable();
            v
        }
        _ => (0..p.inputs.len()).collect(),
    };
    let mut x = p.inputs.clone();
    for t in tensor_ids {
        let n = x[t].len();
        let coords: Vec<usize> =
            if per_tensor == 0 || per_tensor >= n { (0..n).collect() } else { sample(&mut rng, n, per_tensor).into_vec() };
        for i in coords {
            let numeric = central(p, &mut x, t, i, step)?;
            if let Some(kt) = kink_tol {
                let half = central(p, &mut x, t, i, step / 2.0)?;
                if rel_error(numeric, half) > kt {
                    out.skipped += 1;
                    continue;
                }
            }
            let a = analytic[t].data()[i];
            let e = rel_error(a, numeric);
            out.checked += 1;
            if e > out.max_rel || out.worst.is_empty() {
                out.max_rel = out.max_rel.max(e);
                out.worst = format!("{}[{}]: analytic {:.6e}, numeric {:.6e}", p.input_names[t], i, a, numeric);
            }
        }
    }
    Ok(out)
}

fn run_case(name: &str, tol: f64, seeds: usize, make: &dyn Fn(u64) -> Result<Probe>, check: &dyn Fn(&Probe, u64) -> Result<Outcome>) -> CheckResult {
    let mut max_rel = 0.0f64;
    let mut detail = String::new();
    let (mut checked, mut skipped) = (0, 0);
    for s in 0..seeds as u64 {
        let outcome = make(s).and_then(|p| check(&p, seed::derive(s, "gradcheck.sample", &[])));
        match outcome {
            Ok(o) => {
                checked += o.checked;
                skipped += o.skipped;
                if o.max_rel > max_rel || detail.is_empty() {
                    max_rel = max_rel.max(o.max_rel);
                    detail = format!("seed {}: {}", s, o.worst);
                }
            }
            Err(e) => {
                return CheckResult {
                    name: name.into(),
                    passed: false,
                    max_error: f64::INFINITY,
                    tolerance: tol,
                    seeds,
                    detail: format!("seed {}: {}", s, e),
                }
            }
        }
    }
    let passed = max_rel < tol && checked > 0 && skipped * 10 <= checked;
    CheckResult {
        name: name.into(),
        passed,
        max_error: max_rel,
        tolerance: tol,
        seeds,
        detail: format!("{} coordinates, {} skipped at kinks; worst {}", checked, skipped, detail),
    }
}

/// Certifies one case over `seeds` random points.
pub fn check_case(case: &GradCase, seeds: usize) -> CheckResult {
    let how = Sampling {
        per_tensor: case.per_tensor,
        max_tensors: None,
        step: STEP,
        kink_tol: if case.kinked { Some(1e-6) } else { None },
    };
    run_case(case.name, case.tolerance(), seeds, &|s| (case.make)(s), &|p, s| check_probe(p, &how, s))
}

/// Every operator and block case, plus the end-to-end model loss on
/// `model_seeds` points (three coordinates in each of twelve sampled tensors).
/// Batch norm over the tiny deep feature maps of the test model is strongly
/// curved, so the model check uses a smaller step.
pub fn gradcheck_suite(seeds: usize, model_seeds: usize) -> Vec<CheckResult> {
    let mut results: Vec<CheckResult> = grad_cases().iter().map(|c| check_case(c, seeds)).collect();
    if model_seeds > 0 {
        let how = Sampling { per_tensor: 3, max_tensors: Some(12), step: 1e-7, kink_tol: Some(1e-4) };
        results.push(run_case("model.loss", MODEL_TOL, model_seeds, &model_probe, &|p, s| check_probe(p, &how, s)));
    }
    results
}

/// Full-scale tap shapes, checked by shape propagation alone.
pub fn shapes_suite() -> Vec<CheckResult> {
    let expected: [(&str, [usize; 4]); 6] = [
        ("E13", [1, 28, 28, 512]),
        ("E14", [1, 14, 14, 1024]),
        ("E15++E25", [1, 7, 7, 4096]),
        ("E23", [1, 28, 28, 512]),
        ("E24", [1, 14, 14, 1024]),
        ("E25", [1, 7, 7, 2048]),
    ];
    let plan = Architecture::new(&ModelConfig::full_scale(3)).and_then(|a| a.plan(1));
    expected
        .iter()
        .map(|&(name, want)| {
            let got = match &plan {
                Ok(p) if name == "E15++E25" => Some(p.concat),
                Ok(p) => p.tap(name),
                Err(_) => None,
            };
            let passed = got == Some(want);
            CheckResult {
                name: format!("shape.{}", name),
                passed,
                max_error: if passed { 0.0 } else { 1.0 },
                tolerance: 0.0,
                seeds: 0,
                detail: match (&plan, got) {
                    (Err(e), _) => format!("{}", e),
                    (_, got) => format!("expected {:?}, got {:?}", want, got),
                },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_pass() {
        assert!(shapes_suite().iter().all(|r| r.passed));
    }

    #[test]
    fn every_case_passes_a_few_seeds() {
        for case in grad_cases() {
            let r = check_case(&case, 2);
            assert!(r.passed, "{}: {} ({})", r.name, r.max_error, r.detail);
        }
    }

    #[test]
    fn broken_gradient_is_caught() {
        let case = GradCase {
            name: "broken",
            linear: true,
            kinked: false,
            per_tensor: 0,
            make: |s| {
                let mut rng = case_rng(s, "broken");
                let x = uniform(&mut rng, &[4], -1.0, 1.0)?;
                probe(vec![x], &["x"], &mut rng, |t| Ok(t[0].map(|v| 2.0 * v)), |_, dy| Ok(vec![dy.clone()]))
            },
        };
        assert!(!check_case(&case, 2).passed);
    }
}
