use super::{expect_channels, Block, Builder, Ctx, Init, Shaped, StatUpdate};
use crate::ops::{
    batch_norm, batch_norm_backward, conv2d, conv2d_backward, dense, dense_backward, depthwise_conv2d,
    depthwise_conv2d_backward, relu, relu_backward, BatchNormCache, ConvSpec,
};
use crate::params::ParamId;
use crate::{ParamStore, Result, Scalar, Tensor};

/// Batch-norm parameters: trainable gamma/beta, non-trainable running stats.
#[derive(Debug, Clone, Copy)]
pub struct BnLayer {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub mean: ParamId,
    pub var: ParamId,
    pub channels: usize,
}

impl BnLayer {
    pub fn new(b: &mut Builder, channels: usize) -> Self {
        BnLayer {
            gamma: b.param("bn.gamma", &[channels], Init::Ones, true),
            beta: b.param("bn.beta", &[channels], Init::Zeros, true),
            mean: b.param("bn.running_mean", &[channels], Init::Zeros, false),
            var: b.param("bn.running_var", &[channels], Init::Ones, false),
            channels,
        }
    }

    fn forward<T: Scalar>(&self, ctx: &mut Ctx<'_, T>, z: &Tensor<T>) -> Result<(Tensor<T>, BatchNormCache<T>)> {
        let p = ctx.params;
        let out = batch_norm(
            z,
            p.value(self.gamma),
            p.value(self.beta),
            p.value(self.mean),
            p.value(self.var),
            ctx.mode,
            ctx.bn_momentum,
            ctx.bn_epsilon,
        )?;
        if let Some((new_mean, new_var)) = out.running {
            ctx.updates.push(StatUpdate { mean: self.mean, var: self.var, new_mean, new_var });
        }
        Ok((out.output, out.cache))
    }

    fn backward<T: Scalar>(&self, store: &mut ParamStore<T>, cache: &BatchNormCache<T>, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let g = batch_norm_backward(cache, store.value(self.gamma), dy)?;
        store.accumulate(self.gamma, &g.gamma)?;
        store.accumulate(self.beta, &g.beta)?;
        Ok(g.input)
    }
}

/// Optional trailing ReLU; keeps the activated output for the backward mask.
fn activate<T: Scalar>(y: Tensor<T>, on: bool) -> (Tensor<T>, Option<Tensor<T>>) {
    if on {
        let a = relu(&y);
        (a.clone(), Some(a))
    } else {
        (y, None)
    }
}

fn deactivate<T: Scalar>(out: &Option<Tensor<T>>, dy: &Tensor<T>) -> Result<Tensor<T>> {
    match out {
        Some(a) => relu_backward(a, dy),
        None => Ok(dy.clone()),
    }
}

/// Bias-free convolution, batch norm, optional ReLU.
#[derive(Debug, Clone)]
pub struct ConvBn {
    pub weight: ParamId,
    pub bn: BnLayer,
    pub spec: ConvSpec,
    pub in_channels: usize,
    pub out_channels: usize,
    pub relu: bool,
}

#[derive(Debug, Clone)]
pub struct ConvBnCache<T> {
    input: Tensor<T>,
    bn: BatchNormCache<T>,
    out: Option<Tensor<T>>,
}

impl ConvBn {
    pub fn new(b: &mut Builder, name: &str, cin: usize, cout: usize, kernel: usize, stride: usize, relu: bool) -> Self {
        b.scope(name, |b| ConvBn {
            weight: b.param("weight", &[kernel, kernel, cin, cout], Init::He { fan_in: kernel * kernel * cin }, true),
            bn: BnLayer::new(b, cout),
            spec: ConvSpec::same(kernel, stride),
            in_channels: cin,
            out_channels: cout,
            relu,
        })
    }
}

impl<T: Scalar> Block<T> for ConvBn {
    type Cache = ConvBnCache<T>;

    fn forward(&self, ctx: &mut Ctx<'_, T>, x: &Tensor<T>) -> Result<(Tensor<T>, Self::Cache)> {
        let z = conv2d(x, ctx.params.value(self.weight), None, &self.spec)?;
        let (y, bn) = self.bn.forward(ctx, &z)?;
        let (y, out) = activate(y, self.relu);
        Ok((y, ConvBnCache { input: x.clone(), bn, out }))
    }

    fn backward(&self, store: &mut ParamStore<T>, cache: Self::Cache, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let dy = deactivate(&cache.out, dy)?;
        let dz = self.bn.backward(store, &cache.bn, &dy)?;
        let g = conv2d_backward(&cache.input, store.value(self.weight), &self.spec, &dz)?;
        store.accumulate(self.weight, &g.weights)?;
        Ok(g.input)
    }
}

impl Shaped for ConvBn {
    fn output_shape(&self, input: [usize; 4]) -> Result<[usize; 4]> {
        expect_channels("conv_bn", input, self.in_channels)?;
        let (h, w) = self.spec.output_hw(input[1], input[2])?;
        Ok([input[0], h, w, self.out_channels])
    }
}

/// 3×3 depthwise + 1×1 pointwise convolution (both bias-free), batch norm,
/// optional ReLU. Always stride 1.
#[derive(Debug, Clone)]
pub struct SepConvBn {
    pub depthwise: ParamId,
    pub pointwise: ParamId,
    pub bn: BnLayer,
    pub in_channels: usize,
    pub out_channels: usize,
    pub relu: bool,
}

#[derive(Debug, Clone)]
pub struct SepConvBnCache<T> {
    input: Tensor<T>,
    mid: Tensor<T>,
    bn: BatchNormCache<T>,
    out: Option<Tensor<T>>,
}

impl SepConvBn {
    pub fn new(b: &mut Builder, name: &str, cin: usize, cout: usize, relu: bool) -> Self {
        b.scope(name, |b| SepConvBn {
            depthwise: b.param("depthwise", &[3, 3, cin, 1], Init::He { fan_in: 9 }, true),
            pointwise: b.param("pointwise", &[1, 1, cin, cout], Init::He { fan_in: cin }, true),
            bn: BnLayer::new(b, cout),
            in_channels: cin,
            out_channels: cout,
            relu,
        })
    }

    fn dw_spec(&self) -> ConvSpec {
        ConvSpec::depthwise(3, 1, self.in_channels)
    }
}

impl<T: Scalar> Block<T> for SepConvBn {
    type Cache = SepConvBnCache<T>;

    fn forward(&self, ctx: &mut Ctx<'_, T>, x: &Tensor<T>) -> Result<(Tensor<T>, Self::Cache)> {
        let mid = depthwise_conv2d(x, ctx.params.value(self.depthwise), None, &self.dw_spec())?;
        let z = conv2d(&mid, ctx.params.value(self.pointwise), None, &ConvSpec::same(1, 1))?;
        let (y, bn) = self.bn.forward(ctx, &z)?;
        let (y, out) = activate(y, self.relu);
        Ok((y, SepConvBnCache { input: x.clone(), mid, bn, out }))
    }

    fn backward(&self, store: &mut ParamStore<T>, cache: Self::Cache, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let dy = deactivate(&cache.out, dy)?;
        let dz = self.bn.backward(store, &cache.bn, &dy)?;
        let pw = conv2d_backward(&cache.mid, store.value(self.pointwise), &ConvSpec::same(1, 1), &dz)?;
        store.accumulate(self.pointwise, &pw.weights)?;
        let dw = depthwise_conv2d_backward(&cache.input, store.value(self.depthwise), &self.dw_spec(), &pw.input)?;
        store.accumulate(self.depthwise, &dw.weights)?;
        Ok(dw.input)
    }
}

impl Shaped for SepConvBn {
    fn output_shape(&self, input: [usize; 4]) -> Result<[usize; 4]> {
        expect_channels("sep_conv_bn", input, self.in_channels)?;
        Ok([input[0], input[1], input[2], self.out_channels])
    }
}

/// Fully connected layer with bias and optional ReLU, on B×C inputs.
#[derive(Debug, Clone)]
pub struct DenseLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_features: usize,
    pub out_features: usize,
    pub relu: bool,
}

#[derive(Debug, Clone)]
pub struct DenseCache<T> {
    input: Tensor<T>,
    out: Option<Tensor<T>>,
}

impl DenseLayer {
    pub fn new(b: &mut Builder, name: &str, cin: usize, cout: usize, relu: bool) -> Self {
        b.scope(name, |b| DenseLayer {
            weight: b.param("weight", &[cin, cout], Init::He { fan_in: cin }, true),
            bias: b.param("bias", &[cout], Init::Zeros, true),
            in_features: cin,
            out_features: cout,
            relu,
        })
    }

    pub fn num_params(&self) -> usize {
        self.in_features * self.out_features + self.out_features
    }
}

impl<T: Scalar> Block<T> for DenseLayer {
    type Cache = DenseCache<T>;

    fn forward(&self, ctx: &mut Ctx<'_, T>, x: &Tensor<T>) -> Result<(Tensor<T>, Self::Cache)> {
        let y = dense(x, ctx.params.value(self.weight), ctx.params.value(self.bias))?;
        let (y, out) = activate(y, self.relu);
        Ok((y, DenseCache { input: x.clone(), out }))
    }

    fn backward(&self, store: &mut ParamStore<T>, cache: Self::Cache, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let dy = deactivate(&cache.out, dy)?;
        let g = dense_backward(&cache.input, store.value(self.weight), &dy)?;
        store.accumulate(self.weight, &g.weights)?;
        store.accumulate(self.bias, &g.bias)?;
        Ok(g.input)
    }
}

/// Sums two cotangents flowing into the same tensor.
pub(crate) fn merge<T: Scalar>(mut a: Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    a.add_assign(b)?;
    Ok(a)
}
