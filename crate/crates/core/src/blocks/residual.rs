use alloc::format;

use super::layers::{merge, ConvBn, ConvBnCache};
use super::{expect_channels, Block, Builder, Ctx, Shaped};
use crate::ops::{add, maxpool2d_indexed, maxpool2d_backward, relu, relu_backward};
use crate::{Error, ParamStore, Result, Scalar, Tensor};

/// 7×7 stride-2 convolution with batch norm and ReLU, then 3×3 stride-2 max
/// pooling: M×N → M/4 × N/4.
#[derive(Debug, Clone)]
pub struct ResStem {
    pub conv: ConvBn,
}

#[derive(Debug, Clone)]
pub struct ResStemCache<T> {
    conv: ConvBnCache<T>,
    conv_shape: [usize; 4],
    argmax: alloc::vec::Vec<usize>,
}

impl ResStem {
    pub fn new(b: &mut Builder, in_channels: usize, width: usize) -> Self {
        ResStem { conv: ConvBn::new(b, "conv", in_channels, width, 7, 2, true) }
    }
}

impl<T: Scalar> Block<T> for ResStem {
    type Cache = ResStemCache<T>;

    fn forward(&self, ctx: &mut Ctx<'_, T>, x: &Tensor<T>) -> Result<(Tensor<T>, Self::Cache)> {
        let (c, conv) = self.conv.forward(ctx, x)?;
        let conv_shape = [c.shape()[0], c.shape()[1], c.shape()[2], c.shape()[3]];
        let pool = maxpool2d_indexed(&c, 3, 3, 2)?;
        Ok((pool.output, ResStemCache { conv, conv_shape, argmax: pool.argmax }))
    }

    fn backward(&self, store: &mut ParamStore<T>, cache: Self::Cache, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let dc = maxpool2d_backward(&cache.conv_shape, &cache.argmax, dy)?;
        self.conv.backward(store, cache.conv, &dc)
    }
}

impl Shaped for ResStem {
    fn output_shape(&self, input: [usize; 4]) -> Result<[usize; 4]> {
        let c = self.conv.output_shape(input)?;
        let (h, w) = crate::ops::ConvSpec::same(3, 2).output_hw(c[1], c[2])?;
        Ok([c[0], h, w, c[3]])
    }
}

/// Bottleneck `1×1 → 3×3 → 1×1` with batch norm; output `ReLU(x + F(x))`.
#[derive(Debug, Clone)]
pub struct IdentityBlock {
    pub a: ConvBn,
    pub b: ConvBn,
    pub c: ConvBn,
}

#[derive(Debug, Clone)]
pub struct IdentityCache<T> {
    a: ConvBnCache<T>,
    b: ConvBnCache<T>,
    c: ConvBnCache<T>,
    out: Tensor<T>,
}

impl IdentityBlock {
    pub fn new(b: &mut Builder, channels: usize, bottleneck: usize) -> Self {
        IdentityBlock {
            a: ConvBn::new(b, "conv1", channels, bottleneck, 1, 1, true),
            b: ConvBn::new(b, "conv2", bottleneck, bottleneck, 3, 1, true),
            c: ConvBn::new(b, "conv3", bottleneck, channels, 1, 1, false),
        }
    }
}

impl<T: Scalar> Block<T> for IdentityBlock {
    type Cache = IdentityCache<T>;

    fn forward(&self, ctx: &mut Ctx<'_, T>, x: &Tensor<T>) -> Result<(Tensor<T>, Self::Cache)> {
        let (_, _, _, c) = x.dims4("identity_block")?;
        if c != self.c.out_channels {
            return Err(Error::shape(
                "identity_block",
                format!("input has {} channels, block expects {}", c, self.c.out_channels),
            ));
        }
        let (ya, a) = self.a.forward(ctx, x)?;
        let (yb, b) = self.b.forward(ctx, &ya)?;
        let (yc, c) = self.c.forward(ctx, &yb)?;
        let out = relu(&add(x, &yc)?);
        Ok((out.clone(), IdentityCache { a, b, c, out }))
    }

    fn backward(&self, store: &mut ParamStore<T>, cache: Self::Cache, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let ds = relu_backward(&cache.out, dy)?;
        let d = self.c.backward(store, cache.c, &ds)?;
        let d = self.b.backward(store, cache.b, &d)?;
        let d = self.a.backward(store, cache.a, &d)?;
        merge(d, &ds)
    }
}

impl Shaped for IdentityBlock {
    fn output_shape(&self, input: [usize; 4]) -> Result<[usize; 4]> {
        expect_channels("identity_block", input, self.c.out_channels)?;
        Ok(input)
    }
}

/// Bottleneck with a strided first 1×1 convolution and a strided 1×1
/// projection on the skip path; output `ReLU(F(x) + P(x))`.
#[derive(Debug, Clone)]
pub struct ConvBlock {
    pub a: ConvBn,
    pub b: ConvBn,
    pub c: ConvBn,
    pub proj: ConvBn,
    pub stride: usize,
}

#[derive(Debug, Clone)]
pub struct ConvBlockCache<T> {
    a: ConvBnCache<T>,
    b: ConvBnCache<T>,
    c: ConvBnCache<T>,
    proj: ConvBnCache<T>,
    out: Tensor<T>,
}

impl ConvBlock {
    pub fn new(b: &mut Builder, cin: usize, cout: usize, bottleneck: usize, stride: usize) -> Self {
        ConvBlock {
            a: ConvBn::new(b, "conv1", cin, bottleneck, 1, stride, true),
            b: ConvBn::new(b, "conv2", bottleneck, bottleneck, 3, 1, true),
            c: ConvBn::new(b, "conv3", bottleneck, cout, 1, 1, false),
            proj: ConvBn::new(b, "proj", cin, cout, 1, stride, false),
            stride,
        }
    }

    fn check_extent(&self, h: usize, w: usize) -> Result<()> {
        if self.stride > 1 && (!h.is_multiple_of(self.stride) || !w.is_multiple_of(self.stride)) {
            return Err(Error::shape(
                "conv_block",
                format!("{}×{} input is not divisible by stride {}", h, w, self.stride),
            ));
        }
        Ok(())
    }
}

impl<T: Scalar> Block<T> for ConvBlock {
    type Cache = ConvBlockCache<T>;

    fn forward(&self, ctx: &mut Ctx<'_, T>, x: &Tensor<T>) -> Result<(Tensor<T>, Self::Cache)> {
        let (_, h, w, _) = x.dims4("conv_block")?;
        self.check_extent(h, w)?;
        let (ya, a) = self.a.forward(ctx, x)?;
        let (yb, b) = self.b.forward(ctx, &ya)?;
        let (yc, c) = self.c.forward(ctx, &yb)?;
        let (yp, proj) = self.proj.forward(ctx, x)?;
        let out = relu(&add(&yc, &yp)?);
        Ok((out.clone(), ConvBlockCache { a, b, c, proj, out }))
    }

    fn backward(&self, store: &mut ParamStore<T>, cache: Self::Cache, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let ds = relu_backward(&cache.out, dy)?;
        let d = self.c.backward(store, cache.c, &ds)?;
        let d = self.b.backward(store, cache.b, &d)?;
        let d = self.a.backward(store, cache.a, &d)?;
        let dp = self.proj.backward(store, cache.proj, &ds)?;
        merge(d, &dp)
    }
}

impl Shaped for ConvBlock {
    fn output_shape(&self, input: [usize; 4]) -> Result<[usize; 4]> {
        self.check_extent(input[1], input[2])?;
        let s = self.a.output_shape(input)?;
        let s = self.b.output_shape(s)?;
        self.c.output_shape(s)
    }
}
