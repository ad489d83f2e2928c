use alloc::vec::Vec;

use super::layers::{merge, ConvBn, ConvBnCache, SepConvBn, SepConvBnCache};
use super::{expect_channels, Block, Builder, Ctx, Shaped};
use crate::ops::{add, maxpool2d_backward, maxpool2d_indexed, relu, relu_backward, ConvSpec};
use crate::{ParamStore, Result, Scalar, Tensor};

fn dims<T: Scalar>(t: &Tensor<T>) -> [usize; 4] {
    let s = t.shape();
    [s[0], s[1], s[2], s[3]]
}

fn halved(input: [usize; 4], channels: usize) -> Result<[usize; 4]> {
    let (h, w) = ConvSpec::same(3, 2).output_hw(input[1], input[2])?;
    Ok([input[0], h, w, channels])
}

/// `3×3/2` convolution then `3×3/1` convolution, both with batch norm and ReLU.
#[derive(Debug, Clone)]
pub struct FlowStem {
    pub a: ConvBn,
    pub b: ConvBn,
}

#[derive(Debug, Clone)]
pub struct FlowStemCache<T> {
    a: ConvBnCache<T>,
    b: ConvBnCache<T>,
}

impl FlowStem {
    pub fn new(b: &mut Builder, in_channels: usize, w1: usize, w2: usize) -> Self {
        FlowStem {
            a: ConvBn::new(b, "conv1", in_channels, w1, 3, 2, true),
            b: ConvBn::new(b, "conv2", w1, w2, 3, 1, true),
        }
    }
}

impl<T: Scalar> Block<T> for FlowStem {
    type Cache = FlowStemCache<T>;

    fn forward(&self, ctx: &mut Ctx<'_, T>, x: &Tensor<T>) -> Result<(Tensor<T>, Self::Cache)> {
        let (y, a) = self.a.forward(ctx, x)?;
        let (y, b) = self.b.forward(ctx, &y)?;
        Ok((y, FlowStemCache { a, b }))
    }

    fn backward(&self, store: &mut ParamStore<T>, cache: Self::Cache, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let d = self.b.backward(store, cache.b, dy)?;
        self.a.backward(store, cache.a, &d)
    }
}

impl Shaped for FlowStem {
    fn output_shape(&self, input: [usize; 4]) -> Result<[usize; 4]> {
        self.b.output_shape(self.a.output_shape(input)?)
    }
}

/// Separable convolutions plus a strided max pool on the main path, a
/// strided 1×1 projection on the skip path; output `ReLU(main + skip)`.
#[derive(Debug, Clone)]
pub struct EntryUnit {
    pub sep1: SepConvBn,
    pub sep2: SepConvBn,
    pub skip: ConvBn,
}

#[derive(Debug, Clone)]
pub struct EntryCache<T> {
    sep1: SepConvBnCache<T>,
    sep2: SepConvBnCache<T>,
    pool_in: [usize; 4],
    argmax: Vec<usize>,
    skip: ConvBnCache<T>,
    out: Tensor<T>,
}

impl EntryUnit {
    pub fn new(b: &mut Builder, cin: usize, cout: usize) -> Self {
        EntryUnit {
            sep1: SepConvBn::new(b, "sep1", cin, cout, true),
            sep2: SepConvBn::new(b, "sep2", cout, cout, false),
            skip: ConvBn::new(b, "skip", cin, cout, 1, 2, false),
        }
    }
}

impl<T: Scalar> Block<T> for EntryUnit {
    type Cache = EntryCache<T>;

    fn forward(&self, ctx: &mut Ctx<'_, T>, x: &Tensor<T>) -> Result<(Tensor<T>, Self::Cache)> {
        let (y, sep1) = self.sep1.forward(ctx, x)?;
        let (y, sep2) = self.sep2.forward(ctx, &y)?;
        let pool_in = dims(&y);
        let pool = maxpool2d_indexed(&y, 3, 3, 2)?;
        let (s, skip) = self.skip.forward(ctx, x)?;
        let out = relu(&add(&pool.output, &s)?);
        Ok((out.clone(), EntryCache { sep1, sep2, pool_in, argmax: pool.argmax, skip, out }))
    }

    fn backward(&self, store: &mut ParamStore<T>, cache: Self::Cache, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let ds = relu_backward(&cache.out, dy)?;
        let d = maxpool2d_backward(&cache.pool_in, &cache.argmax, &ds)?;
        let d = self.sep2.backward(store, cache.sep2, &d)?;
        let d = self.sep1.backward(store, cache.sep1, &d)?;
        let dskip = self.skip.backward(store, cache.skip, &ds)?;
        merge(d, &dskip)
    }
}

impl Shaped for EntryUnit {
    fn output_shape(&self, input: [usize; 4]) -> Result<[usize; 4]> {
        let s = self.sep2.output_shape(self.sep1.output_shape(input)?)?;
        let skip = self.skip.output_shape(input)?;
        let main = halved(s, s[3])?;
        debug_assert_eq!(main, skip);
        Ok(main)
    }
}

/// Three separable convolutions with an identity skip; output `ReLU(x + F(x))`.
#[derive(Debug, Clone)]
pub struct MiddleUnit {
    pub sep: [SepConvBn; 3],
}

#[derive(Debug, Clone)]
pub struct MiddleCache<T> {
    sep: [SepConvBnCache<T>; 3],
    out: Tensor<T>,
}

impl MiddleUnit {
    pub fn new(b: &mut Builder, channels: usize) -> Self {
        MiddleUnit {
            sep: [
                SepConvBn::new(b, "sep1", channels, channels, true),
                SepConvBn::new(b, "sep2", channels, channels, true),
                SepConvBn::new(b, "sep3", channels, channels, false),
            ],
        }
    }
}

impl<T: Scalar> Block<T> for MiddleUnit {
    type Cache = MiddleCache<T>;

    fn forward(&self, ctx: &mut Ctx<'_, T>, x: &Tensor<T>) -> Result<(Tensor<T>, Self::Cache)> {
        let (y1, c1) = self.sep[0].forward(ctx, x)?;
        let (y2, c2) = self.sep[1].forward(ctx, &y1)?;
        let (y3, c3) = self.sep[2].forward(ctx, &y2)?;
        let out = relu(&add(x, &y3)?);
        Ok((out.clone(), MiddleCache { sep: [c1, c2, c3], out }))
    }

    fn backward(&self, store: &mut ParamStore<T>, cache: Self::Cache, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let ds = relu_backward(&cache.out, dy)?;
        let [c1, c2, c3] = cache.sep;
        let d = self.sep[2].backward(store, c3, &ds)?;
        let d = self.sep[1].backward(store, c2, &d)?;
        let d = self.sep[0].backward(store, c1, &d)?;
        merge(d, &ds)
    }
}

impl Shaped for MiddleUnit {
    fn output_shape(&self, input: [usize; 4]) -> Result<[usize; 4]> {
        expect_channels("middle_unit", input, self.sep[0].in_channels)?;
        Ok(input)
    }
}

/// A width-preserving downsampling unit followed by two widening separable
/// convolutions with ReLU.
#[derive(Debug, Clone)]
pub struct ExitFlow {
    pub down: EntryUnit,
    pub widen1: SepConvBn,
    pub widen2: SepConvBn,
}

#[derive(Debug, Clone)]
pub struct ExitCache<T> {
    down: EntryCache<T>,
    widen1: SepConvBnCache<T>,
    widen2: SepConvBnCache<T>,
}

impl ExitFlow {
    pub fn new(b: &mut Builder, cin: usize, mid: usize, cout: usize) -> Self {
        ExitFlow {
            down: EntryUnit::new(b, cin, cin),
            widen1: SepConvBn::new(b, "sep3", cin, mid, true),
            widen2: SepConvBn::new(b, "sep4", mid, cout, true),
        }
    }
}

impl<T: Scalar> Block<T> for ExitFlow {
    type Cache = ExitCache<T>;

    fn forward(&self, ctx: &mut Ctx<'_, T>, x: &Tensor<T>) -> Result<(Tensor<T>, Self::Cache)> {
        let (y, down) = self.down.forward(ctx, x)?;
        let (y, widen1) = self.widen1.forward(ctx, &y)?;
        let (y, widen2) = self.widen2.forward(ctx, &y)?;
        Ok((y, ExitCache { down, widen1, widen2 }))
    }

    fn backward(&self, store: &mut ParamStore<T>, cache: Self::Cache, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let d = self.widen2.backward(store, cache.widen2, dy)?;
        let d = self.widen1.backward(store, cache.widen1, &d)?;
        self.down.backward(store, cache.down, &d)
    }
}

impl Shaped for ExitFlow {
    fn output_shape(&self, input: [usize; 4]) -> Result<[usize; 4]> {
        let s = self.down.output_shape(input)?;
        self.widen2.output_shape(self.widen1.output_shape(s)?)
    }
}
