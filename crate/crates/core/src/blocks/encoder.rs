use alloc::format;
use alloc::vec::Vec;

use super::flow::{EntryCache, ExitCache, FlowStemCache, MiddleCache};
use super::residual::{ConvBlockCache, IdentityCache, ResStemCache};
use super::{
    Block, BlockConfig, Builder, ConvBlock, Ctx, EntryUnit, ExitFlow, FlowStem, IdentityBlock, MiddleUnit, ResStem,
    Shaped,
};
use crate::{Error, ParamStore, Result, Scalar, Tensor};

#[derive(Debug, Clone)]
pub enum Stem {
    Residual(ResStem),
    Flow(FlowStem),
}

#[derive(Debug, Clone)]
pub enum StemCache<T> {
    Residual(ResStemCache<T>),
    Flow(FlowStemCache<T>),
}

impl<T: Scalar> Block<T> for Stem {
    type Cache = StemCache<T>;

    fn forward(&self, ctx: &mut Ctx<'_, T>, x: &Tensor<T>) -> Result<(Tensor<T>, Self::Cache)> {
        Ok(match self {
            Stem::Residual(s) => {
                let (y, c) = s.forward(ctx, x)?;
                (y, StemCache::Residual(c))
            }
            Stem::Flow(s) => {
                let (y, c) = s.forward(ctx, x)?;
                (y, StemCache::Flow(c))
            }
        })
    }

    fn backward(&self, store: &mut ParamStore<T>, cache: Self::Cache, dy: &Tensor<T>) -> Result<Tensor<T>> {
        match (self, cache) {
            (Stem::Residual(s), StemCache::Residual(c)) => s.backward(store, c, dy),
            (Stem::Flow(s), StemCache::Flow(c)) => s.backward(store, c, dy),
            _ => Err(Error::invalid("stem_backward", "cache does not belong to this stem")),
        }
    }
}

impl Shaped for Stem {
    fn output_shape(&self, input: [usize; 4]) -> Result<[usize; 4]> {
        match self {
            Stem::Residual(s) => s.output_shape(input),
            Stem::Flow(s) => s.output_shape(input),
        }
    }
}

impl Stem {
    /// Shape at half input resolution: the residual stem's convolution
    /// output before pooling, or the whole flow stem's output.
    pub fn conv_shape(&self, input: [usize; 4]) -> Result<[usize; 4]> {
        match self {
            Stem::Residual(s) => s.conv.output_shape(input),
            Stem::Flow(s) => s.output_shape(input),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Unit {
    Conv(ConvBlock),
    Identity(IdentityBlock),
    Entry(EntryUnit),
    Middle(MiddleUnit),
    Exit(ExitFlow),
}

#[derive(Debug, Clone)]
pub enum UnitCache<T> {
    Conv(ConvBlockCache<T>),
    Identity(IdentityCache<T>),
    Entry(EntryCache<T>),
    Middle(MiddleCache<T>),
    Exit(ExitCache<T>),
}

macro_rules! dispatch_forward {
    ($self:ident, $ctx:ident, $x:ident, $($v:ident),+) => {
        match $self {
            $(Unit::$v(u) => {
                let (y, c) = u.forward($ctx, $x)?;
                (y, UnitCache::$v(c))
            })+
        }
    };
}

impl<T: Scalar> Block<T> for Unit {
    type Cache = UnitCache<T>;

    fn forward(&self, ctx: &mut Ctx<'_, T>, x: &Tensor<T>) -> Result<(Tensor<T>, Self::Cache)> {
        Ok(dispatch_forward!(self, ctx, x, Conv, Identity, Entry, Middle, Exit))
    }

    fn backward(&self, store: &mut ParamStore<T>, cache: Self::Cache, dy: &Tensor<T>) -> Result<Tensor<T>> {
        match (self, cache) {
            (Unit::Conv(u), UnitCache::Conv(c)) => u.backward(store, c, dy),
            (Unit::Identity(u), UnitCache::Identity(c)) => u.backward(store, c, dy),
            (Unit::Entry(u), UnitCache::Entry(c)) => u.backward(store, c, dy),
            (Unit::Middle(u), UnitCache::Middle(c)) => u.backward(store, c, dy),
            (Unit::Exit(u), UnitCache::Exit(c)) => u.backward(store, c, dy),
            _ => Err(Error::invalid("unit_backward", "cache does not belong to this unit")),
        }
    }
}

impl Shaped for Unit {
    fn output_shape(&self, input: [usize; 4]) -> Result<[usize; 4]> {
        match self {
            Unit::Conv(u) => u.output_shape(input),
            Unit::Identity(u) => u.output_shape(input),
            Unit::Entry(u) => u.output_shape(input),
            Unit::Middle(u) => u.output_shape(input),
            Unit::Exit(u) => u.output_shape(input),
        }
    }
}

/// A stem followed by stages of units. Each stage's output is a tap.
#[derive(Debug, Clone)]
pub struct Encoder {
    pub stem: Stem,
    pub stages: Vec<Vec<Unit>>,
}

#[derive(Debug, Clone)]
pub struct EncoderCache<T> {
    stem: StemCache<T>,
    stages: Vec<Vec<UnitCache<T>>>,
}

impl Encoder {
    /// Bottleneck residual encoder. The first stage keeps resolution (the
    /// stem already pooled); later stages halve it in their conv block.
    pub fn residual(b: &mut Builder, cfg: &BlockConfig, in_channels: usize) -> Result<Self> {
        cfg.validate()?;
        let stem_width = cfg.width.scale(64);
        let stem = b.scope("stem", |b| ResStem::new(b, in_channels, stem_width));
        let widths = cfg.scaled_widths();
        let mut cin = stem_width;
        let mut stages = Vec::with_capacity(widths.len());
        for (k, (&cout, &reps)) in widths.iter().zip(&cfg.repetitions).enumerate() {
            let bottleneck = cfg.width.scale(cfg.stage_widths[k] / 4);
            let stride = if k == 0 { 1 } else { 2 };
            let units = b.scope(&format!("stage{}", k + 1), |b| {
                let mut units = Vec::with_capacity(reps);
                units.push(Unit::Conv(b.scope("block0", |b| ConvBlock::new(b, cin, cout, bottleneck, stride))));
                for j in 1..reps {
                    units.push(Unit::Identity(
                        b.scope(&format!("block{}", j), |b| IdentityBlock::new(b, cout, bottleneck)),
                    ));
                }
                units
            });
            stages.push(units);
            cin = cout;
        }
        Ok(Encoder { stem: Stem::Residual(stem), stages })
    }

    /// Separable-convolution encoder: entry units, with the remaining units
    /// of a stage being middle units; the last stage opens with the exit flow,
    /// whose intermediate widening is three quarters of its output width.
    pub fn flow(b: &mut Builder, cfg: &BlockConfig, in_channels: usize) -> Result<Self> {
        cfg.validate()?;
        let (w1, w2) = (cfg.width.scale(32), cfg.width.scale(64));
        let stem = b.scope("stem", |b| FlowStem::new(b, in_channels, w1, w2));
        let widths = cfg.scaled_widths();
        let last = widths.len() - 1;
        let mut cin = w2;
        let mut stages = Vec::with_capacity(widths.len());
        for (k, (&cout, &reps)) in widths.iter().zip(&cfg.repetitions).enumerate() {
            let units = b.scope(&format!("stage{}", k + 1), |b| {
                let mut units = Vec::with_capacity(reps);
                let first = b.scope("unit0", |b| {
                    if k == last {
                        let mid = cfg.width.scale(cfg.stage_widths[k] * 3 / 4);
                        Unit::Exit(ExitFlow::new(b, cin, mid, cout))
                    } else {
                        Unit::Entry(EntryUnit::new(b, cin, cout))
                    }
                });
                units.push(first);
                for j in 1..reps {
                    units.push(Unit::Middle(b.scope(&format!("unit{}", j), |b| MiddleUnit::new(b, cout))));
                }
                units
            });
            stages.push(units);
            cin = cout;
        }
        Ok(Encoder { stem: Stem::Flow(stem), stages })
    }

    /// Returns the output of every stage.
    pub fn forward<T: Scalar>(&self, ctx: &mut Ctx<'_, T>, x: &Tensor<T>) -> Result<(Vec<Tensor<T>>, EncoderCache<T>)> {
        let (mut y, stem) = self.stem.forward(ctx, x)?;
        let mut taps = Vec::with_capacity(self.stages.len());
        let mut stages = Vec::with_capacity(self.stages.len());
        for stage in &self.stages {
            let mut caches = Vec::with_capacity(stage.len());
            for unit in stage {
                let (next, c) = unit.forward(ctx, &y)?;
                caches.push(c);
                y = next;
            }
            taps.push(y.clone());
            stages.push(caches);
        }
        Ok((taps, EncoderCache { stem, stages }))
    }

    /// `tap_grads[k]` is the cotangent arriving at stage `k`'s output, if any.
    /// Stages above the deepest cotangent are skipped entirely.
    pub fn backward<T: Scalar>(
        &self,
        store: &mut ParamStore<T>,
        cache: EncoderCache<T>,
        tap_grads: Vec<Option<Tensor<T>>>,
    ) -> Result<Option<Tensor<T>>> {
        if tap_grads.len() != self.stages.len() {
            return Err(Error::invalid(
                "encoder_backward",
                format!("{} tap cotangents for {} stages", tap_grads.len(), self.stages.len()),
            ));
        }
        let mut d: Option<Tensor<T>> = None;
        for ((stage, caches), g) in self.stages.iter().zip(cache.stages).zip(tap_grads).rev() {
            d = match (d, g) {
                (Some(mut a), Some(b)) => {
                    a.add_assign(&b)?;
                    Some(a)
                }
                (a, b) => a.or(b),
            };
            if let Some(mut cur) = d.take() {
                for (unit, c) in stage.iter().zip(caches).rev() {
                    cur = unit.backward(store, c, &cur)?;
                }
                d = Some(cur);
            }
        }
        match d {
            Some(cur) => Ok(Some(self.stem.backward(store, cache.stem, &cur)?)),
            None => Ok(None),
        }
    }

    /// Output shape of every stage.
    pub fn stage_shapes(&self, input: [usize; 4]) -> Result<Vec<[usize; 4]>> {
        let mut s = self.stem.output_shape(input)?;
        let mut out = Vec::with_capacity(self.stages.len());
        for stage in &self.stages {
            for unit in stage {
                s = unit.output_shape(s)?;
            }
            out.push(s);
        }
        Ok(out)
    }
}
