//! Network building blocks.
//!
//! Blocks own only parameter ids and static geometry. A [`Builder`] records the
//! parameter specs while the architecture is assembled; the model then
//! materializes them into a [`ParamStore`] in the same order, so ids line up.
//! This keeps shape propagation and parameter counting allocation-free.
//!
//! Every block implements [`Block`]: a forward pass returning its output and a
//! cache, a backward pass consuming that cache and accumulating parameter
//! gradients, and pure shape propagation.

mod encoder;
mod flow;
mod head;
mod layers;
mod residual;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::ops::Mode;
use crate::params::ParamId;
use crate::{seed, Error, ParamStore, Result, Scalar, Tensor};

pub use encoder::{Encoder, EncoderCache, Stem, StemCache, Unit, UnitCache};
pub use flow::{EntryCache, EntryUnit, ExitCache, ExitFlow, FlowStem, FlowStemCache, MiddleCache, MiddleUnit};
pub use head::{FclHead, HeadCache};
pub use layers::{BnLayer, ConvBn, ConvBnCache, DenseCache, DenseLayer, SepConvBn, SepConvBnCache};
pub use residual::{ConvBlock, ConvBlockCache, IdentityBlock, IdentityCache, ResStem, ResStemCache};

/// Positive rational channel-width multiplier; 1/1 is full scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Width {
    pub num: u32,
    pub den: u32,
}

impl Width {
    pub const ONE: Width = Width { num: 1, den: 1 };

    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::Config(format!("width multiplier {}/{} must be positive", num, den)));
        }
        Ok(Width { num, den })
    }

    /// `round(channels · num / den)`, at least 1.
    pub fn scale(self, channels: usize) -> usize {
        let (n, d) = (self.num as usize, self.den as usize);
        ((channels * n + d / 2) / d).max(1)
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl core::fmt::Display for Width {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Stage plan of one encoder. Every stage opens with a downsampling unit and
/// continues with `repetitions[i] - 1` shape-preserving units.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockConfig {
    /// Unscaled stage output widths.
    pub stage_widths: Vec<usize>,
    pub repetitions: Vec<usize>,
    pub width: Width,
}

impl BlockConfig {
    /// Bottleneck residual encoder: widths (256, 512, 1024, 2048), repetitions (3, 4, 6, 3).
    pub fn residual(width: Width) -> Self {
        BlockConfig { stage_widths: alloc::vec![256, 512, 1024, 2048], repetitions: alloc::vec![3, 4, 6, 3], width }
    }

    /// Entry/middle/exit flow encoder: three entry units (128, 512, 1024),
    /// the third followed by eight middle units, then the exit flow to 2048.
    pub fn flow(width: Width) -> Self {
        BlockConfig { stage_widths: alloc::vec![128, 512, 1024, 2048], repetitions: alloc::vec![1, 1, 9, 1], width }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stage_widths.len() != self.repetitions.len() || self.stage_widths.is_empty() {
            return Err(Error::Config("stage widths and repetitions must be non-empty and equally long".into()));
        }
        if self.repetitions.contains(&0) {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.stage_widths.contains(&0) {
            return Err(Error::Config("stage widths must be positive".into()));
        }
        Ok(())
    }

    pub fn scaled_widths(&self) -> Vec<usize> {
        self.stage_widths.iter().map(|&w| self.width.scale(w)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Init {
    /// Uniform in `±sqrt(6 / fan_in)`.
    He { fan_in: usize },
    Zeros,
    Ones,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
    pub trainable: bool,
}

/// Records parameter specs under a hierarchical name prefix.
#[derive(Debug, Default)]
pub struct Builder {
    specs: Vec<ParamSpec>,
    path: Vec<String>,
}

impl Builder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn scope<R>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> R) -> R {
        self.path.push(name.into());
        let r = f(self);
        self.path.pop();
        r
    }

    pub fn param(&mut self, name: &str, shape: &[usize], init: Init, trainable: bool) -> ParamId {
        let mut full = self.path.join(".");
        if !full.is_empty() {
            full.push('.');
        }
        full.push_str(name);
        let id = ParamId::from_index(self.specs.len());
        self.specs.push(ParamSpec { name: full, shape: shape.to_vec(), init, trainable });
        id
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn into_specs(self) -> Vec<ParamSpec> {
        self.specs
    }
}

/// Materializes specs in order, so the returned store's ids match the
/// builder's. He-initialized tensors each draw from a stream keyed by
/// `(seed, name)`.
pub fn init_store<T: Scalar>(specs: &[ParamSpec], init_seed: u64) -> Result<ParamStore<T>> {
    let mut store = ParamStore::new();
    for spec in specs {
        let value = match spec.init {
            Init::Zeros => Tensor::zeros(&spec.shape)?,
            Init::Ones => Tensor::full(&spec.shape, T::one())?,
            Init::He { fan_in } => {
                let limit = num_traits::Float::sqrt(6.0 / fan_in as f64);
                let mut rng = seed::rng(seed::for_name(init_seed, &spec.name));
                Tensor::from_fn(&spec.shape, |_| T::from_f64(rng.gen_range(-limit..limit)))?
            }
        };
        store.add(&spec.name, value, spec.trainable)?;
    }
    Ok(store)
}

/// Running-statistic update produced by a train-mode batch-norm forward.
#[derive(Debug, Clone)]
pub struct StatUpdate<T> {
    pub mean: ParamId,
    pub var: ParamId,
    pub new_mean: Tensor<T>,
    pub new_var: Tensor<T>,
}

/// Forward-pass context: read-only parameters plus collected BN updates.
///
/// Forward passes never mutate parameters; train-mode running-statistic
/// updates are queued here and applied by the caller.
pub struct Ctx<'a, T> {
    pub params: &'a ParamStore<T>,
    pub mode: Mode,
    pub bn_momentum: T,
    pub bn_epsilon: T,
    pub updates: Vec<StatUpdate<T>>,
}

impl<'a, T: Scalar> Ctx<'a, T> {
    pub fn new(params: &'a ParamStore<T>, mode: Mode, bn_momentum: f64, bn_epsilon: f64) -> Self {
        Ctx {
            params,
            mode,
            bn_momentum: T::from_f64(bn_momentum),
            bn_epsilon: T::from_f64(bn_epsilon),
            updates: Vec::new(),
        }
    }
}

pub trait Block<T: Scalar> {
    type Cache;

    fn forward(&self, ctx: &mut Ctx<'_, T>, x: &Tensor<T>) -> Result<(Tensor<T>, Self::Cache)>;

    /// Accumulates parameter gradients into `store` and returns the input cotangent.
    fn backward(&self, store: &mut ParamStore<T>, cache: Self::Cache, dy: &Tensor<T>) -> Result<Tensor<T>>;
}

/// Pure B×H×W×C shape propagation.
pub trait Shaped {
    fn output_shape(&self, input: [usize; 4]) -> Result<[usize; 4]>;
}

pub(crate) fn expect_channels(op: &'static str, input: [usize; 4], channels: usize) -> Result<()> {
    if input[3] != channels {
        return Err(Error::shape(op, format!("expected {} channels, got {}", channels, input[3])));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn width_scaling() {
        let w = Width::new(1, 8).unwrap();
        assert_eq!(w.scale(64), 8);
        assert_eq!(w.scale(2048), 256);
        assert_eq!(w.scale(3), 1);
        assert_eq!(Width::ONE.scale(728), 728);
        assert!(Width::new(0, 1).is_err());
    }

    #[test]
    fn builder_names_are_hierarchical() {
        let mut b = Builder::new();
        b.scope("enc1", |b| b.scope("stem", |b| b.param("weight", &[7, 7, 3, 64], Init::He { fan_in: 147 }, true)));
        assert_eq!(b.specs()[0].name, "enc1.stem.weight");
    }

    #[test]
    fn block_config_validation() {
        assert!(BlockConfig::residual(Width::ONE).validate().is_ok());
        let mut c = BlockConfig::flow(Width::ONE);
        c.repetitions[0] = 0;
        assert!(c.validate().is_err());
    }
}
