use alloc::format;
use alloc::vec::Vec;

use super::layers::{DenseCache, DenseLayer};
use super::{expect_channels, Block, Builder, Ctx};
use crate::ops::{global_avg_pool, global_avg_pool_backward};
use crate::{Error, ParamStore, Result, Scalar, Tensor};

/// Global average pooling followed by fully connected layers; the hidden
/// layers use ReLU and the last one emits raw logits.
#[derive(Debug, Clone)]
pub struct FclHead {
    pub layers: Vec<DenseLayer>,
    pub in_channels: usize,
}

#[derive(Debug, Clone)]
pub struct HeadCache<T> {
    input_shape: [usize; 4],
    layers: Vec<DenseCache<T>>,
}

impl FclHead {
    pub fn new(b: &mut Builder, in_channels: usize, hidden: &[usize], classes: usize) -> Result<Self> {
        if classes < 2 {
            return Err(Error::Config(format!("a head needs at least 2 classes, got {}", classes)));
        }
        if hidden.contains(&0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut cin = in_channels;
        for (i, &h) in hidden.iter().enumerate() {
            layers.push(DenseLayer::new(b, &format!("fc{}", i), cin, h, true));
            cin = h;
        }
        layers.push(DenseLayer::new(b, &format!("fc{}", hidden.len()), cin, classes, false));
        Ok(FclHead { layers, in_channels })
    }

    pub fn classes(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_features)
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(DenseLayer::num_params).sum()
    }

    pub fn output_shape(&self, input: [usize; 4]) -> Result<[usize; 2]> {
        expect_channels("fcl_head", input, self.in_channels)?;
        Ok([input[0], self.classes()])
    }
}

impl<T: Scalar> Block<T> for FclHead {
    type Cache = HeadCache<T>;

    fn forward(&self, ctx: &mut Ctx<'_, T>, x: &Tensor<T>) -> Result<(Tensor<T>, Self::Cache)> {
        let (b, h, w, c) = x.dims4("fcl_head")?;
        let mut y = global_avg_pool(x)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (next, cache) = layer.forward(ctx, &y)?;
            caches.push(cache);
            y = next;
        }
        Ok((y, HeadCache { input_shape: [b, h, w, c], layers: caches }))
    }

    fn backward(&self, store: &mut ParamStore<T>, cache: Self::Cache, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let mut d = dy.clone();
        for (layer, c) in self.layers.iter().zip(cache.layers).rev() {
            d = layer.backward(store, c, &d)?;
        }
        global_avg_pool_backward(&cache.input_shape, &d)
    }
}
