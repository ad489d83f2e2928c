use alloc::vec::Vec;

use rand::Rng as _;

use super::MemorySource;
use crate::{seed, Error, Result, Scalar, Tensor};

/// Separable toy images: class `c` of `k` has mean brightness `(c+1)/(k+1)`
/// with independent uniform pixel noise of half-width `noise`, replicated over
/// the channels. Labels cycle `0, 1, .., k-1`.
pub fn synthetic_images<T: Scalar>(
    n: usize,
    h: usize,
    w: usize,
    channels: usize,
    k: usize,
    noise: f64,
    base_seed: u64,
) -> Result<MemorySource<T>> {
    if k < 2 || n < k || h == 0 || w == 0 || channels == 0 {
        return Err(Error::invalid("synthetic_images", "need k >= 2, n >= k and non-empty images"));
    }
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % k;
        let mut rng = seed::derived_rng(base_seed, "synth", &[i as u64]);
        let base = (c + 1) as f64 / (k + 1) as f64;
        let mut data = Vec::with_capacity(h * w * channels);
        for _ in 0..h * w {
            let v = T::from_f64((base + rng.gen_range(-noise..=noise)).clamp(0.0, 1.0));
            data.extend(core::iter::repeat_n(v, channels));
        }
        images.push(Tensor::new(&[1, h, w, channels], data)?);
        labels.push(c);
    }
    Ok(MemorySource { images, labels, num_classes: k })
}
