//! Batch normalization over the B×H×W axes of a B×H×W×C map (or B of a B×C
//! matrix). Variance is the biased (population) estimate in both modes.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::Mode;
use crate::check::finite;
use crate::{Error, Result, Scalar, Tensor};

#[derive(Debug, Clone)]
pub struct BatchNormCache<T> {
    pub mode: Mode,
    /// Normalized input (before gamma/beta).
    pub xhat: Tensor<T>,
    /// `1 / sqrt(var + eps)` per channel, with the variance of whichever
    /// statistics were used.
    pub inv_std: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct BatchNormOutput<T> {
    pub output: Tensor<T>,
    pub cache: BatchNormCache<T>,
    /// Updated running statistics in train mode; `None` in infer mode.
    pub running: Option<(Tensor<T>, Tensor<T>)>,
}

#[derive(Debug, Clone)]
pub struct BatchNormGrads<T> {
    pub input: Tensor<T>,
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
}

fn channels<T: Scalar>(input: &Tensor<T>) -> Result<usize> {
    match input.rank() {
        2 | 4 => Ok(*input.shape().last().unwrap()),
        _ => Err(Error::shape("batch_norm", format!("expected rank 2 or 4, got {:?}", input.shape()))),
    }
}

/// `running ← momentum·running + (1 − momentum)·batch` in train mode.
#[allow(clippy::too_many_arguments)]
pub fn batch_norm<T: Scalar>(
    input: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    running_mean: &Tensor<T>,
    running_var: &Tensor<T>,
    mode: Mode,
    momentum: T,
    epsilon: T,
) -> Result<BatchNormOutput<T>> {
    if !(epsilon > T::zero()) {
        return Err(Error::invalid("batch_norm", "epsilon must be positive"));
    }
    let c = channels(input)?;
    for (name, t) in [("gamma", gamma), ("beta", beta), ("running_mean", running_mean), ("running_var", running_var)] {
        if t.shape() != [c] {
            return Err(Error::shape("batch_norm", format!("{} {:?} != [{}]", name, t.shape(), c)));
        }
    }
    let x = input.data();
    let m = x.len() / c;

    let (mean, var) = match mode {
        Mode::Train => {
            let mut mean = vec![T::zero(); c];
            for px in x.chunks_exact(c) {
                for (a, &v) in mean.iter_mut().zip(px) {
                    *a += v;
                }
            }
            let inv_m = T::one() / T::from_usize(m);
            mean.iter_mut().for_each(|a| *a *= inv_m);
            let mut var = vec![T::zero(); c];
            for px in x.chunks_exact(c) {
                for ((a, &v), &mu) in var.iter_mut().zip(px).zip(&mean) {
                    let d = v - mu;
                    *a += d * d;
                }
            }
            var.iter_mut().for_each(|a| *a *= inv_m);
            (mean, var)
        }
        Mode::Infer => (running_mean.data().to_vec(), running_var.data().to_vec()),
    };

    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + epsilon).sqrt()).collect();
    let mut xhat = Vec::with_capacity(x.len());
    let mut out = Vec::with_capacity(x.len());
    let (g, b) = (gamma.data(), beta.data());
    for px in x.chunks_exact(c) {
        for ch in 0..c {
            let h = (px[ch] - mean[ch]) * inv_std[ch];
            xhat.push(h);
            out.push(g[ch] * h + b[ch]);
        }
    }
    finite("batch_norm", &out)?;

    let running = match mode {
        Mode::Train => {
            let keep = momentum;
            let take = T::one() - momentum;
            let rm = running_mean.data().iter().zip(&mean).map(|(&r, &v)| keep * r + take * v).collect();
            let rv = running_var.data().iter().zip(&var).map(|(&r, &v)| keep * r + take * v).collect();
            Some((Tensor::new(&[c], rm)?, Tensor::new(&[c], rv)?))
        }
        Mode::Infer => None,
    };

    Ok(BatchNormOutput {
        output: Tensor::new(input.shape(), out)?,
        cache: BatchNormCache { mode, xhat: Tensor::new(input.shape(), xhat)?, inv_std },
        running,
    })
}

/// Full batch-statistics gradient in train mode; the affine gradient in
/// infer mode.
pub fn batch_norm_backward<T: Scalar>(
    cache: &BatchNormCache<T>,
    gamma: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<BatchNormGrads<T>> {
    if grad_out.shape() != cache.xhat.shape() {
        return Err(Error::shape(
            "batch_norm_backward",
            format!("cotangent {:?} != input {:?}", grad_out.shape(), cache.xhat.shape()),
        ));
    }
    let c = cache.inv_std.len();
    let dy = grad_out.data();
    let xh = cache.xhat.data();
    let m = dy.len() / c;
    let mut dgamma = vec![T::zero(); c];
    let mut dbeta = vec![T::zero(); c];
    for (dyp, xhp) in dy.chunks_exact(c).zip(xh.chunks_exact(c)) {
        for ch in 0..c {
            dbeta[ch] += dyp[ch];
            dgamma[ch] += dyp[ch] * xhp[ch];
        }
    }
    let g = gamma.data();
    let mut dx = Vec::with_capacity(dy.len());
    match cache.mode {
        Mode::Train => {
            let inv_m = T::one() / T::from_usize(m);
            for (dyp, xhp) in dy.chunks_exact(c).zip(xh.chunks_exact(c)) {
                for ch in 0..c {
                    let k = g[ch] * cache.inv_std[ch];
                    dx.push(k * (dyp[ch] - inv_m * dbeta[ch] - xhp[ch] * inv_m * dgamma[ch]));
                }
            }
        }
        Mode::Infer => {
            for dyp in dy.chunks_exact(c) {
                for ch in 0..c {
                    dx.push(dyp[ch] * g[ch] * cache.inv_std[ch]);
                }
            }
        }
    }
    Ok(BatchNormGrads {
        input: Tensor::new(grad_out.shape(), dx)?,
        gamma: Tensor::new(&[c], dgamma)?,
        beta: Tensor::new(&[c], dbeta)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(c: usize) -> (Tensor<f64>, Tensor<f64>, Tensor<f64>, Tensor<f64>) {
        (
            Tensor::full(&[c], 1.0).unwrap(),
            Tensor::zeros(&[c]).unwrap(),
            Tensor::zeros(&[c]).unwrap(),
            Tensor::full(&[c], 1.0).unwrap(),
        )
    }

    #[test]
    fn train_mode_standardizes() {
        let x = Tensor::from_fn(&[4, 3, 3, 2], |i| ((i * 37 % 11) as f64) * 0.7 - 2.0).unwrap();
        let (g, b, rm, rv) = unit(2);
        let out = batch_norm(&x, &g, &b, &rm, &rv, Mode::Train, 0.99, 1e-3).unwrap();
        for ch in 0..2 {
            let vals: Vec<f64> = out.output.data().iter().skip(ch).step_by(2).copied().collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
            assert!(mean.abs() < 1e-6);
            // eps in the denominator pulls the variance slightly under one.
            assert!((var - 1.0).abs() < 1e-2, "var {}", var);
        }
        let (new_mean, new_var) = out.running.unwrap();
        assert!(new_mean.data().iter().all(|v| v.is_finite()));
        assert!(new_var.data()[0] > 0.99);
    }

    #[test]
    fn infer_mode_identity_up_to_epsilon() {
        let x = Tensor::from_fn(&[2, 2, 2, 3], |i| i as f64 - 5.0).unwrap();
        let (g, b, rm, rv) = unit(3);
        let eps = 1e-3;
        let out = batch_norm(&x, &g, &b, &rm, &rv, Mode::Infer, 0.99, eps).unwrap();
        let scale = 1.0 / (1.0f64 + eps).sqrt();
        for (y, v) in out.output.data().iter().zip(x.data()) {
            assert!((y - v * scale).abs() < 1e-12);
        }
        assert!(out.running.is_none());
    }

    #[test]
    fn rejects_bad_epsilon_and_lengths() {
        let x = Tensor::<f64>::zeros(&[1, 2, 2, 3]).unwrap();
        let (g, b, rm, rv) = unit(3);
        assert!(batch_norm(&x, &g, &b, &rm, &rv, Mode::Train, 0.99, 0.0).is_err());
        let (g2, ..) = unit(2);
        assert!(batch_norm(&x, &g2, &b, &rm, &rv, Mode::Train, 0.99, 1e-3).is_err());
    }
}
