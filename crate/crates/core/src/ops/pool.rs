use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::conv::{axis_geometry, Padding};
use crate::check::finite;
use crate::{Error, Result, Scalar, Tensor};

#[derive(Debug, Clone)]
pub struct MaxPoolOutput<T> {
    pub output: Tensor<T>,
    /// Flat input index of the selected element for every output element.
    pub argmax: Vec<usize>,
}

/// Max pooling with `same` output geometry. Padded positions never win: the
/// maximum is taken over in-image elements only, so a constant map pools to
/// the same constant.
pub fn maxpool2d<T: Scalar>(input: &Tensor<T>, pool_h: usize, pool_w: usize, stride: usize) -> Result<Tensor<T>> {
    Ok(maxpool2d_indexed(input, pool_h, pool_w, stride)?.output)
}

pub fn maxpool2d_indexed<T: Scalar>(
    input: &Tensor<T>,
    pool_h: usize,
    pool_w: usize,
    stride: usize,
) -> Result<MaxPoolOutput<T>> {
    let (b, h, w, c) = input.dims4("maxpool2d")?;
    let (oh, pad_t) = axis_geometry("maxpool2d", h, pool_h, stride, Padding::Same)?;
    let (ow, pad_l) = axis_geometry("maxpool2d", w, pool_w, stride, Padding::Same)?;
    let x = input.data();
    let mut out = vec![T::zero(); b * oh * ow * c];
    let mut argmax = vec![0usize; out.len()];
    let mut best: Vec<Option<(T, usize)>> = vec![None; c];
    for bi in 0..b {
        for oy in 0..oh {
            for ox in 0..ow {
                best.iter_mut().for_each(|v| *v = None);
                for ky in 0..pool_h {
                    let Some(iy) = (oy * stride + ky).checked_sub(pad_t).filter(|&y| y < h) else {
                        continue;
                    };
                    for kx in 0..pool_w {
                        let Some(ix) = (ox * stride + kx).checked_sub(pad_l).filter(|&x| x < w) else {
                            continue;
                        };
                        let base = ((bi * h + iy) * w + ix) * c;
                        for (ch, slot) in best.iter_mut().enumerate() {
                            let v = x[base + ch];
                            // Strict comparison keeps the first maximum on ties.
                            match slot {
                                Some((m, _)) if !(v > *m) => {}
                                _ => *slot = Some((v, base + ch)),
                            }
                        }
                    }
                }
                let o = ((bi * oh + oy) * ow + ox) * c;
                for (ch, slot) in best.iter().enumerate() {
                    let (v, idx) = slot.ok_or_else(|| Error::invalid("maxpool2d", "empty pooling window"))?;
                    out[o + ch] = v;
                    argmax[o + ch] = idx;
                }
            }
        }
    }
    finite("maxpool2d", &out)?;
    Ok(MaxPoolOutput { output: Tensor::new(&[b, oh, ow, c], out)?, argmax })
}

/// Routes each output cotangent to its arg-max input position.
pub fn maxpool2d_backward<T: Scalar>(input_shape: &[usize], argmax: &[usize], grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if argmax.len() != grad_out.len() {
        return Err(Error::shape(
            "maxpool2d_backward",
            format!("{} indices for {} cotangent elements", argmax.len(), grad_out.len()),
        ));
    }
    let mut dx = Tensor::zeros(input_shape)?;
    let d = dx.data_mut();
    for (&idx, &g) in argmax.iter().zip(grad_out.data()) {
        if idx >= d.len() {
            return Err(Error::shape("maxpool2d_backward", "arg-max index out of range"));
        }
        d[idx] += g;
    }
    Ok(dx)
}

/// Per-channel spatial mean: B×H×W×C → B×C.
pub fn global_avg_pool<T: Scalar>(input: &Tensor<T>) -> Result<Tensor<T>> {
    let (b, h, w, c) = input.dims4("global_avg_pool")?;
    let x = input.data();
    let mut out = vec![T::zero(); b * c];
    let scale = T::one() / T::from_usize(h * w);
    for bi in 0..b {
        let acc = &mut out[bi * c..(bi + 1) * c];
        for px in x[bi * h * w * c..(bi + 1) * h * w * c].chunks_exact(c) {
            for (a, &v) in acc.iter_mut().zip(px) {
                *a += v;
            }
        }
        acc.iter_mut().for_each(|a| *a *= scale);
    }
    finite("global_avg_pool", &out)?;
    Tensor::new(&[b, c], out)
}

pub fn global_avg_pool_backward<T: Scalar>(input_shape: &[usize], grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    let [b, h, w, c] = *input_shape else {
        return Err(Error::shape("global_avg_pool_backward", "input must be rank 4"));
    };
    if grad_out.shape() != [b, c] {
        return Err(Error::shape(
            "global_avg_pool_backward",
            format!("cotangent {:?} != [{}, {}]", grad_out.shape(), b, c),
        ));
    }
    let scale = T::one() / T::from_usize(h * w);
    let g = grad_out.data();
    let mut dx = Vec::with_capacity(b * h * w * c);
    for bi in 0..b {
        let row = &g[bi * c..(bi + 1) * c];
        for _ in 0..h * w {
            dx.extend(row.iter().map(|&v| v * scale));
        }
    }
    Tensor::new(input_shape, dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        let x = Tensor::new(&[1, 2, 2, 1], vec![1.0f32, 2.0, 3.0, 4.0]).unwrap();
        let y = maxpool2d(&x, 2, 2, 2).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        assert_eq!(y.data(), &[4.0]);
    }

    #[test]
    fn constant_is_preserved() {
        let x = Tensor::full(&[2, 5, 7, 3], -1.5f32).unwrap();
        let y = maxpool2d(&x, 3, 3, 2).unwrap();
        assert_eq!(y.shape(), &[2, 3, 4, 3]);
        assert!(y.data().iter().all(|&v| v == -1.5));
    }

    #[test]
    fn stem_pool_shape() {
        let x = Tensor::<f32>::zeros(&[1, 112, 112, 64]).unwrap();
        assert_eq!(maxpool2d(&x, 3, 3, 2).unwrap().shape(), &[1, 56, 56, 64]);
    }

    #[test]
    fn ties_go_to_first_occurrence() {
        let x = Tensor::new(&[1, 2, 2, 1], vec![7.0f64, 7.0, 7.0, 7.0]).unwrap();
        let out = maxpool2d_indexed(&x, 2, 2, 2).unwrap();
        assert_eq!(out.argmax, vec![0]);
        let g = Tensor::new(&[1, 1, 1, 1], vec![1.0]).unwrap();
        let dx = maxpool2d_backward(x.shape(), &out.argmax, &g).unwrap();
        assert_eq!(dx.data(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn invalid_window() {
        let x = Tensor::<f32>::zeros(&[1, 4, 4, 1]).unwrap();
        assert!(maxpool2d(&x, 0, 3, 2).is_err());
        assert!(maxpool2d(&x, 3, 3, 0).is_err());
    }

    #[test]
    fn gap_values() {
        let x = Tensor::full(&[1, 3, 5, 2], 7.0f64).unwrap();
        assert_eq!(global_avg_pool(&x).unwrap().data(), &[7.0, 7.0]);
        let x = Tensor::new(&[1, 2, 2, 1], vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(global_avg_pool(&x).unwrap().data(), &[2.5]);
    }

    #[test]
    fn gap_head_input_shape() {
        let x = Tensor::<f32>::zeros(&[1, 7, 7, 4096]).unwrap();
        assert_eq!(global_avg_pool(&x).unwrap().shape(), &[1, 4096]);
    }
}
