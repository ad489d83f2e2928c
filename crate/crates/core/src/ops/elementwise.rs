use alloc::format;
use alloc::vec::Vec;

use crate::check::finite;
use crate::{Error, Result, Scalar, Tensor};

pub fn relu<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Masks the cotangent by `output > 0`, where `output` is the ReLU result.
pub fn relu_backward<T: Scalar>(output: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if output.shape() != grad_out.shape() {
        return Err(Error::shape(
            "relu_backward",
            format!("{:?} vs {:?}", output.shape(), grad_out.shape()),
        ));
    }
    let d = output
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&y, &g)| if y > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::new(output.shape(), d)
}

pub fn add<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let mut out = a.clone();
    out.add_assign(b)?;
    finite("add", out.data())?;
    Ok(out)
}

/// Channel-wise concatenation: `a` fills channels `[0, Ca)`, `b` fills `[Ca, Ca + Cb)`.
pub fn concat_channels<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (ba, ha, wa, ca) = a.dims4("concat_channels")?;
    let (bb, hb, wb, cb) = b.dims4("concat_channels")?;
    if (ba, ha, wa) != (bb, hb, wb) {
        return Err(Error::shape(
            "concat_channels",
            format!("{:?} and {:?} differ outside the channel axis", a.shape(), b.shape()),
        ));
    }
    let mut out = Vec::with_capacity(a.len() + b.len());
    for (pa, pb) in a.data().chunks_exact(ca).zip(b.data().chunks_exact(cb)) {
        out.extend_from_slice(pa);
        out.extend_from_slice(pb);
    }
    Tensor::new(&[ba, ha, wa, ca + cb], out)
}

/// Inverse of [`concat_channels`]: splits off the first `first` channels.
pub fn split_channels<T: Scalar>(t: &Tensor<T>, first: usize) -> Result<(Tensor<T>, Tensor<T>)> {
    let (b, h, w, c) = t.dims4("split_channels")?;
    if first == 0 || first >= c {
        return Err(Error::invalid(
            "split_channels",
            format!("split point {} must lie strictly inside {} channels", first, c),
        ));
    }
    let rest = c - first;
    let mut lo = Vec::with_capacity(b * h * w * first);
    let mut hi = Vec::with_capacity(b * h * w * rest);
    for px in t.data().chunks_exact(c) {
        lo.extend_from_slice(&px[..first]);
        hi.extend_from_slice(&px[first..]);
    }
    Ok((Tensor::new(&[b, h, w, first], lo)?, Tensor::new(&[b, h, w, rest], hi)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn concat_table_shape() {
        let a = Tensor::<f32>::zeros(&[1, 7, 7, 2048]).unwrap();
        let b = Tensor::<f32>::zeros(&[1, 7, 7, 2048]).unwrap();
        assert_eq!(concat_channels(&a, &b).unwrap().shape(), &[1, 7, 7, 4096]);
    }

    #[test]
    fn concat_rejects_mismatch_and_empty() {
        let a = Tensor::<f32>::zeros(&[1, 7, 7, 2]).unwrap();
        let b = Tensor::<f32>::zeros(&[1, 6, 7, 2]).unwrap();
        assert!(concat_channels(&a, &b).is_err());
        // A zero-channel operand cannot even be constructed.
        assert!(Tensor::<f32>::zeros(&[1, 7, 7, 0]).is_err());
        assert!(split_channels(&a, 0).is_err());
        assert!(split_channels(&a, 2).is_err());
    }

    #[test]
    fn split_concat_roundtrip_is_exact() {
        let t = Tensor::from_fn(&[2, 3, 2, 5], |i| (i as f32).sin() * 1e3).unwrap();
        let (a, b) = split_channels(&t, 2).unwrap();
        assert_eq!(concat_channels(&a, &b).unwrap(), t);
    }

    #[test]
    fn relu_masks() {
        let x = Tensor::new(&[4], vec![-1.0f64, 0.0, 2.0, -0.0]).unwrap();
        let y = relu(&x);
        assert_eq!(y.data(), &[0.0, 0.0, 2.0, 0.0]);
        let g = Tensor::full(&[4], 3.0).unwrap();
        assert_eq!(relu_backward(&y, &g).unwrap().data(), &[0.0, 0.0, 3.0, 0.0]);
    }
}
