use alloc::format;
use alloc::vec;

use crate::check::finite;
use crate::{Error, Result, Scalar, Tensor};

fn dims<T: Scalar>(op: &'static str, input: &Tensor<T>, weights: &Tensor<T>) -> Result<(usize, usize, usize)> {
    let (b, cin) = input.dims2(op)?;
    let (win, cout) = weights.dims2(op)?;
    if win != cin {
        return Err(Error::shape(op, format!("input has {} features, weights expect {}", cin, win)));
    }
    Ok((b, cin, cout))
}

/// Affine map B×Cin · Cin×Cout + Cout → B×Cout.
pub fn dense<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (b, cin, cout) = dims("dense", input, weights)?;
    if bias.shape() != [cout] {
        return Err(Error::shape("dense", format!("bias {:?} != [{}]", bias.shape(), cout)));
    }
    let x = input.data();
    let w = weights.data();
    let mut out = vec![T::zero(); b * cout];
    for (row, acc) in x.chunks_exact(cin).zip(out.chunks_exact_mut(cout)) {
        acc.copy_from_slice(bias.data());
        for (&v, wrow) in row.iter().zip(w.chunks_exact(cout)) {
            for (a, &wv) in acc.iter_mut().zip(wrow) {
                *a += v * wv;
            }
        }
    }
    finite("dense", &out)?;
    Tensor::new(&[b, cout], out)
}

#[derive(Debug, Clone)]
pub struct DenseGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn dense_backward<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>, grad_out: &Tensor<T>) -> Result<DenseGrads<T>> {
    let (b, cin, cout) = dims("dense_backward", input, weights)?;
    if grad_out.shape() != [b, cout] {
        return Err(Error::shape(
            "dense_backward",
            format!("cotangent {:?} != [{}, {}]", grad_out.shape(), b, cout),
        ));
    }
    let x = input.data();
    let w = weights.data();
    let dy = grad_out.data();
    let mut dx = vec![T::zero(); b * cin];
    let mut dw = vec![T::zero(); cin * cout];
    let mut db = vec![T::zero(); cout];
    for ((row, dyr), dxr) in x.chunks_exact(cin).zip(dy.chunks_exact(cout)).zip(dx.chunks_exact_mut(cin)) {
        for (d, &g) in db.iter_mut().zip(dyr) {
            *d += g;
        }
        for (i, (&v, wrow)) in row.iter().zip(w.chunks_exact(cout)).enumerate() {
            let mut s = T::zero();
            for (&wv, &g) in wrow.iter().zip(dyr) {
                s += wv * g;
            }
            dxr[i] = s;
            for (dwv, &g) in dw[i * cout..(i + 1) * cout].iter_mut().zip(dyr) {
                *dwv += v * g;
            }
        }
    }
    Ok(DenseGrads {
        input: Tensor::new(&[b, cin], dx)?,
        weights: Tensor::new(&[cin, cout], dw)?,
        bias: Tensor::new(&[cout], db)?,
    })
}
