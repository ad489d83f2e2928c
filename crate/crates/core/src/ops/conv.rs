//! Standard, depthwise and depthwise-separable 2-D convolution (NHWC).
//!
//! Weights are laid out kh×kw×Cin×Cout for standard convolution and kh×kw×C×1
//! for depthwise, so the innermost loops run over contiguous channel slices.

use alloc::format;
use alloc::vec;

use serde::{Deserialize, Serialize};

use crate::check::finite;
use crate::{Error, Result, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// Output extent `ceil(in / stride)`; zero padding split evenly with the
    /// extra pixel on the bottom/right.
    Same,
    /// No padding; output extent `(in - k) / stride + 1`.
    Valid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: Padding,
    /// 1 for standard convolution, the channel count for depthwise.
    pub groups: usize,
}

impl ConvSpec {
    pub fn new(kernel: usize, stride: usize, padding: Padding) -> Self {
        ConvSpec { kernel_h: kernel, kernel_w: kernel, stride, padding, groups: 1 }
    }

    pub fn same(kernel: usize, stride: usize) -> Self {
        Self::new(kernel, stride, Padding::Same)
    }

    pub fn depthwise(kernel: usize, stride: usize, channels: usize) -> Self {
        ConvSpec { groups: channels, ..Self::same(kernel, stride) }
    }

    /// Output extent and leading pad for one spatial axis.
    pub fn axis(&self, extent: usize, kernel: usize) -> Result<(usize, usize)> {
        axis_geometry("conv", extent, kernel, self.stride, self.padding)
    }

    /// Spatial output extents `(h, w)` for an input of `(h, w)`.
    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        Ok((self.axis(h, self.kernel_h)?.0, self.axis(w, self.kernel_w)?.0))
    }
}

pub(crate) fn axis_geometry(
    op: &'static str,
    extent: usize,
    kernel: usize,
    stride: usize,
    padding: Padding,
) -> Result<(usize, usize)> {
    if kernel == 0 || stride == 0 {
        return Err(Error::invalid(op, format!("kernel {} / stride {} must be positive", kernel, stride)));
    }
    match padding {
        Padding::Same => {
            let out = extent.div_ceil(stride);
            let total = ((out - 1) * stride + kernel).saturating_sub(extent);
            Ok((out, total / 2))
        }
        Padding::Valid => {
            if extent < kernel {
                return Err(Error::shape(
                    op,
                    format!("kernel {} larger than extent {} gives empty output", kernel, extent),
                ));
            }
            Ok(((extent - kernel) / stride + 1, 0))
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    batch: usize,
    in_h: usize,
    in_w: usize,
    in_c: usize,
    out_h: usize,
    out_w: usize,
    out_c: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad_t: usize,
    pad_l: usize,
}

impl Geometry {
    fn new(op: &'static str, input: &[usize], spec: &ConvSpec, out_c: usize) -> Result<Self> {
        let [batch, in_h, in_w, in_c] = *input else {
            return Err(Error::shape(op, format!("expected rank-4 input, got {:?}", input)));
        };
        let (out_h, pad_t) = axis_geometry(op, in_h, spec.kernel_h, spec.stride, spec.padding)?;
        let (out_w, pad_l) = axis_geometry(op, in_w, spec.kernel_w, spec.stride, spec.padding)?;
        Ok(Geometry {
            batch,
            in_h,
            in_w,
            in_c,
            out_h,
            out_w,
            out_c,
            kh: spec.kernel_h,
            kw: spec.kernel_w,
            stride: spec.stride,
            pad_t,
            pad_l,
        })
    }

    /// Input row for output row `oy` and kernel row `ky`, if inside the image.
    #[inline]
    fn in_y(&self, oy: usize, ky: usize) -> Option<usize> {
        (oy * self.stride + ky).checked_sub(self.pad_t).filter(|&y| y < self.in_h)
    }

    #[inline]
    fn in_x(&self, ox: usize, kx: usize) -> Option<usize> {
        (ox * self.stride + kx).checked_sub(self.pad_l).filter(|&x| x < self.in_w)
    }

    fn out_shape(&self) -> [usize; 4] {
        [self.batch, self.out_h, self.out_w, self.out_c]
    }
}

fn check_bias<T: Scalar>(op: &'static str, bias: Option<&Tensor<T>>, channels: usize) -> Result<()> {
    if let Some(b) = bias {
        if b.shape() != [channels] {
            return Err(Error::shape(op, format!("bias {:?} != [{}]", b.shape(), channels)));
        }
    }
    Ok(())
}

fn standard_geometry<T: Scalar>(
    op: &'static str,
    input: &Tensor<T>,
    weights: &Tensor<T>,
    spec: &ConvSpec,
) -> Result<Geometry> {
    if spec.groups != 1 {
        return Err(Error::invalid(op, format!("groups must be 1, got {}", spec.groups)));
    }
    let [kh, kw, w_in, w_out] = *weights.shape() else {
        return Err(Error::shape(op, format!("weights must be kh×kw×Cin×Cout, got {:?}", weights.shape())));
    };
    if kh != spec.kernel_h || kw != spec.kernel_w {
        return Err(Error::shape(
            op,
            format!("weights kernel {}×{} != spec {}×{}", kh, kw, spec.kernel_h, spec.kernel_w),
        ));
    }
    let (_, _, _, in_c) = input.dims4(op)?;
    if w_in != in_c {
        return Err(Error::shape(op, format!("weights expect {} input channels, input has {}", w_in, in_c)));
    }
    Geometry::new(op, input.shape(), spec, w_out)
}

/// Standard cross-correlation: B×H×W×Cin ⊛ kh×kw×Cin×Cout (+ bias) → B×H'×W'×Cout.
pub fn conv2d<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    spec: &ConvSpec,
) -> Result<Tensor<T>> {
    let g = standard_geometry("conv2d", input, weights, spec)?;
    check_bias("conv2d", bias, g.out_c)?;
    let x = input.data();
    let wt = weights.data();
    let mut out = vec![T::zero(); g.batch * g.out_h * g.out_w * g.out_c];
    let (cin, cout) = (g.in_c, g.out_c);

    for b in 0..g.batch {
        for oy in 0..g.out_h {
            for ox in 0..g.out_w {
                let o_off = ((b * g.out_h + oy) * g.out_w + ox) * cout;
                let acc = &mut out[o_off..o_off + cout];
                if let Some(bias) = bias {
                    acc.copy_from_slice(bias.data());
                }
                for ky in 0..g.kh {
                    let Some(iy) = g.in_y(oy, ky) else { continue };
                    for kx in 0..g.kw {
                        let Some(ix) = g.in_x(ox, kx) else { continue };
                        let i_off = ((b * g.in_h + iy) * g.in_w + ix) * cin;
                        let w_off = (ky * g.kw + kx) * cin * cout;
                        let pixel = &x[i_off..i_off + cin];
                        let taps = &wt[w_off..w_off + cin * cout];
                        for (&v, row) in pixel.iter().zip(taps.chunks_exact(cout)) {
                            for (a, &w) in acc.iter_mut().zip(row) {
                                *a += v * w;
                            }
                        }
                    }
                }
            }
        }
    }
    finite("conv2d", &out)?;
    Tensor::new(&g.out_shape(), out)
}

#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Cotangents of [`conv2d`] with respect to input, weights and bias.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    spec: &ConvSpec,
    grad_out: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let g = standard_geometry("conv2d_backward", input, weights, spec)?;
    if grad_out.shape() != g.out_shape() {
        return Err(Error::shape(
            "conv2d_backward",
            format!("cotangent {:?} != output {:?}", grad_out.shape(), g.out_shape()),
        ));
    }
    let x = input.data();
    let wt = weights.data();
    let dy = grad_out.data();
    let (cin, cout) = (g.in_c, g.out_c);
    let mut dx = vec![T::zero(); x.len()];
    let mut dw = vec![T::zero(); wt.len()];
    let mut db = vec![T::zero(); cout];

    for b in 0..g.batch {
        for oy in 0..g.out_h {
            for ox in 0..g.out_w {
                let o_off = ((b * g.out_h + oy) * g.out_w + ox) * cout;
                let dyr = &dy[o_off..o_off + cout];
                for (d, &v) in db.iter_mut().zip(dyr) {
                    *d += v;
                }
                for ky in 0..g.kh {
                    let Some(iy) = g.in_y(oy, ky) else { continue };
                    for kx in 0..g.kw {
                        let Some(ix) = g.in_x(ox, kx) else { continue };
                        let i_off = ((b * g.in_h + iy) * g.in_w + ix) * cin;
                        let w_off = (ky * g.kw + kx) * cin * cout;
                        let taps = &wt[w_off..w_off + cin * cout];
                        let dtaps = &mut dw[w_off..w_off + cin * cout];
                        let pixel = &x[i_off..i_off + cin];
                        let dpixel = &mut dx[i_off..i_off + cin];
                        for ci in 0..cin {
                            let row = &taps[ci * cout..(ci + 1) * cout];
                            let mut s = T::zero();
                            for (&w, &d) in row.iter().zip(dyr) {
                                s += w * d;
                            }
                            dpixel[ci] += s;
                            let v = pixel[ci];
                            for (dwv, &d) in dtaps[ci * cout..(ci + 1) * cout].iter_mut().zip(dyr) {
                                *dwv += v * d;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(ConvGrads {
        input: Tensor::new(input.shape(), dx)?,
        weights: Tensor::new(weights.shape(), dw)?,
        bias: Tensor::new(&[cout], db)?,
    })
}

fn depthwise_geometry<T: Scalar>(
    op: &'static str,
    input: &Tensor<T>,
    weights: &Tensor<T>,
    spec: &ConvSpec,
) -> Result<Geometry> {
    let (_, _, _, c) = input.dims4(op)?;
    if spec.groups != c {
        return Err(Error::invalid(op, format!("groups {} != channels {}", spec.groups, c)));
    }
    if weights.shape() != [spec.kernel_h, spec.kernel_w, c, 1] {
        return Err(Error::shape(
            op,
            format!(
                "weights {:?} != [{}, {}, {}, 1]",
                weights.shape(),
                spec.kernel_h,
                spec.kernel_w,
                c
            ),
        ));
    }
    Geometry::new(op, input.shape(), spec, c)
}

/// Per-channel spatial convolution (groups == channels, multiplier 1).
pub fn depthwise_conv2d<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    spec: &ConvSpec,
) -> Result<Tensor<T>> {
    let g = depthwise_geometry("depthwise_conv2d", input, weights, spec)?;
    check_bias("depthwise_conv2d", bias, g.out_c)?;
    let x = input.data();
    let wt = weights.data();
    let c = g.in_c;
    let mut out = vec![T::zero(); g.batch * g.out_h * g.out_w * c];
    for b in 0..g.batch {
        for oy in 0..g.out_h {
            for ox in 0..g.out_w {
                let o_off = ((b * g.out_h + oy) * g.out_w + ox) * c;
                let acc = &mut out[o_off..o_off + c];
                if let Some(bias) = bias {
                    acc.copy_from_slice(bias.data());
                }
                for ky in 0..g.kh {
                    let Some(iy) = g.in_y(oy, ky) else { continue };
                    for kx in 0..g.kw {
                        let Some(ix) = g.in_x(ox, kx) else { continue };
                        let i_off = ((b * g.in_h + iy) * g.in_w + ix) * c;
                        let w_off = (ky * g.kw + kx) * c;
                        for ((a, &v), &w) in acc.iter_mut().zip(&x[i_off..i_off + c]).zip(&wt[w_off..w_off + c]) {
                            *a += v * w;
                        }
                    }
                }
            }
        }
    }
    finite("depthwise_conv2d", &out)?;
    Tensor::new(&g.out_shape(), out)
}

pub fn depthwise_conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    spec: &ConvSpec,
    grad_out: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let g = depthwise_geometry("depthwise_conv2d_backward", input, weights, spec)?;
    if grad_out.shape() != g.out_shape() {
        return Err(Error::shape(
            "depthwise_conv2d_backward",
            format!("cotangent {:?} != output {:?}", grad_out.shape(), g.out_shape()),
        ));
    }
    let x = input.data();
    let wt = weights.data();
    let dy = grad_out.data();
    let c = g.in_c;
    let mut dx = vec![T::zero(); x.len()];
    let mut dw = vec![T::zero(); wt.len()];
    let mut db = vec![T::zero(); c];
    for b in 0..g.batch {
        for oy in 0..g.out_h {
            for ox in 0..g.out_w {
                let o_off = ((b * g.out_h + oy) * g.out_w + ox) * c;
                let dyr = &dy[o_off..o_off + c];
                for (d, &v) in db.iter_mut().zip(dyr) {
                    *d += v;
                }
                for ky in 0..g.kh {
                    let Some(iy) = g.in_y(oy, ky) else { continue };
                    for kx in 0..g.kw {
                        let Some(ix) = g.in_x(ox, kx) else { continue };
                        let i_off = ((b * g.in_h + iy) * g.in_w + ix) * c;
                        let w_off = (ky * g.kw + kx) * c;
                        for ch in 0..c {
                            dx[i_off + ch] += wt[w_off + ch] * dyr[ch];
                            dw[w_off + ch] += x[i_off + ch] * dyr[ch];
                        }
                    }
                }
            }
        }
    }
    Ok(ConvGrads {
        input: Tensor::new(input.shape(), dx)?,
        weights: Tensor::new(weights.shape(), dw)?,
        bias: Tensor::new(&[c], db)?,
    })
}

fn pointwise_spec() -> ConvSpec {
    ConvSpec::same(1, 1)
}

/// Depthwise convolution followed by a 1×1 pointwise convolution.
///
/// `spec` describes the depthwise stage (its `groups` must equal the input
/// channel count); the pointwise stage is always 1×1, stride 1.
pub fn depthwise_separable_conv<T: Scalar>(
    input: &Tensor<T>,
    dw_weights: &Tensor<T>,
    pw_weights: &Tensor<T>,
    dw_bias: Option<&Tensor<T>>,
    pw_bias: Option<&Tensor<T>>,
    spec: &ConvSpec,
) -> Result<Tensor<T>> {
    let mid = depthwise_conv2d(input, dw_weights, dw_bias, spec)?;
    conv2d(&mid, pw_weights, pw_bias, &pointwise_spec())
}

#[derive(Debug, Clone)]
pub struct SeparableGrads<T> {
    pub input: Tensor<T>,
    pub dw_weights: Tensor<T>,
    pub dw_bias: Tensor<T>,
    pub pw_weights: Tensor<T>,
    pub pw_bias: Tensor<T>,
}

/// Backward of [`depthwise_separable_conv`]; recomputes the depthwise output.
pub fn depthwise_separable_conv_backward<T: Scalar>(
    input: &Tensor<T>,
    dw_weights: &Tensor<T>,
    pw_weights: &Tensor<T>,
    dw_bias: Option<&Tensor<T>>,
    spec: &ConvSpec,
    grad_out: &Tensor<T>,
) -> Result<SeparableGrads<T>> {
    let mid = depthwise_conv2d(input, dw_weights, dw_bias, spec)?;
    let pw = conv2d_backward(&mid, pw_weights, &pointwise_spec(), grad_out)?;
    let dw = depthwise_conv2d_backward(input, dw_weights, spec, &pw.input)?;
    Ok(SeparableGrads {
        input: dw.input,
        dw_weights: dw.weights,
        dw_bias: dw.bias,
        pw_weights: pw.weights,
        pw_bias: pw.bias,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_kernel() {
        let x = Tensor::new(&[1, 1, 1, 1], vec![5.0f64]).unwrap();
        let w = Tensor::new(&[1, 1, 1, 1], vec![1.0]).unwrap();
        let b = Tensor::new(&[1], vec![0.0]).unwrap();
        let y = conv2d(&x, &w, Some(&b), &ConvSpec::same(1, 1)).unwrap();
        assert_eq!(y.data(), &[5.0]);
    }

    #[test]
    fn valid_summation() {
        let x = Tensor::full(&[1, 3, 3, 1], 1.0f64).unwrap();
        let w = Tensor::full(&[3, 3, 1, 1], 1.0).unwrap();
        let y = conv2d(&x, &w, None, &ConvSpec::new(3, 1, Padding::Valid)).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        assert_eq!(y.data(), &[9.0]);
    }

    #[test]
    fn same_padding_puts_extra_pixel_bottom_right() {
        // 4 wide, k=2, s=1: total pad 1, all on the right.
        let (out, pad) = axis_geometry("t", 4, 2, 1, Padding::Same).unwrap();
        assert_eq!((out, pad), (4, 0));
        // 5 wide, k=3, s=2: out 3, total pad 2 → 1 before.
        assert_eq!(axis_geometry("t", 5, 3, 2, Padding::Same).unwrap(), (3, 1));
        // 112 wide, k=7, s=2: out 56, total pad 5 → 2 before, 3 after.
        assert_eq!(axis_geometry("t", 112, 7, 2, Padding::Same).unwrap(), (56, 2));
    }

    #[test]
    fn same_padding_extent_is_ceil() {
        for e in 1..=64 {
            for s in 1..=2 {
                for k in [1, 3, 7] {
                    let (out, _) = axis_geometry("t", e, k, s, Padding::Same).unwrap();
                    assert_eq!(out, e.div_ceil(s));
                }
            }
        }
    }

    #[test]
    fn errors() {
        let x = Tensor::<f32>::zeros(&[1, 2, 2, 3]).unwrap();
        let w = Tensor::<f32>::zeros(&[3, 3, 2, 4]).unwrap();
        assert!(matches!(conv2d(&x, &w, None, &ConvSpec::same(3, 1)), Err(Error::Shape { .. })));
        let w = Tensor::<f32>::zeros(&[3, 3, 3, 4]).unwrap();
        assert!(conv2d(&x, &w, None, &ConvSpec::new(3, 1, Padding::Valid)).is_err());
        let bad_bias = Tensor::<f32>::zeros(&[3]).unwrap();
        assert!(conv2d(&x, &w, Some(&bad_bias), &ConvSpec::same(3, 1)).is_err());
    }

    #[test]
    fn separable_identity_for_single_channel() {
        let x = Tensor::from_fn(&[1, 3, 3, 1], |i| i as f64 * 0.5 - 1.0).unwrap();
        let dw = Tensor::new(&[1, 1, 1, 1], vec![1.0]).unwrap();
        let pw = Tensor::new(&[1, 1, 1, 1], vec![1.0]).unwrap();
        let y = depthwise_separable_conv(&x, &dw, &pw, None, None, &ConvSpec::depthwise(1, 1, 1)).unwrap();
        assert_eq!(y, x);
    }
}
