use alloc::format;
use alloc::vec;

use num_traits::Float;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::{seed, Error, Result, Scalar, Tensor};

/// Nearest-neighbour resampling of a B×H×W×C image batch. Output pixel `d`
/// reads source index `floor((d + 1/2) · src / dst)`, evaluated in integers.
pub fn resize_nearest<T: Scalar>(img: &Tensor<T>, out_h: usize, out_w: usize) -> Result<Tensor<T>> {
    let (b, h, w, c) = img.dims4("resize_nearest")?;
    if out_h == 0 || out_w == 0 {
        return Err(Error::invalid("resize_nearest", "target extent must be positive"));
    }
    if (h, w) == (out_h, out_w) {
        return Ok(img.clone());
    }
    let src = |d: usize, dst: usize, s: usize| ((2 * d + 1) * s) / (2 * dst);
    let x = img.data();
    let mut out = vec![T::zero(); b * out_h * out_w * c];
    for bi in 0..b {
        for oy in 0..out_h {
            let sy = src(oy, out_h, h);
            for ox in 0..out_w {
                let sx = src(ox, out_w, w);
                let i = ((bi * h + sy) * w + sx) * c;
                let o = ((bi * out_h + oy) * out_w + ox) * c;
                out[o..o + c].copy_from_slice(&x[i..i + c]);
            }
        }
    }
    Tensor::new(&[b, out_h, out_w, c], out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub rotation_deg_max: f64,
    pub shift_frac_max: f64,
    pub hflip_prob: f64,
    pub vflip_prob: f64,
    /// Base of the per-sample augmentation seeds.
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig { rotation_deg_max: 15.0, shift_frac_max: 0.1, hflip_prob: 0.5, vflip_prob: 0.5, seed: 0 }
    }
}

impl AugmentConfig {
    pub fn identity() -> Self {
        AugmentConfig { rotation_deg_max: 0.0, shift_frac_max: 0.0, hflip_prob: 0.0, vflip_prob: 0.0, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("hflip_prob", self.hflip_prob), ("vflip_prob", self.vflip_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{} = {} outside [0, 1]", name, p)));
            }
        }
        for (name, m) in [("rotation_deg_max", self.rotation_deg_max), ("shift_frac_max", self.shift_frac_max)] {
            if !(m >= 0.0 && m.is_finite()) {
                return Err(Error::Config(format!("{} = {} must be a finite non-negative number", name, m)));
            }
        }
        Ok(())
    }
}

/// A rotation by `theta_deg` (counter-clockwise as displayed) about the image
/// centre, then a shift of `(dy, dx)` pixels, then optional flips.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Transform {
    pub theta_deg: f64,
    pub dy: f64,
    pub dx: f64,
    pub hflip: bool,
    pub vflip: bool,
}

impl Transform {
    pub fn sample(config: &AugmentConfig, h: usize, w: usize, sample_seed: u64) -> Self {
        let mut rng = seed::rng(sample_seed);
        let mut sym = |m: f64| if m > 0.0 { rng.gen_range(-m..=m) } else { 0.0 };
        let theta_deg = sym(config.rotation_deg_max);
        let dy = sym(config.shift_frac_max) * h as f64;
        let dx = sym(config.shift_frac_max) * w as f64;
        let hflip = rng.gen_bool(config.hflip_prob);
        let vflip = rng.gen_bool(config.vflip_prob);
        Transform { theta_deg, dy, dx, hflip, vflip }
    }
}

/// Resamples every output pixel from its inverse-mapped source position,
/// rounded to the nearest pixel; positions outside the frame read 0.
pub fn apply_transform<T: Scalar>(img: &Tensor<T>, t: &Transform) -> Result<Tensor<T>> {
    let (b, h, w, c) = img.dims4("augment")?;
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let (sin, cos) = Float::sin_cos(Float::to_radians(t.theta_deg));
    let x = img.data();
    let mut out = vec![T::zero(); x.len()];
    for oy in 0..h {
        for ox in 0..w {
            let fy = if t.vflip { h - 1 - oy } else { oy } as f64 - t.dy;
            let fx = if t.hflip { w - 1 - ox } else { ox } as f64 - t.dx;
            let (u, v) = (fx - cx, fy - cy);
            let sx = Float::round(cos * u - sin * v + cx);
            let sy = Float::round(sin * u + cos * v + cy);
            if sx < 0.0 || sy < 0.0 || sx >= w as f64 || sy >= h as f64 {
                continue;
            }
            let (sy, sx) = (sy as usize, sx as usize);
            for bi in 0..b {
                let i = ((bi * h + sy) * w + sx) * c;
                let o = ((bi * h + oy) * w + ox) * c;
                out[o..o + c].copy_from_slice(&x[i..i + c]);
            }
        }
    }
    Tensor::new(img.shape(), out)
}

/// Random geometric augmentation fully determined by `sample_seed`.
pub fn augment<T: Scalar>(img: &Tensor<T>, config: &AugmentConfig, sample_seed: u64) -> Result<Tensor<T>> {
    config.validate()?;
    let (_, h, w, _) = img.dims4("augment")?;
    apply_transform(img, &Transform::sample(config, h, w, sample_seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn grid(h: usize, w: usize) -> Tensor<f64> {
        Tensor::from_fn(&[1, h, w, 1], |i| i as f64 + 1.0).unwrap()
    }

    #[test]
    fn resize_identity_and_upscale() {
        let g = grid(5, 7);
        assert_eq!(resize_nearest(&g, 5, 7).unwrap(), g);
        let up = resize_nearest(&grid(2, 2), 4, 4).unwrap();
        let expect = [1.0, 1.0, 2.0, 2.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0, 4.0, 3.0, 3.0, 4.0, 4.0];
        assert_eq!(up.data(), &expect);
    }

    #[test]
    fn halving_picks_odd_indices() {
        let g = grid(448, 448);
        let r = resize_nearest(&g, 224, 224).unwrap();
        for oy in [0usize, 1, 100, 223] {
            for ox in [0usize, 5, 223] {
                let src = (2 * oy + 1) * 448 + (2 * ox + 1);
                assert_eq!(r.data()[oy * 224 + ox], g.data()[src]);
            }
        }
    }

    #[test]
    fn identity_config_is_identity() {
        let g = grid(6, 4);
        assert_eq!(augment(&g, &AugmentConfig::identity(), 9).unwrap(), g);
    }

    #[test]
    fn hflip_involution() {
        let g = grid(5, 6);
        let t = Transform { hflip: true, ..Default::default() };
        let once = apply_transform(&g, &t).unwrap();
        assert_ne!(once, g);
        assert_eq!(apply_transform(&once, &t).unwrap(), g);
    }

    #[test]
    fn quarter_turn_matches_hand_pattern() {
        let g = grid(3, 3);
        let t = Transform { theta_deg: 90.0, ..Default::default() };
        let r = apply_transform(&g, &t).unwrap();
        let expect: Vec<f64> = [3, 6, 9, 2, 5, 8, 1, 4, 7].iter().map(|&v| v as f64).collect();
        assert_eq!(r.data(), expect.as_slice());
    }

    #[test]
    fn shift_fills_zero() {
        let g = grid(3, 3);
        let t = Transform { dx: 1.0, ..Default::default() };
        let r = apply_transform(&g, &t).unwrap();
        assert_eq!(r.data(), &[0.0, 1.0, 2.0, 0.0, 4.0, 5.0, 0.0, 7.0, 8.0]);
    }

    #[test]
    fn bad_config() {
        let c = AugmentConfig { hflip_prob: 1.5, ..Default::default() };
        assert!(c.validate().is_err());
    }
}
