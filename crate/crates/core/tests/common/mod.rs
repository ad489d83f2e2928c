//! Test-side oracles, independent of the library's own checkers.

#![allow(dead_code)]

use cvrnet_core::verify::Probe;
use cvrnet_core::Tensor;

pub struct FdStats {
    pub max_rel: f64,
    pub checked: usize,
    pub skipped: usize,
}

fn objective(p: &Probe, x: &[Tensor<f64>]) -> f64 {
    p.objective(x).expect("objective")
}

/// Plain central difference `(f(x+h) − f(x−h)) / 2h` on coordinates chosen
/// by `pick`, compared with the probe's analytic gradient. With a `kink_tol`, a
/// coordinate where the two one-sided quotients at `h` and at `h/4` give
/// inconsistent answers is counted as skipped.
pub fn finite_difference(p: &Probe, h: f64, kink_tol: Option<f64>, floor: f64, mut pick: impl FnMut(usize, usize) -> Vec<usize>) -> FdStats {
    let analytic = p.analytic().expect("analytic gradient");
    let mut x: Vec<Tensor<f64>> = p.inputs.clone();
    let mut stats = FdStats { max_rel: 0.0, checked: 0, skipped: 0 };
    for t in 0..x.len() {
        for i in pick(t, x[t].len()) {
            let orig = x[t].data()[i];
            let mut at = |d: f64| {
                x[t].data_mut()[i] = orig + d;
                let v = objective(p, &x);
                x[t].data_mut()[i] = orig;
                v
            };
            let num = (at(h) - at(-h)) / (2.0 * h);
            if let Some(kt) = kink_tol {
                let fine = (at(h / 4.0) - at(-h / 4.0)) / (h / 2.0);
                if (num - fine).abs() > kt * num.abs().max(fine.abs()).max(floor) {
                    stats.skipped += 1;
                    continue;
                }
            }
            let a = analytic[t].data()[i];
            let rel = (a - num).abs() / a.abs().max(num.abs()).max(floor);
            stats.max_rel = stats.max_rel.max(rel);
            stats.checked += 1;
        }
    }
    stats
}
