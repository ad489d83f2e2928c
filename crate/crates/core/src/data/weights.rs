use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// `w_j = N / (K · N_j)`: minority classes weigh more.
    #[default]
    InverseFrequency,
    /// `w_j = N_j / N`: majority classes weigh more.
    Proportional,
}

/// Per-class loss weights, kept as exact ratios `num / den` alongside their
/// floating-point values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub mode: WeightMode,
    pub ratios: Vec<(u64, u64)>,
    pub weights: Vec<f64>,
}

impl ClassWeights {
    pub fn unit(k: usize) -> Self {
        ClassWeights {
            mode: WeightMode::InverseFrequency,
            ratios: (0..k).map(|_| (1, 1)).collect(),
            weights: (0..k).map(|_| 1.0).collect(),
        }
    }
}

pub fn class_weights(counts: &[usize], mode: WeightMode) -> Result<ClassWeights> {
    if counts.is_empty() {
        return Err(Error::invalid("class_weights", "no classes"));
    }
    if let Some(j) = counts.iter().position(|&c| c == 0) {
        return Err(Error::invalid("class_weights", format!("class {} has zero samples", j)));
    }
    let n: u64 = counts.iter().map(|&c| c as u64).sum();
    let k = counts.len() as u64;
    let ratios: Vec<(u64, u64)> = counts
        .iter()
        .map(|&c| match mode {
            WeightMode::InverseFrequency => (n, k * c as u64),
            WeightMode::Proportional => (c as u64, n),
        })
        .collect();
    let weights = ratios.iter().map(|&(a, b)| a as f64 / b as f64).collect();
    Ok(ClassWeights { mode, ratios, weights })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_one_counts() {
        let lit = class_weights(&[5856, 500], WeightMode::Proportional).unwrap();
        assert!((lit.weights[0] - 0.9213).abs() < 5e-5);
        assert!((lit.weights[1] - 0.0787).abs() < 5e-5);
        let inv = class_weights(&[5856, 500], WeightMode::InverseFrequency).unwrap();
        assert!((inv.weights[0] - 0.5427).abs() < 5e-5);
        assert!((inv.weights[1] - 6.356).abs() < 5e-4);
    }

    #[test]
    fn balanced_and_errors() {
        for mode in [WeightMode::Proportional, WeightMode::InverseFrequency] {
            let w = class_weights(&[100, 100], mode).unwrap();
            assert_eq!(w.weights[0], w.weights[1]);
        }
        assert!(class_weights(&[3, 0], WeightMode::InverseFrequency).is_err());
    }
}
