use alloc::vec::Vec;

use super::TrainConfig;
use crate::{Error, ParamStore, Result, Scalar, Tensor};

/// First and second moments per parameter plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    /// Running maximum of `v`, used only with AMSGrad.
    pub v_max: Vec<Tensor<T>>,
    pub t: u64,
    names: Vec<alloc::string::String>,
    frozen: Vec<bool>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ParamStore<T>, config: &TrainConfig) -> Self {
        let zeros: Vec<Tensor<T>> = params.iter().map(|(_, v)| Tensor::zeros_like(v)).collect();
        AdamState {
            m: zeros.clone(),
            v: zeros.clone(),
            v_max: if config.amsgrad { zeros } else { Vec::new() },
            t: 0,
            names: params.names().map(Into::into).collect(),
            frozen: params.names().map(|n| config.is_frozen(n)).collect(),
        }
    }

    /// One update of every trainable, unfrozen parameter from its gradient slot.
    pub fn step(&mut self, params: &mut ParamStore<T>, lr: f64, config: &TrainConfig) -> Result<()> {
        let (names, values, grads, trainable) = params.parts_mut();
        if names.len() != self.names.len() {
            let missing = names.iter().find(|n| !self.names.contains(n)).or(self.names.get(names.len()));
            return Err(Error::MissingGradient(missing.cloned().unwrap_or_default()));
        }
        for (i, name) in names.iter().enumerate() {
            if *name != self.names[i] || grads[i].shape() != self.m[i].shape() {
                return Err(Error::MissingGradient(name.clone()));
            }
        }
        self.t += 1;
        let b1 = T::from_f64(config.beta1);
        let b2 = T::from_f64(config.beta2);
        let one = T::one();
        let c1 = one - b1.powi(self.t.min(i32::MAX as u64) as i32);
        let c2 = one - b2.powi(self.t.min(i32::MAX as u64) as i32);
        let lr = T::from_f64(lr);
        let eps = T::from_f64(config.epsilon);
        for i in 0..values.len() {
            if !trainable[i] || self.frozen[i] {
                continue;
            }
            let g = grads[i].data();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let theta = values[i].data_mut();
            for j in 0..g.len() {
                m[j] = b1 * m[j] + (one - b1) * g[j];
                v[j] = b2 * v[j] + (one - b2) * g[j] * g[j];
            }
            if config.amsgrad {
                let vm = self.v_max[i].data_mut();
                for j in 0..g.len() {
                    vm[j] = vm[j].max(v[j]);
                    theta[j] -= lr * (m[j] / c1) / ((vm[j] / c2).sqrt() + eps);
                }
            } else {
                for j in 0..g.len() {
                    theta[j] -= lr * (m[j] / c1) / ((v[j] / c2).sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(g: f64) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        let id = s.add("w", Tensor::full(&[3], 1.0).unwrap(), true).unwrap();
        s.accumulate(id, &Tensor::full(&[3], g).unwrap()).unwrap();
        s
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let cfg = TrainConfig::default();
        let mut s = store(0.0);
        let mut st = AdamState::new(&s, &cfg);
        st.step(&mut s, 1e-3, &cfg).unwrap();
        assert_eq!(st.t, 1);
        assert!(s.value(s.id("w").unwrap()).data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn first_step_is_about_lr() {
        let cfg = TrainConfig::default();
        for g in [-3.0, 0.5, 1e-3] {
            let mut s = store(g);
            let mut st = AdamState::new(&s, &cfg);
            st.step(&mut s, 1e-4, &cfg).unwrap();
            let d = (s.value(s.id("w").unwrap()).data()[0] - 1.0).abs();
            assert!((0.99e-4..=1e-4).contains(&d), "{}", d);
        }
    }

    #[test]
    fn layout_mismatch() {
        let cfg = TrainConfig::default();
        let s = store(1.0);
        let mut st = AdamState::new(&s, &cfg);
        let mut other = ParamStore::<f64>::new();
        other.add("x", Tensor::zeros(&[3]).unwrap(), true).unwrap();
        assert!(matches!(st.step(&mut other, 1e-3, &cfg), Err(Error::MissingGradient(_))));
    }

    #[test]
    fn frozen_prefix_is_skipped() {
        let cfg = TrainConfig { freeze_prefixes: alloc::vec!["w".into()], ..Default::default() };
        let mut s = store(1.0);
        let mut st = AdamState::new(&s, &cfg);
        st.step(&mut s, 1e-3, &cfg).unwrap();
        assert!(s.value(s.id("w").unwrap()).data().iter().all(|&v| v == 1.0));
    }
}
