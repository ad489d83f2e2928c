use std::collections::HashSet;

use cvrnet_core::blocks::Width;
use cvrnet_core::data::{make_folds, synthetic_images, DatasetIndex, Role, Sample};
use cvrnet_core::ops::one_hot;
use cvrnet_core::train::{evaluate_role, fit, overfit_single_batch, AdamState, LrState, TrainConfig};
use cvrnet_core::{Model, ModelConfig, ParamStore, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Adam written straight from the update equations, one scalar at a time.
struct ReferenceAdam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl ReferenceAdam {
    fn step(&mut self, theta: &mut [Vec<f64>], grads: &[Vec<f64>], lr: f64, b1: f64, b2: f64, eps: f64) {
        self.t += 1;
        for p in 0..theta.len() {
            for i in 0..theta[p].len() {
                let g = grads[p][i];
                self.m[p][i] = b1 * self.m[p][i] + (1.0 - b1) * g;
                self.v[p][i] = b2 * self.v[p][i] + (1.0 - b2) * g * g;
                let m_hat = self.m[p][i] / (1.0 - b1.powi(self.t));
                let v_hat = self.v[p][i] / (1.0 - b2.powi(self.t));
                theta[p][i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[test]
fn adam_matches_reference() {
    let cfg = TrainConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let shapes = [vec![3, 4], vec![7], vec![2, 2, 2]];
    let mut store = ParamStore::<f64>::new();
    let mut theta = Vec::new();
    for (i, s) in shapes.iter().enumerate() {
        let t = Tensor::from_fn(s, |_| rng.gen_range(-1.0..1.0)).unwrap();
        theta.push(t.data().to_vec());
        store.add(&format!("p{}", i), t, true).unwrap();
    }
    let mut adam = AdamState::new(&store, &cfg);
    let mut reference = ReferenceAdam { m: theta.iter().map(|p| vec![0.0; p.len()]).collect(), v: theta.iter().map(|p| vec![0.0; p.len()]).collect(), t: 0 };
    for step in 0..25 {
        store.zero_grads();
        let mut grads = Vec::new();
        for id in store.ids().collect::<Vec<_>>() {
            let g = Tensor::from_fn(store.value(id).shape(), |_| rng.gen_range(-3.0..3.0)).unwrap();
            grads.push(g.data().to_vec());
            store.accumulate(id, &g).unwrap();
        }
        let lr = 1e-3 * (1.0 + step as f64 * 0.1);
        adam.step(&mut store, lr, &cfg).unwrap();
        reference.step(&mut theta, &grads, lr, cfg.beta1, cfg.beta2, cfg.epsilon);
        for (id, r) in store.ids().zip(&theta) {
            for (a, b) in store.value(id).data().iter().zip(r) {
                assert!((a - b).abs() <= 1e-12, "step {}: {} vs {}", step, a, b);
            }
        }
    }
    assert_eq!(adam.t, 25);
}

#[test]
fn adam_is_deterministic() {
    let run = || {
        let cfg = TrainConfig::default();
        let mut store = ParamStore::<f32>::new();
        let id = store.add("w", Tensor::from_fn(&[16], |i| i as f32 * 0.1).unwrap(), true).unwrap();
        let mut adam = AdamState::new(&store, &cfg);
        for k in 0..10 {
            store.zero_grads();
            store.accumulate(id, &Tensor::from_fn(&[16], |i| ((i * 7 + k) % 5) as f32 - 2.0).unwrap()).unwrap();
            adam.step(&mut store, 1e-2, &cfg).unwrap();
        }
        store.value(id).data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[derive(Clone, Copy)]
enum Sym {
    Improve,
    Flat,
}

/// lr from the sequence alone: every maximal flat run of length r has
/// completed floor(r / 12) stagnation windows.
fn oracle_lr(seq: &[Sym]) -> f64 {
    let mut completed = 0;
    let mut run = 0;
    for s in seq {
        match s {
            Sym::Improve => run = 0,
            Sym::Flat => {
                run += 1;
                if run % 12 == 0 {
                    completed += 1;
                }
            }
        }
    }
    1e-4 * 0.1f64.powi(completed)
}

/// Exhaustive over every improve/flat sequence of length ≤ 30 following the
/// first epoch. The scheduler is deterministic in its state, so exploring
/// every distinct reachable (state, oracle count) pair per depth covers all
/// 2^31 − 1 sequences; one concrete witness sequence is kept per pair.
#[test]
fn scheduler_exhaustive() {
    let cfg = TrainConfig::default();
    let mut start = LrState::new(&cfg);
    start.step(1000.0).unwrap();
    let key = |s: &LrState| (s.current_lr.to_bits(), s.best_val_loss.map(f64::to_bits), s.epochs_since_improvement);
    let mut frontier: Vec<(LrState, Vec<Sym>)> = vec![(start, Vec::new())];
    let mut visited = 0usize;
    for depth in 1..=30 {
        let mut next = Vec::new();
        let mut seen = HashSet::new();
        for (state, seq) in &frontier {
            let best = state.best_val_loss.unwrap();
            let moves = [(Sym::Improve, best - 1.0), (Sym::Flat, best), (Sym::Flat, best + 0.5), (Sym::Flat, best - 5e-7)];
            for (sym, loss) in moves {
                let mut s = state.clone();
                let lr = s.step(loss).unwrap();
                let mut q = seq.clone();
                q.push(sym);
                let want = oracle_lr(&q);
                assert!((lr - want).abs() <= 1e-12 * want, "depth {}: lr {} vs {}", depth, lr, want);
                assert!(lr >= cfg.min_lr && lr <= cfg.lr0);
                visited += 1;
                let run = q.iter().rev().take_while(|s| matches!(s, Sym::Flat)).count();
                if seen.insert((key(&s), run % 12)) {
                    next.push((s, q));
                }
            }
        }
        frontier = next;
    }
    assert!(visited > 1000);
}

fn toy_index(n: usize, k: usize) -> DatasetIndex {
    let samples = (0..n).map(|i| Sample { path: format!("s{}", i), class_id: i % k }).collect();
    DatasetIndex::new((0..k).map(|c| format!("c{}", c)).collect(), samples).unwrap()
}

#[test]
fn toy_training_reaches_targets() {
    let src = synthetic_images::<f32>(200, 32, 32, 3, 2, 0.25, 7).unwrap();
    let plan = make_folds(&toy_index(200, 2), 5, 1, 0.1).unwrap();
    let fold = plan.fold(0).unwrap();
    let cfg = ModelConfig::scaled(32, 32, 2, Width::new(1, 8).unwrap());
    let mut model = Model::<f32>::build(&cfg, 3).unwrap();
    let tc = TrainConfig { epochs: 12, ..Default::default() };
    let out = fit(&mut model, &src, fold, &tc, &mut ()).unwrap();
    assert_eq!(out.report.epochs.len(), 12);
    let best = Model::from_parts(model.architecture().clone(), out.best).unwrap();
    let (_, train_acc) = evaluate_role(&best, &src, fold, Role::Train, 32).unwrap();
    let (_, test_acc) = evaluate_role(&best, &src, fold, Role::Test, 32).unwrap();
    assert!(train_acc >= 0.95, "train accuracy {}", train_acc);
    assert!(test_acc >= 0.90, "held-out accuracy {}", test_acc);
}

#[test]
fn single_batch_overfit() {
    let cfg = ModelConfig::scaled(32, 32, 2, Width::new(1, 8).unwrap());
    let mut model = Model::<f32>::build(&cfg, 5).unwrap();
    let src = synthetic_images::<f32>(4, 32, 32, 3, 2, 0.25, 1).unwrap();
    let x = Tensor::stack_batch(&src.images).unwrap();
    let y: Tensor<f32> = one_hot(&src.labels, 2).unwrap();
    let before = model.params().clone();
    assert!(overfit_single_batch(&mut model, &x, &y, 0, 1e-3, &TrainConfig::default()).unwrap().is_empty());
    assert_eq!(model.params().iter().map(|(_, v)| v.clone()).collect::<Vec<_>>(), before.iter().map(|(_, v)| v.clone()).collect::<Vec<_>>());
    let trace = overfit_single_batch(&mut model, &x, &y, 500, 1e-3, &TrainConfig::default()).unwrap();
    assert!(*trace.last().unwrap() < 0.01, "final loss {}", trace.last().unwrap());
    let window = |i: usize| trace[i..i + 50].iter().sum::<f64>() / 50.0;
    for i in (50..=trace.len() - 50).step_by(50) {
        assert!(window(i) <= window(i - 50) * 1.05 + 1e-4, "window at {} rose", i);
    }
    let too_big = Tensor::<f32>::zeros(&[9, 32, 32, 3]).unwrap();
    assert!(overfit_single_batch(&mut model, &too_big, &one_hot(&[0; 9], 2).unwrap(), 1, 1e-3, &TrainConfig::default()).is_err());
}
