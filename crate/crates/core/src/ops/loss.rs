use alloc::format;
use alloc::vec::Vec;

use crate::check::finite;
use crate::{Error, Result, Scalar, Tensor};

/// Row-wise softmax with max subtraction.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    let (_, k) = logits.dims2("softmax")?;
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.data().chunks_exact(k) {
        let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        let start = out.len();
        let mut sum = T::zero();
        for &v in row {
            let e = (v - max).exp();
            sum += e;
            out.push(e);
        }
        out[start..].iter_mut().for_each(|e| *e = *e / sum);
    }
    finite("softmax", &out)?;
    Tensor::new(logits.shape(), out)
}

/// One-hot encoding of class indices as a B×K tensor.
pub fn one_hot<T: Scalar>(labels: &[usize], k: usize) -> Result<Tensor<T>> {
    if labels.is_empty() {
        return Err(Error::Label("no labels".into()));
    }
    let mut t = Tensor::zeros(&[labels.len(), k])?;
    for (i, &l) in labels.iter().enumerate() {
        if l >= k {
            return Err(Error::Label(format!("label {} outside [0, {})", l, k)));
        }
        t.data_mut()[i * k + l] = T::one();
    }
    Ok(t)
}

#[derive(Debug, Clone)]
pub struct LossOutput<T> {
    pub loss: T,
    pub probs: Tensor<T>,
    /// True class index of every row, recovered from the one-hot labels.
    pub targets: Vec<usize>,
}

fn validate<T: Scalar>(op: &'static str, logits: &Tensor<T>, labels: &Tensor<T>, weights: &[T]) -> Result<Vec<usize>> {
    let (b, k) = logits.dims2(op)?;
    if k < 2 {
        return Err(Error::invalid(op, format!("need at least 2 classes, got {}", k)));
    }
    if labels.shape() != logits.shape() {
        return Err(Error::shape(op, format!("labels {:?} != logits {:?}", labels.shape(), logits.shape())));
    }
    if weights.len() != k {
        return Err(Error::shape(op, format!("{} class weights for {} classes", weights.len(), k)));
    }
    if weights.iter().any(|&w| !(w > T::zero()) || !w.is_finite()) {
        return Err(Error::invalid(op, "class weights must be positive and finite"));
    }
    let mut targets = Vec::with_capacity(b);
    for (i, row) in labels.data().chunks_exact(k).enumerate() {
        let ones = row.iter().filter(|&&v| v == T::one()).count();
        let zeros = row.iter().filter(|&&v| v == T::zero()).count();
        if ones != 1 || zeros != k - 1 {
            return Err(Error::Label(format!("label row {} is not one-hot", i)));
        }
        targets.push(row.iter().position(|&v| v == T::one()).unwrap());
    }
    Ok(targets)
}

/// Weighted categorical cross-entropy averaged over the batch:
/// `loss = (1/B) Σ_i w[y_i] · (−log softmax(z_i)[y_i])`.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &Tensor<T>, class_weights: &[T]) -> Result<LossOutput<T>> {
    let targets = validate("softmax_cross_entropy", logits, labels, class_weights)?;
    let (b, k) = logits.dims2("softmax_cross_entropy")?;
    let probs = softmax(logits)?;
    let mut total = T::zero();
    for (row, &y) in logits.data().chunks_exact(k).zip(&targets) {
        let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
        total += class_weights[y] * (lse - row[y]);
    }
    let loss = total / T::from_usize(b);
    if !loss.is_finite() {
        return Err(Error::NonFinite { op: "softmax_cross_entropy" });
    }
    Ok(LossOutput { loss, probs, targets })
}

/// `∂loss/∂logits = scale · w[y_i] · (p_i − onehot_i) / B`.
pub fn softmax_cross_entropy_backward<T: Scalar>(
    probs: &Tensor<T>,
    targets: &[usize],
    class_weights: &[T],
    scale: T,
) -> Result<Tensor<T>> {
    let (b, k) = probs.dims2("softmax_cross_entropy_backward")?;
    if targets.len() != b || class_weights.len() != k {
        return Err(Error::shape("softmax_cross_entropy_backward", "targets/weights do not match probabilities"));
    }
    let inv_b = scale / T::from_usize(b);
    let mut d = probs.data().to_vec();
    for (row, &y) in d.chunks_exact_mut(k).zip(targets) {
        row[y] -= T::one();
        let f = class_weights[y] * inv_b;
        row.iter_mut().for_each(|v| *v *= f);
    }
    Tensor::new(probs.shape(), d)
}
