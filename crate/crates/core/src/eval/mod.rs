//! Confusion matrices, one-vs-rest recall/precision/F1, accuracy, weighted and
//! macro aggregation, and cross-fold averaging.

mod format;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedMul, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use format::{parse_confusion_csv, render_confusion_csv, render_fold_average, render_text};

/// Schema version written into every serialized [`MetricsReport`].
pub const REPORT_VERSION: u32 = 1;

/// K×K counts with rows = predicted class and columns = actual class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub class_names: Vec<String>,
    /// Row-major, `counts[p * k + a]`.
    pub counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(class_names: Vec<String>, counts: Vec<u64>) -> Result<Self> {
        let k = class_names.len();
        if k < 2 {
            return Err(Error::invalid("confusion", "need at least two classes"));
        }
        if counts.len() != k * k {
            return Err(Error::shape("confusion", format!("{} counts for {} classes", counts.len(), k)));
        }
        Ok(ConfusionMatrix { class_names, counts })
    }

    pub fn from_rows(class_names: Vec<String>, rows: &[Vec<u64>]) -> Result<Self> {
        if rows.len() != class_names.len() || rows.iter().any(|r| r.len() != class_names.len()) {
            return Err(Error::shape("confusion", "grid is not square with one row per class"));
        }
        Self::new(class_names, rows.concat())
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn get(&self, predicted: usize, actual: usize) -> u64 {
        self.counts[predicted * self.num_classes() + actual]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes()).map(|j| self.get(j, j)).sum()
    }

    /// Column sums: samples per actual class.
    pub fn actual_totals(&self) -> Vec<u64> {
        let k = self.num_classes();
        (0..k).map(|a| (0..k).map(|p| self.get(p, a)).sum()).collect()
    }

    /// Row sums: samples per predicted class.
    pub fn predicted_totals(&self) -> Vec<u64> {
        let k = self.num_classes();
        (0..k).map(|p| (0..k).map(|a| self.get(p, a)).sum()).collect()
    }

    /// Element-wise sum, e.g. to pool folds.
    pub fn merge(&self, other: &ConfusionMatrix) -> Result<ConfusionMatrix> {
        if self.class_names != other.class_names {
            return Err(Error::invalid("confusion", "cannot merge matrices over different classes"));
        }
        let counts = self.counts.iter().zip(&other.counts).map(|(a, b)| a + b).collect();
        Ok(ConfusionMatrix { class_names: self.class_names.clone(), counts })
    }
}

/// Counts `(predicted, actual)` label pairs.
pub fn confusion(predicted: &[usize], actual: &[usize], class_names: Vec<String>) -> Result<ConfusionMatrix> {
    if predicted.len() != actual.len() {
        return Err(Error::shape("confusion", format!("{} predictions for {} labels", predicted.len(), actual.len())));
    }
    let k = class_names.len();
    let mut cm = ConfusionMatrix::new(class_names, vec![0; k * k])?;
    for (&p, &a) in predicted.iter().zip(actual) {
        if p >= k || a >= k {
            return Err(Error::Label(format!("label pair ({}, {}) outside [0, {})", p, a, k)));
        }
        cm.counts[p * k + a] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub name: String,
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
    /// Actual samples of this class, `tp + fn`.
    pub support: u64,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    /// Set when the recall denominator was zero and 0 was reported.
    pub recall_undefined: bool,
    /// Set when nothing was predicted as this class and 0 was reported.
    pub precision_undefined: bool,
}

impl ClassMetrics {
    fn recall_ratio(&self) -> Ratio<u128> {
        ratio(self.tp, self.support)
    }

    fn precision_ratio(&self) -> Ratio<u128> {
        ratio(self.tp, self.tp + self.fp)
    }

    fn f1_ratio(&self) -> Ratio<u128> {
        ratio(2 * self.tp, 2 * self.tp + self.fn_ + self.fp)
    }
}

/// `num / den` with `x / 0` defined as 0.
fn ratio(num: u64, den: u64) -> Ratio<u128> {
    if den == 0 {
        Ratio::zero()
    } else {
        Ratio::new(num as u128, den as u128)
    }
}

fn to_f64(r: &Ratio<u128>) -> f64 {
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}

/// One-vs-rest counts and metrics for every class.
pub fn per_class_metrics(cm: &ConfusionMatrix) -> Vec<ClassMetrics> {
    let n = cm.total();
    let actual = cm.actual_totals();
    let predicted = cm.predicted_totals();
    (0..cm.num_classes())
        .map(|j| {
            let tp = cm.get(j, j);
            let fn_ = actual[j] - tp;
            let fp = predicted[j] - tp;
            let mut m = ClassMetrics {
                name: cm.class_names[j].clone(),
                tp,
                fn_,
                fp,
                tn: n - tp - fn_ - fp,
                support: actual[j],
                recall: 0.0,
                precision: 0.0,
                f1: 0.0,
                recall_undefined: actual[j] == 0,
                precision_undefined: predicted[j] == 0,
            };
            m.recall = to_f64(&m.recall_ratio());
            m.precision = to_f64(&m.precision_ratio());
            m.f1 = to_f64(&m.f1_ratio());
            m
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Per-class metrics weighted by support.
    #[default]
    Weighted,
    /// Unweighted mean over classes.
    Macro,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub accuracy: f64,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

/// Weighted sum evaluated exactly, falling back to floating point if the
/// common denominator overflows.
fn exact_mean(terms: &[(Ratio<u128>, Ratio<u128>)]) -> f64 {
    let exact = terms.iter().try_fold(Ratio::<u128>::zero(), |acc, (w, m)| acc.checked_add(&w.checked_mul(m)?));
    match exact {
        Some(r) => to_f64(&r),
        None => terms.iter().map(|(w, m)| to_f64(w) * to_f64(m)).sum(),
    }
}

/// Aggregated recall, precision and F1 together with accuracy `trace / N`.
pub fn aggregate(per_class: &[ClassMetrics], mode: Aggregation) -> Summary {
    let n: u64 = per_class.iter().map(|m| m.support).sum();
    let k = per_class.len() as u64;
    let weight = |m: &ClassMetrics| match mode {
        Aggregation::Weighted => ratio(m.support, n),
        Aggregation::Macro => ratio(1, k),
    };
    let mean = |metric: fn(&ClassMetrics) -> Ratio<u128>| {
        exact_mean(&per_class.iter().map(|m| (weight(m), metric(m))).collect::<Vec<_>>())
    };
    Summary {
        accuracy: to_f64(&ratio(per_class.iter().map(|m| m.tp).sum(), n)),
        recall: mean(ClassMetrics::recall_ratio),
        precision: mean(ClassMetrics::precision_ratio),
        f1: mean(ClassMetrics::f1_ratio),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub version: u32,
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassMetrics>,
    pub weighted: Summary,
    #[serde(rename = "macro")]
    pub macro_: Summary,
    pub warnings: Vec<String>,
}

impl MetricsReport {
    pub fn from_confusion(cm: ConfusionMatrix) -> Result<Self> {
        if cm.total() == 0 {
            return Err(Error::invalid("metrics", "confusion matrix is empty"));
        }
        let per_class = per_class_metrics(&cm);
        let mut warnings = Vec::new();
        for m in &per_class {
            if m.recall_undefined {
                warnings.push(format!("class {} has no samples; recall reported as 0", m.name));
            }
            if m.precision_undefined {
                warnings.push(format!("class {} was never predicted; precision reported as 0", m.name));
            }
        }
        Ok(MetricsReport {
            version: REPORT_VERSION,
            weighted: aggregate(&per_class, Aggregation::Weighted),
            macro_: aggregate(&per_class, Aggregation::Macro),
            confusion: cm,
            per_class,
            warnings,
        })
    }

    pub fn summary(&self, mode: Aggregation) -> Summary {
        match mode {
            Aggregation::Weighted => self.weighted,
            Aggregation::Macro => self.macro_,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldAverage {
    pub version: u32,
    pub aggregation: Aggregation,
    pub per_fold: Vec<Summary>,
    pub mean: Summary,
    /// Population standard deviation.
    pub std: Summary,
}

/// Mean and population standard deviation of each metric across folds.
pub fn fold_average(reports: &[MetricsReport], mode: Aggregation) -> Result<FoldAverage> {
    let first = reports.first().ok_or_else(|| Error::invalid("fold_average", "no reports"))?;
    if reports.iter().any(|r| r.confusion.num_classes() != first.confusion.num_classes()) {
        return Err(Error::invalid("fold_average", "reports disagree on the number of classes"));
    }
    let per_fold: Vec<Summary> = reports.iter().map(|r| r.summary(mode)).collect();
    let n = per_fold.len() as f64;
    let stat = |get: fn(&Summary) -> f64| {
        let mean = per_fold.iter().map(get).sum::<f64>() / n;
        let var = per_fold.iter().map(|s| (get(s) - mean) * (get(s) - mean)).sum::<f64>() / n;
        (mean, num_traits::Float::sqrt(var))
    };
    let (a, r, p, f) = (stat(|s| s.accuracy), stat(|s| s.recall), stat(|s| s.precision), stat(|s| s.f1));
    Ok(FoldAverage {
        version: REPORT_VERSION,
        aggregation: mode,
        per_fold,
        mean: Summary { accuracy: a.0, recall: r.0, precision: p.0, f1: f.0 },
        std: Summary { accuracy: a.1, recall: r.1, precision: p.1, f1: f.1 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| i.to_string()).collect()
    }

    fn table(rows: &[&[u64]]) -> ConfusionMatrix {
        let rows: Vec<Vec<u64>> = rows.iter().map(|r| r.to_vec()).collect();
        ConfusionMatrix::from_rows(names(rows.len()), &rows).unwrap()
    }

    #[test]
    fn layouts() {
        let cm = confusion(&[0, 1, 2], &[0, 1, 2], names(3)).unwrap();
        assert_eq!(cm.counts, vec![1, 0, 0, 0, 1, 0, 0, 0, 1]);
        let cm = confusion(&[0, 1], &[1, 0], names(2)).unwrap();
        assert_eq!(cm.counts, vec![0, 1, 1, 0]);
        assert!(confusion(&[2], &[0], names(2)).is_err());
    }

    #[test]
    fn task_one_totals() {
        let mut pred = Vec::new();
        let mut act = Vec::new();
        for (p, a, n) in [(0, 0, 5848), (0, 1, 7), (1, 0, 8), (1, 1, 493)] {
            pred.extend(core::iter::repeat_n(p, n));
            act.extend(core::iter::repeat_n(a, n));
        }
        let cm = confusion(&pred, &act, names(2)).unwrap();
        assert_eq!(cm.counts, vec![5848, 7, 8, 493]);
        let m = per_class_metrics(&cm);
        assert!((m[1].recall - 0.986).abs() < 1e-12);
        assert!((m[1].precision - 493.0 / 501.0).abs() < 1e-12);
    }

    #[test]
    fn all_ones() {
        let m = per_class_metrics(&table(&[&[1, 1], &[1, 1]]));
        assert_eq!((m[0].tp, m[0].fn_, m[0].fp, m[0].tn), (1, 1, 1, 1));
        assert_eq!((m[0].recall, m[0].precision, m[0].f1), (0.5, 0.5, 0.5));
    }

    #[test]
    fn weighted_recall_is_accuracy() {
        let r = MetricsReport::from_confusion(table(&[&[1522, 88, 7], &[126, 4276, 26], &[0, 7, 467]])).unwrap();
        assert_eq!(r.weighted.recall, r.weighted.accuracy);
        assert!((r.weighted.accuracy - 0.9610).abs() < 5e-5);
        assert!((r.per_class[0].recall - 0.9235).abs() < 5e-5);
    }

    #[test]
    fn equal_support_weighted_is_macro() {
        let r = MetricsReport::from_confusion(table(&[&[7, 2], &[3, 8]])).unwrap();
        assert_eq!(r.weighted, r.macro_);
    }

    #[test]
    fn never_predicted_is_flagged() {
        let r = MetricsReport::from_confusion(table(&[&[3, 2], &[0, 0]])).unwrap();
        assert!(r.per_class[1].precision_undefined);
        assert_eq!(r.per_class[1].precision, 0.0);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn fold_average_table_rows() {
        let accs = [0.998, 0.998, 0.996, 0.998, 0.998];
        let reports: Vec<MetricsReport> = accs
            .iter()
            .map(|&a| {
                let mut r = MetricsReport::from_confusion(table(&[&[1, 0], &[0, 1]])).unwrap();
                r.weighted.accuracy = a;
                r
            })
            .collect();
        let avg = fold_average(&reports, Aggregation::Weighted).unwrap();
        assert!((avg.mean.accuracy - 0.9976).abs() < 1e-12);
        assert!((avg.std.accuracy - 0.0008).abs() < 1e-9);
        assert_eq!(avg.std.recall, 0.0);
        let single = fold_average(&reports[..1], Aggregation::Weighted).unwrap();
        assert_eq!(single.mean, reports[0].weighted);
        let other = MetricsReport::from_confusion(table(&[&[1, 0, 0], &[0, 1, 0], &[0, 0, 1]])).unwrap();
        assert!(fold_average(&[reports[0].clone(), other], Aggregation::Weighted).is_err());
    }
}
