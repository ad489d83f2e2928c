use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;

use super::{Aggregation, ConfusionMatrix, FoldAverage, MetricsReport};
use crate::{Error, Result};

const CORNER: &str = "predicted\\actual";

/// CSV grid with a header row and column of class names; rows are predicted.
pub fn render_confusion_csv(cm: &ConfusionMatrix) -> String {
    let k = cm.num_classes();
    let mut out = String::from(CORNER);
    for name in &cm.class_names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for p in 0..k {
        out.push_str(&cm.class_names[p]);
        for a in 0..k {
            let _ = write!(out, ",{}", cm.get(p, a));
        }
        out.push('\n');
    }
    out
}

/// Parses the grid written by [`render_confusion_csv`]. The corner cell is
/// ignored; row and column names must agree. Blank lines and `#` comments
/// are skipped.
pub fn parse_confusion_csv(text: &str) -> Result<ConfusionMatrix> {
    let rows: Vec<Vec<&str>> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.split(',').map(str::trim).collect())
        .collect();
    let header = rows.first().ok_or_else(|| Error::invalid("confusion_csv", "empty input"))?;
    let k = header.len().saturating_sub(1);
    if rows.len() != k + 1 {
        return Err(Error::shape("confusion_csv", format!("{} data rows for {} columns", rows.len() - 1, k)));
    }
    let names: Vec<String> = header[1..].iter().map(|s| s.to_string()).collect();
    let mut counts = Vec::with_capacity(k * k);
    for (i, row) in rows[1..].iter().enumerate() {
        if row.len() != k + 1 {
            return Err(Error::shape("confusion_csv", format!("row {} has {} cells, expected {}", i + 1, row.len(), k + 1)));
        }
        if row[0] != names[i] {
            return Err(Error::invalid("confusion_csv", format!("row {} is `{}`, column is `{}`", i + 1, row[0], names[i])));
        }
        for cell in &row[1..] {
            let v = cell
                .parse::<u64>()
                .map_err(|_| Error::invalid("confusion_csv", format!("`{}` is not a non-negative integer", cell)))?;
            counts.push(v);
        }
    }
    ConfusionMatrix::new(names, counts)
}

fn pad(out: &mut String, s: &str, width: usize) {
    let _ = write!(out, "{:>width$}", s, width = width);
}

/// Human-readable report. Confusion cells read `count / pct%` where the
/// percentage is of the actual-class column total.
pub fn render_text(report: &MetricsReport) -> String {
    let cm = &report.confusion;
    let k = cm.num_classes();
    let cols = cm.actual_totals();
    let cell = |p: usize, a: usize| {
        let pct = if cols[a] == 0 { 0.0 } else { 100.0 * cm.get(p, a) as f64 / cols[a] as f64 };
        format!("{} / {:.2}%", cm.get(p, a), pct)
    };
    let name_w = cm.class_names.iter().map(|n| n.len()).max().unwrap_or(0).max(9);
    let cell_w = (0..k * k).map(|i| cell(i / k, i % k).len()).chain(cm.class_names.iter().map(|n| n.len())).max().unwrap_or(0) + 2;

    let mut out = String::new();
    let _ = writeln!(out, "Confusion matrix (rows: predicted, columns: actual), N = {}", cm.total());
    pad(&mut out, "", name_w);
    for name in &cm.class_names {
        pad(&mut out, name, cell_w);
    }
    out.push('\n');
    for p in 0..k {
        pad(&mut out, &cm.class_names[p], name_w);
        for a in 0..k {
            pad(&mut out, &cell(p, a), cell_w);
        }
        out.push('\n');
    }
    out.push('\n');
    let _ = writeln!(out, "{:>name_w$} {:>8} {:>9} {:>9} {:>9}", "class", "support", "recall", "precision", "f1", name_w = name_w);
    for m in &report.per_class {
        let _ = writeln!(
            out,
            "{:>name_w$} {:>8} {:>9.4} {:>9.4} {:>9.4}",
            m.name,
            m.support,
            m.recall,
            m.precision,
            m.f1,
            name_w = name_w
        );
    }
    out.push('\n');
    for (label, s) in [("weighted", report.weighted), ("macro", report.macro_)] {
        let _ = writeln!(
            out,
            "{:>name_w$} accuracy {:.4}  recall {:.4}  precision {:.4}  f1 {:.4}",
            label,
            s.accuracy,
            s.recall,
            s.precision,
            s.f1,
            name_w = name_w
        );
    }
    for w in &report.warnings {
        let _ = writeln!(out, "warning: {}", w);
    }
    out
}

/// Per-fold rows followed by an `Average` row of `mean ± std`.
pub fn render_fold_average(avg: &FoldAverage) -> String {
    let mut out = String::new();
    let mode = match avg.aggregation {
        Aggregation::Weighted => "weighted",
        Aggregation::Macro => "macro",
    };
    let _ = writeln!(out, "{:>8} {:>15} {:>15} {:>15} {:>15}   ({})", "fold", "recall", "precision", "f1", "accuracy", mode);
    for (i, s) in avg.per_fold.iter().enumerate() {
        let _ = writeln!(out, "{:>8} {:>15.3} {:>15.3} {:>15.3} {:>15.3}", i + 1, s.recall, s.precision, s.f1, s.accuracy);
    }
    let pm = |m: f64, s: f64| format!("{:.3} ± {:.3}", m, s);
    let (m, s) = (&avg.mean, &avg.std);
    let _ = writeln!(
        out,
        "{:>8} {:>15} {:>15} {:>15} {:>15}",
        "Average",
        pm(m.recall, s.recall),
        pm(m.precision, s.precision),
        pm(m.f1, s.f1),
        pm(m.accuracy, s.accuracy)
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn task_one() -> ConfusionMatrix {
        ConfusionMatrix::new(vec!["NOR".into(), "NCP".into()], vec![5848, 7, 8, 493]).unwrap()
    }

    #[test]
    fn csv_roundtrip() {
        let cm = task_one();
        let text = render_confusion_csv(&cm);
        assert_eq!(parse_confusion_csv(&text).unwrap(), cm);
    }

    #[test]
    fn csv_errors() {
        assert!(parse_confusion_csv("x,a,b\na,1,2\n").is_err());
        assert!(parse_confusion_csv("x,a,b\na,1,2\nb,3\n").is_err());
        assert!(parse_confusion_csv("x,a,b\na,1,2\nc,3,4\n").is_err());
        assert!(parse_confusion_csv("x,a,b\na,1,-2\nb,3,4\n").is_err());
    }

    #[test]
    fn text_cells() {
        let text = render_text(&MetricsReport::from_confusion(task_one()).unwrap());
        for needle in ["5848 / 99.86%", "7 / 1.40%", "8 / 0.14%", "493 / 98.60%"] {
            assert!(text.contains(needle), "{}", needle);
        }
    }
}
