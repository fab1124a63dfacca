//! Confusion matrices, per-fold metrics and cross-fold aggregation.
//!
//! Per-class precision, recall and F1 are one-vs-rest; their averages are
//! weighted by true-class support, which makes weighted recall equal to
//! accuracy. MCC uses the K-class confusion-matrix correlation, which
//! reduces to `(TP·TN − FP·FN) / √((TP+FP)(TP+FN)(TN+FP)(TN+FN))` for two
//! classes. Every 0/0 is reported as 0 and flagged.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: Vec<Label>,
    /// `counts[t * K + p]`: rows with truth `classes[t]` predicted `classes[p]`.
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn from_counts(classes: Vec<Label>, counts: Vec<u64>) -> Result<Self> {
        let k = classes.len();
        if counts.len() != k * k {
            return Err(Error::DimensionMismatch {
                expected: k * k,
                actual: counts.len(),
            });
        }
        Ok(Self { classes, counts })
    }

    pub fn classes(&self) -> &[Label] {
        &self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes.len() + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn row_sum(&self, t: usize) -> u64 {
        (0..self.classes.len()).map(|p| self.get(t, p)).sum()
    }

    fn col_sum(&self, p: usize) -> u64 {
        (0..self.classes.len()).map(|t| self.get(t, p)).sum()
    }

    /// One-vs-rest (TP, FP, FN, TN) for class index `c`.
    pub fn one_vs_rest(&self, c: usize) -> (u64, u64, u64, u64) {
        let tp = self.get(c, c);
        let fp = self.col_sum(c) - tp;
        let fn_ = self.row_sum(c) - tp;
        let tn = self.total() - tp - fp - fn_;
        (tp, fp, fn_, tn)
    }

    /// Same matrix with classes listed in `order` (a permutation).
    pub fn reordered(&self, order: &[usize]) -> Self {
        let k = self.classes.len();
        let classes = order.iter().map(|&i| self.classes[i]).collect();
        let mut counts = vec![0; k * k];
        for (a, &ta) in order.iter().enumerate() {
            for (b, &pb) in order.iter().enumerate() {
                counts[a * k + b] = self.get(ta, pb);
            }
        }
        Self { classes, counts }
    }
}

/// Tabulates truth/prediction pairs over a fixed class list.
pub fn confusion_matrix(truth: &[Label], pred: &[Label], classes: &[Label]) -> Result<ConfusionMatrix> {
    if truth.len() != pred.len() {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: pred.len(),
        });
    }
    let k = classes.len();
    let index = |l: Label| classes.iter().position(|&c| c == l).ok_or(Error::UnknownClass(l));
    let mut counts = vec![0u64; k * k];
    for (&t, &p) in truth.iter().zip(pred) {
        counts[index(t)? * k + index(p)?] += 1;
    }
    Ok(ConfusionMatrix {
        classes: classes.to_vec(),
        counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: Label,
    pub support: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// True when at least one of the three rates was 0/0.
    pub undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mcc: f64,
    pub per_class: Vec<ClassMetrics>,
    pub averaging: String,
}

fn ratio(num: f64, den: f64) -> (f64, bool) {
    if den == 0.0 {
        (0.0, true)
    } else {
        (num / den, false)
    }
}

/// Binary MCC from the four cells; 0 when the denominator vanishes.
pub fn binary_mcc(tp: f64, tn: f64, fp: f64, fn_: f64) -> f64 {
    let den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    if den == 0.0 {
        0.0
    } else {
        (tp * tn - fp * fn_) / den
    }
}

/// K-class MCC: `(c·s − Σ p_k t_k) / √((s² − Σ p_k²)(s² − Σ t_k²))` with
/// `c` the trace, `s` the total, `t_k` true and `p_k` predicted counts.
pub fn multiclass_mcc(cm: &ConfusionMatrix) -> f64 {
    let k = cm.classes.len();
    let s = cm.total() as f64;
    let c: f64 = (0..k).map(|i| cm.get(i, i) as f64).sum();
    let t: Vec<f64> = (0..k).map(|i| cm.row_sum(i) as f64).collect();
    let p: Vec<f64> = (0..k).map(|i| cm.col_sum(i) as f64).collect();
    let pt: f64 = p.iter().zip(&t).map(|(a, b)| a * b).sum();
    let pp: f64 = p.iter().map(|a| a * a).sum();
    let tt: f64 = t.iter().map(|a| a * a).sum();
    let den = ((s * s - pp) * (s * s - tt)).sqrt();
    if den == 0.0 {
        0.0
    } else {
        ((c * s - pt) / den).clamp(-1.0, 1.0)
    }
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyMatrix);
    }
    let n = total as f64;
    let mut per_class = Vec::with_capacity(cm.classes.len());
    let (mut wp, mut wr, mut wf) = (0.0, 0.0, 0.0);
    let mut correct = 0;
    for (c, &label) in cm.classes.iter().enumerate() {
        let (tp, fp, fn_, _) = cm.one_vs_rest(c);
        correct += tp;
        let (precision, u1) = ratio(tp as f64, (tp + fp) as f64);
        let (recall, u2) = ratio(tp as f64, (tp + fn_) as f64);
        let (f1, u3) = ratio(2.0 * tp as f64, (2 * tp + fp + fn_) as f64);
        let support = tp + fn_;
        let w = support as f64 / n;
        wp += w * precision;
        wr += w * recall;
        wf += w * f1;
        per_class.push(ClassMetrics {
            label,
            support,
            precision,
            recall,
            f1,
            undefined: u1 || u2 || u3,
        });
    }
    Ok(MetricsReport {
        accuracy: correct as f64 / n,
        precision: wp,
        recall: wr,
        f1: wf,
        mcc: multiclass_mcc(cm),
        per_class,
        averaging: "weighted".into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample (n − 1) standard deviation; exactly 0 for a single fold or
    /// identical values.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let constant = values.windows(2).all(|w| w[0] == w[1]);
        let std = if values.len() > 1 && !constant {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub folds: usize,
    pub accuracy: MeanStd,
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f1: MeanStd,
    pub mcc: MeanStd,
}

pub fn aggregate(fold_reports: &[MetricsReport]) -> Result<AggregateReport> {
    if fold_reports.is_empty() {
        return Err(Error::EmptyInput);
    }
    let col = |f: fn(&MetricsReport) -> f64| MeanStd::of(&fold_reports.iter().map(f).collect::<Vec<_>>());
    Ok(AggregateReport {
        folds: fold_reports.len(),
        accuracy: col(|r| r.accuracy),
        precision: col(|r| r.precision),
        recall: col(|r| r.recall),
        f1: col(|r| r.f1),
        mcc: col(|r| r.mcc),
    })
}

pub const TABLE_HEADER: [&str; 6] = [
    "Model",
    "Mean Accuracy (%)",
    "Mean Precision (%)",
    "Mean Recall (%)",
    "Mean F1-Score (%)",
    "Mean MCC",
];

/// Table cells for one aggregate: rates as percentages with two decimals,
/// MCC with four.
pub fn table_cells(name: &str, a: &AggregateReport) -> [String; 6] {
    let pct = |m: MeanStd| format!("{:.2} ± {:.2}", 100.0 * m.mean, 100.0 * m.std);
    [
        name.to_string(),
        pct(a.accuracy),
        pct(a.precision),
        pct(a.recall),
        pct(a.f1),
        format!("{:.4} ± {:.4}", a.mcc.mean, a.mcc.std),
    ]
}

/// Aligned plain-text table, one row per `(name, aggregate)`.
pub fn render_table(rows: &[(String, AggregateReport)]) -> String {
    let body: Vec<[String; 6]> = rows.iter().map(|(n, a)| table_cells(n, a)).collect();
    let mut widths: Vec<usize> = TABLE_HEADER.iter().map(|h| h.chars().count()).collect();
    for r in &body {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| -> String {
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            let pad = w - cell.chars().count();
            if i == 0 {
                let _ = write!(s, "{cell}{}", " ".repeat(pad));
            } else {
                let _ = write!(s, "{}{cell}", " ".repeat(pad));
            }
        }
        s.trim_end().to_string()
    };
    let header: Vec<String> = TABLE_HEADER.iter().map(|s| s.to_string()).collect();
    let mut out = line(&header);
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for r in &body {
        out.push_str(&line(r));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary(tp: u64, fn_: u64, fp: u64, tn: u64) -> ConfusionMatrix {
        // positive class first
        ConfusionMatrix::from_counts(vec![Label::SE, Label::F], vec![tp, fn_, fp, tn]).unwrap()
    }

    #[test]
    fn diagonal_when_predictions_match() {
        let t = [Label::A, Label::F, Label::F, Label::US];
        let cm = confusion_matrix(&t, &t, &[Label::A, Label::F, Label::US]).unwrap();
        assert_eq!(cm.get(1, 1), 2);
        assert_eq!(cm.total(), 4);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(cm.get(i, j), 0);
                }
            }
        }
        let r = metrics(&cm).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.mcc, 1.0);
        assert!(r.per_class.iter().all(|c| c.f1 == 1.0));
    }

    #[test]
    fn binary_cells() {
        let truth = [Label::SE, Label::SE, Label::F, Label::F];
        let pred = [Label::SE, Label::F, Label::F, Label::SE];
        let cm = confusion_matrix(&truth, &pred, &[Label::SE, Label::F]).unwrap();
        assert_eq!(cm.one_vs_rest(0), (1, 1, 1, 1));
    }

    #[test]
    fn three_class_tally() {
        // Hand tally of 12 rows over (A, F, US).
        let truth = [
            Label::A, Label::A, Label::A, Label::A, Label::F, Label::F, Label::F, Label::F, Label::F, Label::US,
            Label::US, Label::US,
        ];
        let pred = [
            Label::A, Label::A, Label::F, Label::US, Label::F, Label::F, Label::F, Label::A, Label::F, Label::US,
            Label::F, Label::US,
        ];
        let cm = confusion_matrix(&truth, &pred, &[Label::A, Label::F, Label::US]).unwrap();
        let expected = [[2, 1, 1], [1, 4, 0], [0, 1, 2]];
        for (t, row) in expected.iter().enumerate() {
            for (p, &v) in row.iter().enumerate() {
                assert_eq!(cm.get(t, p), v, "cell ({t},{p})");
            }
        }
        let r = metrics(&cm).unwrap();
        assert!((r.accuracy - 8.0 / 12.0).abs() < 1e-15);
        // A: P = 2/3, R = 2/4; F: P = 4/6, R = 4/5; US: P = 2/3, R = 2/3.
        assert!((r.per_class[0].precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.per_class[1].recall - 0.8).abs() < 1e-15);
        let wp = (4.0 * 2.0 / 3.0 + 5.0 * 4.0 / 6.0 + 3.0 * 2.0 / 3.0) / 12.0;
        assert!((r.precision - wp).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            confusion_matrix(&[Label::A], &[], &[Label::A]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            confusion_matrix(&[Label::A], &[Label::F], &[Label::A]),
            Err(Error::UnknownClass(Label::F))
        ));
        let empty = ConfusionMatrix::from_counts(vec![Label::A], vec![0]).unwrap();
        assert!(matches!(metrics(&empty), Err(Error::EmptyMatrix)));
        assert!(matches!(aggregate(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn worked_binary_example() {
        let r = metrics(&binary(50, 5, 5, 40)).unwrap();
        assert!((r.per_class[0].precision - 50.0 / 55.0).abs() < 1e-12);
        assert!((r.per_class[0].recall - 50.0 / 55.0).abs() < 1e-12);
        assert!((r.accuracy - 0.9).abs() < 1e-12);
        assert!((r.mcc - 1975.0 / 2475.0).abs() < 1e-12);
    }

    #[test]
    fn constant_predictor_has_zero_mcc() {
        let r = metrics(&binary(0, 10, 0, 10)).unwrap();
        assert_eq!(r.mcc, 0.0);
        assert!(r.per_class[0].undefined);
        assert_eq!(r.per_class[0].precision, 0.0);
        assert!((r.accuracy - 0.5).abs() < 1e-15);
    }

    #[test]
    fn aggregate_mean_and_sample_std() {
        let mut r = metrics(&binary(7, 3, 3, 7)).unwrap();
        r.accuracy = 0.7;
        let mut s = r.clone();
        s.accuracy = 0.8;
        let a = aggregate(&[r.clone(), s]).unwrap();
        assert!((a.accuracy.mean - 0.75).abs() < 1e-15);
        assert!((a.accuracy.std - 0.005f64.sqrt()).abs() < 1e-15);
        let same = aggregate(&[r.clone(), r.clone(), r]).unwrap();
        assert_eq!(same.mcc.std, 0.0);
        assert_eq!(same.folds, 3);
    }

    #[test]
    fn table_layout() {
        let r = metrics(&binary(50, 5, 5, 40)).unwrap();
        let a = aggregate(&[r]).unwrap();
        let t = render_table(&[("Logistic Regression".into(), a)]);
        let lines: Vec<&str> = t.lines().collect();
        assert!(lines[0].starts_with("Model"));
        assert!(lines[0].ends_with("Mean MCC"));
        assert!(lines[2].starts_with("Logistic Regression"));
        assert!(lines[2].contains("90.00 ± 0.00"));
        assert!(lines[2].ends_with("0.7980 ± 0.0000"));
    }
}
