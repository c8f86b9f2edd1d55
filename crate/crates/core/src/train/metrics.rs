use std::fmt::Write as _;

use ndarray::Array2;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// Rows are true classes, columns predicted classes.
    pub confusion: Array2<u64>,
    pub accuracy: f64,
    pub per_class: Vec<ClassScores>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    pub fn from_confusion(confusion: Array2<u64>) -> Self {
        let c = confusion.nrows();
        let total: u64 = confusion.sum();
        let trace: u64 = (0..c).map(|i| confusion[[i, i]]).sum();
        let per_class: Vec<ClassScores> = (0..c)
            .map(|k| {
                let tp = confusion[[k, k]];
                let predicted: u64 = confusion.column(k).sum();
                let actual: u64 = confusion.row(k).sum();
                let precision = ratio(tp, predicted);
                let recall = ratio(tp, actual);
                let f1 = if precision + recall > 0.0 {
                    2.0 * precision * recall / (precision + recall)
                } else {
                    0.0
                };
                ClassScores {
                    precision,
                    recall,
                    f1,
                    support: actual,
                }
            })
            .collect();
        let mean = |f: fn(&ClassScores) -> f64| per_class.iter().map(f).sum::<f64>() / c.max(1) as f64;
        Self {
            accuracy: ratio(trace, total),
            macro_precision: mean(|s| s.precision),
            macro_recall: mean(|s| s.recall),
            macro_f1: mean(|s| s.f1),
            per_class,
            confusion,
        }
    }

    /// Sums the confusion matrices and rescores.
    pub fn pooled(parts: &[Metrics]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::invalid("nothing to pool"))?;
        let mut confusion = Array2::zeros(first.confusion.raw_dim());
        for m in parts {
            if m.confusion.dim() != confusion.dim() {
                return Err(Error::invalid("confusion matrices differ in class count"));
            }
            confusion += &m.confusion;
        }
        Ok(Self::from_confusion(confusion))
    }

    pub fn total(&self) -> u64 {
        self.confusion.sum()
    }

    /// Plain-text report: accuracy, a per-class table and the macro row.
    /// Per-class "accuracy" is the class recall.
    pub fn to_text(&self, class_names: &[String]) -> String {
        let mut out = String::new();
        writeln!(out, "samples: {}", self.total()).unwrap();
        writeln!(out, "accuracy: {:.6}", self.accuracy).unwrap();
        writeln!(out).unwrap();
        writeln!(
            out,
            "{:<16} {:>10} {:>10} {:>10} {:>10} {:>8}",
            "class", "accuracy", "precision", "recall", "f1", "support"
        )
        .unwrap();
        for (k, s) in self.per_class.iter().enumerate() {
            let name = class_names.get(k).cloned().unwrap_or_else(|| k.to_string());
            writeln!(
                out,
                "{:<16} {:>10.6} {:>10.6} {:>10.6} {:>10.6} {:>8}",
                name, s.recall, s.precision, s.recall, s.f1, s.support
            )
            .unwrap();
        }
        writeln!(
            out,
            "{:<16} {:>10.6} {:>10.6} {:>10.6} {:>10.6} {:>8}",
            "macro",
            self.macro_recall,
            self.macro_precision,
            self.macro_recall,
            self.macro_f1,
            self.total()
        )
        .unwrap();
        out
    }
}

pub fn compute_metrics(predictions: &[usize], targets: &[usize], classes: usize) -> Result<Metrics> {
    if predictions.len() != targets.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    let mut confusion = Array2::zeros((classes, classes));
    for (&p, &t) in predictions.iter().zip(targets) {
        if p >= classes || t >= classes {
            return Err(Error::invalid(format!("label out of range for {classes} classes")));
        }
        confusion[[t, p]] += 1;
    }
    Ok(Metrics::from_confusion(confusion))
}
