use serde::{Deserialize, Serialize};

use crate::corpus::LabelScheme;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    /// Root mean squared difference between predicted and true class ids.
    pub rmse: f64,
    /// Per-class recall, indexed by class id.
    pub tp_rate: Vec<f64>,
    /// Classes with no true samples; their TP-rate is reported as 0.
    pub empty_classes: Vec<usize>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub n: usize,
}

pub fn metrics(predictions: &[usize], labels: &[usize], scheme: LabelScheme) -> Result<MetricsReport> {
    if predictions.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            op: "metrics",
            detail: format!("{} predictions vs {} labels", predictions.len(), labels.len()),
        });
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput("metrics"));
    }
    let classes = scheme.num_classes();
    let mut confusion = vec![vec![0usize; classes]; classes];
    let mut squared: u64 = 0;
    for (&p, &l) in predictions.iter().zip(labels) {
        for c in [p, l] {
            if c >= classes {
                return Err(Error::LabelOutOfRange { label: c, classes });
            }
        }
        confusion[l][p] += 1;
        let d = p.abs_diff(l) as u64;
        squared += d * d;
    }
    let n = labels.len();
    let correct: usize = (0..classes).map(|c| confusion[c][c]).sum();
    let mut tp_rate = vec![0.0; classes];
    let mut empty_classes = Vec::new();
    for (c, row) in confusion.iter().enumerate() {
        let total: usize = row.iter().sum();
        if total == 0 {
            empty_classes.push(c);
        } else {
            tp_rate[c] = row[c] as f64 / total as f64;
        }
    }
    Ok(MetricsReport {
        accuracy: correct as f64 / n as f64,
        rmse: (squared as f64 / n as f64).sqrt(),
        tp_rate,
        empty_classes,
        confusion,
        n,
    })
}
