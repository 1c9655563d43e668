//! Accuracy accounting: per-class accuracy, its mean, and the confusion
//! matrix.

use serde::Serialize;

use crate::error::{Error, Result};

/// Evaluation summary for one dataset pass.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    /// A_c per class: correctly classified objects of class c over the
    /// total objects of class c.
    pub per_class_accuracy: Vec<f64>,
    /// Mean of the per-class accuracies.
    pub mean_accuracy: f64,
    /// confusion[label][prediction] counts.
    pub confusion: Vec<Vec<usize>>,
    /// Wall-clock seconds spent classifying each object.
    pub per_object_seconds: Vec<f64>,
}

impl EvalReport {
    /// Build a report from parallel prediction/label lists.
    pub fn new(
        preds: &[usize],
        labels: &[usize],
        n_classes: usize,
        per_object_seconds: Vec<f64>,
    ) -> Result<Self> {
        let per_class = per_class_accuracy(preds, labels, n_classes)?;
        let mean = mean_per_class_accuracy(&per_class)?;
        let mut confusion = vec![vec![0usize; n_classes]; n_classes];
        for (&p, &l) in preds.iter().zip(labels) {
            if p < n_classes {
                confusion[l][p] += 1;
            }
        }
        Ok(Self {
            per_class_accuracy: per_class,
            mean_accuracy: mean,
            confusion,
            per_object_seconds,
        })
    }

    /// Overall (micro) accuracy: confusion trace over total.
    pub fn overall_accuracy(&self) -> f64 {
        let trace: usize = (0..self.confusion.len()).map(|c| self.confusion[c][c]).sum();
        let total: usize = self.confusion.iter().flatten().sum();
        trace as f64 / total as f64
    }

    /// CSV form: one `class,accuracy` row per class plus a mean row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,accuracy\n");
        for (c, a) in self.per_class_accuracy.iter().enumerate() {
            out.push_str(&format!("{c},{a}\n"));
        }
        out.push_str(&format!("mean,{}\n", self.mean_accuracy));
        out
    }
}

/// Exact per-class accuracy. Every class in `0..n_classes` must appear in
/// `labels` at least once.
pub fn per_class_accuracy(
    preds: &[usize],
    labels: &[usize],
    n_classes: usize,
) -> Result<Vec<f64>> {
    if preds.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions vs {} labels",
            preds.len(),
            labels.len()
        )));
    }
    if n_classes == 0 {
        return Err(Error::InvalidArgument("n_classes must be >= 1".into()));
    }
    let mut total = vec![0usize; n_classes];
    let mut correct = vec![0usize; n_classes];
    for (&p, &l) in preds.iter().zip(labels) {
        if l >= n_classes {
            return Err(Error::UnknownClass {
                id: l,
                total: n_classes,
            });
        }
        total[l] += 1;
        if p == l {
            correct[l] += 1;
        }
    }
    if let Some(missing) = total.iter().position(|&t| t == 0) {
        return Err(Error::InvalidArgument(format!(
            "class {missing} has no labeled objects"
        )));
    }
    Ok(correct
        .iter()
        .zip(&total)
        .map(|(&c, &t)| c as f64 / t as f64)
        .collect())
}

/// Arithmetic mean of the per-class accuracies.
pub fn mean_per_class_accuracy(per_class: &[f64]) -> Result<f64> {
    if per_class.is_empty() {
        return Err(Error::Empty("accuracy list"));
    }
    Ok(per_class.iter().sum::<f64>() / per_class.len() as f64)
}
