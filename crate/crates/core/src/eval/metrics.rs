use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Label;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// Accuracy, precision, recall and F1 for one prediction vector. A ratio
/// with a zero denominator is reported as 0 and flagged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: Confusion,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
}

fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

pub fn compute_metrics(predicted: &[Label], truth: &[Label], positive: Label) -> Result<Metrics> {
    if predicted.len() != truth.len() {
        return Err(Error::dim(
            "compute_metrics",
            format!("{} predictions for {} labels", predicted.len(), truth.len()),
        ));
    }
    if predicted.is_empty() {
        return Err(Error::InvalidInput("metrics need at least one prediction".into()));
    }
    let mut c = Confusion::default();
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p == positive, t == positive) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    let (accuracy, _) = ratio(c.tp + c.tn, predicted.len());
    let (precision, precision_undefined) = ratio(c.tp, c.tp + c.fp);
    let (recall, recall_undefined) = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(Metrics {
        accuracy,
        precision,
        recall,
        f1,
        confusion: c,
        precision_undefined,
        recall_undefined,
    })
}
