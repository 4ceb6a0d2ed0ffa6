use serde::{Deserialize, Serialize};

use super::{EvalError, Result};

/// Binary confusion counts with class 1 (ASD) as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn from_predictions(preds: &[usize], labels: &[usize]) -> Result<Self> {
        if preds.len() != labels.len() {
            return Err(EvalError::LengthMismatch {
                expected: labels.len(),
                got: preds.len(),
            });
        }
        let mut c = Confusion::default();
        for (&p, &y) in preds.iter().zip(labels) {
            match (p == 1, y == 1) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

pub fn accuracy(preds: &[usize], labels: &[usize]) -> Result<f64> {
    let c = Confusion::from_predictions(preds, labels)?;
    if c.total() == 0 {
        return Err(EvalError::EmptyResult("prediction"));
    }
    Ok((c.tp + c.tn) as f64 / c.total() as f64)
}

/// Returns the precision and whether it was forced to 0 because nothing was
/// predicted positive.
pub fn precision(preds: &[usize], labels: &[usize]) -> Result<(f64, bool)> {
    let c = Confusion::from_predictions(preds, labels)?;
    if c.tp + c.fp == 0 {
        return Ok((0.0, true));
    }
    Ok((c.tp as f64 / (c.tp + c.fp) as f64, false))
}

pub fn recall(preds: &[usize], labels: &[usize]) -> Result<f64> {
    let c = Confusion::from_predictions(preds, labels)?;
    if c.tp + c.fn_ == 0 {
        return Err(EvalError::NoPositives);
    }
    Ok(c.tp as f64 / (c.tp + c.fn_) as f64)
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Mann-Whitney AUC from average ranks. Ties between a positive and a
/// negative count one half.
pub fn auc(scores: &[f64], labels: &[usize]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(EvalError::InvalidArgument("NaN score".into()));
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::OneClassOnly(labels.first().copied().unwrap_or(0)));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Ranks are doubled so tie averages stay integral.
    let mut rank_sum2: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg2 = (i + 1 + j + 1) as u64;
        rank_sum2 += avg2 * order[i..=j].iter().filter(|&&o| labels[o] == 1).count() as u64;
        i = j + 1;
    }
    let u2 = rank_sum2 - (n_pos * (n_pos + 1)) as u64;
    Ok(u2 as f64 / 2.0 / (n_pos * n_neg) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
}

impl MetricSet {
    /// Metrics from positive-class probabilities, predicting ASD when the
    /// probability exceeds one half.
    pub fn from_scores(scores: &[f64], labels: &[usize]) -> Result<Self> {
        let preds: Vec<usize> = scores.iter().map(|&s| usize::from(s > 0.5)).collect();
        let (precision, _) = precision(&preds, labels)?;
        let recall = recall(&preds, labels)?;
        Ok(Self {
            accuracy: accuracy(&preds, labels)?,
            precision,
            recall,
            f1: f1(precision, recall),
            auc: auc(scores, labels)?,
        })
    }

    pub fn values(&self) -> [f64; 5] {
        [self.accuracy, self.precision, self.recall, self.f1, self.auc]
    }

    pub fn from_values(v: [f64; 5]) -> Self {
        Self {
            accuracy: v[0],
            precision: v[1],
            recall: v[2],
            f1: v[3],
            auc: v[4],
        }
    }
}
