use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{MlError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Accuracy,
    RocAuc,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Accuracy => "accuracy",
            MetricKind::RocAuc => "roc_auc",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = MlError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "accuracy" | "acc" => Ok(MetricKind::Accuracy),
            "roc_auc" | "rocauc" | "auc" => Ok(MetricKind::RocAuc),
            other => Err(MlError::InvalidConfig(format!("unknown metric {other:?}"))),
        }
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (i, v) in row.into_iter().enumerate() {
        if v > best_value {
            best = i;
            best_value = v;
        }
    }
    best
}

pub fn accuracy(logits: ArrayView2<'_, f64>, labels: &[i64], rows: &[usize]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let correct = rows
        .iter()
        .filter(|&&v| argmax(logits.row(v).iter().copied()) as i64 == labels[v])
        .count();
    correct as f64 / rows.len() as f64
}

/// Rank-based ROC-AUC: the probability that a random positive outscores a
/// random negative, ties counting one half. Labels must be 0 or 1.
pub fn roc_auc(scores: &[f64], labels: &[i64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(MlError::DimensionMismatch {
            expected: scores.len(),
            found: labels.len(),
        });
    }
    if let Some(&y) = labels.iter().find(|&&y| y != 0 && y != 1) {
        return Err(MlError::InvalidData(format!("ROC-AUC needs binary labels, found {y}")));
    }
    let positives = labels.iter().filter(|&&y| y == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        let class = labels.first().copied().unwrap_or(0);
        return Err(MlError::SingleClass { class });
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));

    // sum of (1-based, tie-averaged) ranks of the positives
    let mut positive_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let average_rank = (i + 1 + j) as f64 / 2.0;
        let tied_positives = order[i..j].iter().filter(|&&k| labels[k] == 1).count();
        positive_rank_sum += average_rank * tied_positives as f64;
        i = j;
    }
    let p = positives as f64;
    Ok((positive_rank_sum - p * (p + 1.0) / 2.0) / (p * negatives as f64))
}

/// Metric of `logits` on `rows`. For ROC-AUC the score of a row is the
/// margin of class 1 over class 0.
pub fn evaluate(
    logits: ArrayView2<'_, f64>,
    labels: &[i64],
    rows: &[usize],
    kind: MetricKind,
) -> Result<f64> {
    match kind {
        MetricKind::Accuracy => Ok(accuracy(logits, labels, rows)),
        MetricKind::RocAuc => {
            if logits.ncols() != 2 {
                return Err(MlError::InvalidData(format!(
                    "ROC-AUC needs two-class logits, found {} columns",
                    logits.ncols()
                )));
            }
            let scores: Vec<f64> = rows.iter().map(|&v| logits[[v, 1]] - logits[[v, 0]]).collect();
            let subset: Vec<i64> = rows.iter().map(|&v| labels[v]).collect();
            roc_auc(&scores, &subset)
        }
    }
}
