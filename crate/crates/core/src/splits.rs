use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FafError, Result};

/// One transductive train/val/test partition given as node index lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Seeded random partition of `nodes` into fractions `train` and `val`;
    /// the remainder becomes the test part. Index lists are sorted.
    pub fn random(nodes: &[usize], train: f64, val: f64, seed: u64) -> Self {
        let mut order = nodes.to_vec();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n = order.len();
        let n_train = (train * n as f64).round() as usize;
        let n_val = ((val * n as f64).round() as usize).min(n - n_train);
        let mut train_part = order[..n_train].to_vec();
        let mut val_part = order[n_train..n_train + n_val].to_vec();
        let mut test_part = order[n_train + n_val..].to_vec();
        train_part.sort_unstable();
        val_part.sort_unstable();
        test_part.sort_unstable();
        Self {
            train: train_part,
            val: val_part,
            test: test_part,
        }
    }

    pub fn parts(&self) -> [(&'static str, &[usize]); 3] {
        [
            ("train", &self.train),
            ("val", &self.val),
            ("test", &self.test),
        ]
    }
}

/// Node labels (`-1` = unlabeled) together with one or more splits.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSplits {
    labels: Vec<i64>,
    num_classes: usize,
    splits: Vec<Split>,
}

impl LabeledSplits {
    pub fn new(labels: Vec<i64>, num_classes: usize, splits: Vec<Split>) -> Result<Self> {
        for (v, &y) in labels.iter().enumerate() {
            if y < -1 || y >= num_classes as i64 {
                return Err(FafError::InvalidData(format!(
                    "label {y} of node {v} outside [0, {num_classes})"
                )));
            }
        }
        let num_nodes = labels.len();
        for (s, split) in splits.iter().enumerate() {
            let mut seen = vec![false; num_nodes];
            for (name, part) in split.parts() {
                for &v in part {
                    if v >= num_nodes {
                        return Err(FafError::IndexOutOfRange { index: v, num_nodes });
                    }
                    if seen[v] {
                        return Err(FafError::InvalidData(format!(
                            "split {s}: node {v} appears twice (again in {name})"
                        )));
                    }
                    seen[v] = true;
                }
            }
        }
        Ok(Self {
            labels,
            num_classes,
            splits,
        })
    }

    /// Infers `num_classes` as one past the largest label.
    pub fn from_labels(labels: Vec<i64>, splits: Vec<Split>) -> Result<Self> {
        let num_classes = labels.iter().copied().max().map_or(0, |m| (m + 1).max(0)) as usize;
        Self::new(labels, num_classes, splits)
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn with_splits(&self, splits: Vec<Split>) -> Result<Self> {
        Self::new(self.labels.clone(), self.num_classes, splits)
    }

    pub fn labeled_nodes(&self) -> Vec<usize> {
        (0..self.labels.len()).filter(|&v| self.labels[v] >= 0).collect()
    }
}
