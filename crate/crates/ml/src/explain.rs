use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use faf_core::{ColumnSource, CompiledFeatures, Provenance};
use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MlError, Result};
use crate::metrics::{evaluate, MetricKind};
use crate::mlp::Classifier;

pub const MIN_MASK: usize = 10;
pub const DEFAULT_REPEATS: usize = 5;

#[derive(Debug, Clone)]
pub struct ImportanceOptions {
    pub metric: MetricKind,
    pub repeats: usize,
    pub seed: u64,
    /// Columns scored concurrently; results do not depend on it.
    pub jobs: usize,
}

impl Default for ImportanceOptions {
    fn default() -> Self {
        ImportanceOptions {
            metric: MetricKind::Accuracy,
            repeats: DEFAULT_REPEATS,
            seed: 0,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnImportance {
    pub column: usize,
    pub hop: usize,
    pub reducer: ColumnSource,
    pub base_feature: usize,
    pub provenance: Provenance,
    /// Mean metric drop over the repeats, clamped at zero.
    pub importance: f64,
}

impl ColumnImportance {
    /// `base`, a reducer name, or `<provenance>:<reducer>` for rewired blocks.
    pub fn label(&self) -> String {
        let source = match self.reducer {
            ColumnSource::Base => "base".to_string(),
            ColumnSource::Reducer(kind) => kind.name().to_string(),
        };
        match self.provenance {
            Provenance::Original => source,
            other => format!("{}:{source}", provenance_name(other)),
        }
    }
}

fn provenance_name(p: Provenance) -> &'static str {
    match p {
        Provenance::Original => "original",
        Provenance::Rew => "rew",
        Provenance::SpPos => "sp_pos",
        Provenance::SpNeg => "sp_neg",
    }
}

/// Importance of one base feature at one hop, summed over reducers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellImportance {
    pub hop: usize,
    pub base_feature: usize,
    pub importance: f64,
    /// 1 = most important within the hop; ties go to the lower feature index.
    pub rank_in_hop: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub metric_drop_basis: MetricKind,
    pub num_repeats: usize,
    pub seed: u64,
    pub mask_size: usize,
    pub baseline: f64,
    pub num_base_features: usize,
    pub columns: Vec<ColumnImportance>,
    /// Ordered by hop, then base feature.
    pub cells: Vec<CellImportance>,
}

impl ImportanceReport {
    pub fn cell(&self, hop: usize, base_feature: usize) -> Option<&CellImportance> {
        self.cells.iter().find(|c| c.hop == hop && c.base_feature == base_feature)
    }

    pub fn hops(&self) -> Vec<usize> {
        let mut hops: Vec<usize> = self.cells.iter().map(|c| c.hop).collect();
        hops.dedup();
        hops
    }

    /// Cells by decreasing importance; ties by (hop, feature).
    pub fn ranked_cells(&self) -> Vec<&CellImportance> {
        let mut cells: Vec<&CellImportance> = self.cells.iter().collect();
        cells.sort_by(|a, b| b.importance.total_cmp(&a.importance));
        cells
    }

    /// Total importance of each base feature across hops.
    pub fn feature_totals(&self) -> Vec<f64> {
        let mut totals = vec![0.0; self.num_base_features];
        for c in &self.cells {
            totals[c.base_feature] += c.importance;
        }
        totals
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Permutation importance of every compiled column on `mask`. Each column
/// is shuffled within the mask `repeats` times with a stream derived from
/// `(seed, column)`; the stored features are never modified.
pub fn permutation_importance<C: Classifier + Sync>(
    model: &C,
    features: &CompiledFeatures,
    labels: &[i64],
    mask: &[usize],
    opts: &ImportanceOptions,
) -> Result<ImportanceReport> {
    if mask.len() < MIN_MASK {
        return Err(MlError::InvalidData(format!(
            "importance needs at least {MIN_MASK} labeled nodes in the mask, got {}",
            mask.len()
        )));
    }
    if opts.repeats == 0 {
        return Err(MlError::InvalidConfig("repeats must be at least 1".into()));
    }
    if labels.len() != features.num_nodes() {
        return Err(MlError::DimensionMismatch {
            expected: features.num_nodes(),
            found: labels.len(),
        });
    }
    if let Some(&v) = mask.iter().find(|&&v| v >= labels.len() || labels[v] < 0) {
        return Err(MlError::InvalidData(format!("mask node {v} is unlabeled or out of range")));
    }

    // rows restricted to the mask, relabelled 0..m
    let x = features.matrix().select(Axis(0), mask);
    let local_labels: Vec<i64> = mask.iter().map(|&v| labels[v]).collect();
    let rows: Vec<usize> = (0..mask.len()).collect();
    let score = |m: &Array2<f64>| -> Result<f64> {
        evaluate(model.predict_logits(m.view()).view(), &local_labels, &rows, opts.metric)
    };
    let baseline = score(&x)?;

    let dim = features.dim();
    let drops: Mutex<Vec<Option<Result<f64>>>> = Mutex::new((0..dim).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let column_drop = |j: usize| -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(j as u64);
        let original = x.column(j).to_vec();
        let mut work = x.clone();
        let mut total = 0.0;
        for _ in 0..opts.repeats {
            let mut shuffled = original.clone();
            shuffled.shuffle(&mut rng);
            work.column_mut(j).assign(&ndarray::ArrayView1::from(&shuffled));
            total += baseline - score(&work)?;
        }
        Ok((total / opts.repeats as f64).max(0.0))
    };
    std::thread::scope(|scope| {
        for _ in 0..opts.jobs.max(1).min(dim.max(1)) {
            scope.spawn(|| loop {
                let j = next.fetch_add(1, Ordering::Relaxed);
                if j >= dim {
                    break;
                }
                let d = column_drop(j);
                drops.lock().expect("no poisoned workers")[j] = Some(d);
            });
        }
    });

    let mut columns = Vec::with_capacity(dim);
    for (j, (desc, d)) in features
        .columns()
        .iter()
        .zip(drops.into_inner().expect("no poisoned workers"))
        .enumerate()
    {
        columns.push(ColumnImportance {
            column: j,
            hop: desc.hop,
            reducer: desc.reducer,
            base_feature: desc.base_feature,
            provenance: desc.provenance,
            importance: d.expect("every column scored")?,
        });
    }
    let num_base_features = features.num_base_features();
    let cells = aggregate_cells(&columns, num_base_features);
    Ok(ImportanceReport {
        metric_drop_basis: opts.metric,
        num_repeats: opts.repeats,
        seed: opts.seed,
        mask_size: mask.len(),
        baseline,
        num_base_features,
        columns,
        cells,
    })
}

/// Sums column scores per (hop, base feature) in column order and ranks
/// features within each hop.
pub fn aggregate_cells(columns: &[ColumnImportance], num_base_features: usize) -> Vec<CellImportance> {
    let mut sums: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for c in columns {
        sums.entry(c.hop).or_insert_with(|| vec![0.0; num_base_features])[c.base_feature] += c.importance;
    }
    let mut cells = Vec::new();
    for (hop, scores) in sums {
        let ranks = rank_descending(&scores);
        for (f, (&importance, rank)) in scores.iter().zip(ranks).enumerate() {
            cells.push(CellImportance {
                hop,
                base_feature: f,
                importance,
                rank_in_hop: rank,
            });
        }
    }
    cells
}

/// 1-based ranks by decreasing score; equal scores keep index order.
fn rank_descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut ranks = vec![0; scores.len()];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r + 1;
    }
    ranks
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopStackRow {
    pub base_feature: usize,
    pub hop: usize,
    pub reducer: String,
    pub importance: f64,
    pub rank_in_hop: usize,
}

/// Plot-ready rows: base features by decreasing total importance (ties by
/// index), then hops ascending, one row per contributing column.
pub fn hop_stack_report(report: &ImportanceReport) -> Vec<HopStackRow> {
    let totals = report.feature_totals();
    let mut features: Vec<usize> = (0..report.num_base_features).collect();
    features.sort_by(|&a, &b| totals[b].total_cmp(&totals[a]));
    let mut rows = Vec::new();
    for f in features {
        for hop in report.hops() {
            let rank = report.cell(hop, f).map_or(0, |c| c.rank_in_hop);
            for c in report.columns.iter().filter(|c| c.hop == hop && c.base_feature == f) {
                rows.push(HopStackRow {
                    base_feature: f,
                    hop,
                    reducer: c.label(),
                    importance: c.importance,
                    rank_in_hop: rank,
                });
            }
        }
    }
    rows
}

pub fn write_hop_stack_csv(path: &Path, rows: &[HopStackRow]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| MlError::io(parent, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| MlError::InvalidData(format!("{}: {e}", path.display())))?;
    for row in rows {
        w.serialize(row)
            .map_err(|e| MlError::InvalidData(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| MlError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_break_ties_by_index() {
        assert_eq!(rank_descending(&[0.0, 0.0, 0.0]), vec![1, 2, 3]);
        assert_eq!(rank_descending(&[0.1, 0.5, 0.1, 0.7]), vec![3, 2, 4, 1]);
    }
}
