use std::collections::{HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use faf_core::reducers::format_reducer_list;
use faf_core::{compile, CompiledFeatures, FafConfig, FeatureMatrix, Graph, HopSelection, LabeledSplits, ReducerKind, Scaling};
use serde::{Deserialize, Serialize};

use crate::error::{MlError, Result};
use crate::metrics::MetricKind;
use crate::mlp::{MlpConfig, Normalization};
use crate::train::train;

/// Cartesian grid over FAF and MLP axes.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub reducer_sets: Vec<Vec<ReducerKind>>,
    pub hops: Vec<usize>,
    pub hop_selection: HopSelection,
    pub scaling: Scaling,
    pub num_layers: Vec<usize>,
    pub hidden_channels: Vec<usize>,
    pub dropout: Vec<f64>,
    pub normalization: Vec<Normalization>,
    pub learning_rate: Vec<f64>,
    pub weight_decay: Vec<f64>,
    pub max_epochs: usize,
    pub seed: u64,
}

impl SweepGrid {
    /// One point: the given FAF and MLP configurations.
    pub fn single(faf: &FafConfig, mlp: &MlpConfig) -> Self {
        SweepGrid {
            reducer_sets: vec![faf.reducers.clone()],
            hops: vec![faf.hops],
            hop_selection: faf.hop_selection,
            scaling: faf.scaling,
            num_layers: vec![mlp.num_layers],
            hidden_channels: vec![mlp.hidden_channels],
            dropout: vec![mlp.dropout],
            normalization: vec![mlp.normalization],
            learning_rate: vec![mlp.learning_rate],
            weight_decay: vec![mlp.weight_decay],
            max_epochs: mlp.max_epochs,
            seed: mlp.seed,
        }
    }

    /// The tuning grid of the reference protocol: 2700 MLP settings for
    /// every FAF setting.
    pub fn reference(faf: &FafConfig, max_epochs: usize, seed: u64) -> Self {
        SweepGrid {
            num_layers: vec![2, 3, 5],
            hidden_channels: vec![64, 256, 512],
            dropout: vec![0.0, 0.2, 0.3, 0.5, 0.7],
            normalization: vec![Normalization::LayerNorm, Normalization::BatchNorm, Normalization::None],
            learning_rate: vec![0.01, 0.005, 0.001, 0.0001],
            weight_decay: vec![0.0, 1e-2, 1e-3, 5e-4, 5e-5],
            ..SweepGrid::single(
                faf,
                &MlpConfig {
                    max_epochs,
                    seed,
                    ..MlpConfig::default()
                },
            )
        }
    }

    pub fn num_mlp_configs(&self) -> usize {
        self.num_layers.len()
            * self.hidden_channels.len()
            * self.dropout.len()
            * self.normalization.len()
            * self.learning_rate.len()
            * self.weight_decay.len()
    }

    pub fn len(&self) -> usize {
        self.reducer_sets.len() * self.hops.len() * self.num_mlp_configs()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn faf_configs(&self) -> Vec<FafConfig> {
        let mut out = Vec::new();
        for reducers in &self.reducer_sets {
            for &hops in &self.hops {
                out.push(
                    FafConfig::new(reducers.clone(), hops)
                        .with_hop_selection(self.hop_selection)
                        .with_scaling(self.scaling),
                );
            }
        }
        out
    }

    pub fn mlp_configs(&self) -> Vec<MlpConfig> {
        let mut out = Vec::new();
        for &num_layers in &self.num_layers {
            for &hidden_channels in &self.hidden_channels {
                for &dropout in &self.dropout {
                    for &normalization in &self.normalization {
                        for &learning_rate in &self.learning_rate {
                            for &weight_decay in &self.weight_decay {
                                out.push(MlpConfig {
                                    num_layers,
                                    hidden_channels,
                                    dropout,
                                    normalization,
                                    learning_rate,
                                    weight_decay,
                                    max_epochs: self.max_epochs,
                                    seed: self.seed,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Every (FAF, MLP) combination, FAF axes outermost.
    pub fn configs(&self) -> Vec<(FafConfig, MlpConfig)> {
        let mlps = self.mlp_configs();
        self.faf_configs()
            .into_iter()
            .flat_map(|f| mlps.iter().map(move |m| (f.clone(), m.clone())))
            .collect()
    }
}

pub fn faf_key(faf: &FafConfig) -> String {
    format!(
        "reducers={};hops={};select={};scale={}",
        format_reducer_list(&faf.reducers),
        faf.hops,
        faf.hop_selection.name(),
        faf.scaling.name()
    )
}

pub fn mlp_key(mlp: &MlpConfig) -> String {
    format!(
        "layers={};hidden={};dropout={};norm={};lr={};wd={};epochs={};seed={}",
        mlp.num_layers,
        mlp.hidden_channels,
        mlp.dropout,
        mlp.normalization.name(),
        mlp.learning_rate,
        mlp.weight_decay,
        mlp.max_epochs,
        mlp.seed
    )
}

pub fn config_key(faf: &FafConfig, mlp: &MlpConfig) -> String {
    format!("{}|{}", faf_key(faf), mlp_key(mlp))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed,
}

/// One (configuration, split) run. Flat so it maps onto a CSV row and a
/// ledger line alike.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_key: String,
    pub split: usize,
    pub reducers: String,
    pub hops: usize,
    pub hop_selection: String,
    pub num_layers: usize,
    pub hidden_channels: usize,
    pub dropout: f64,
    pub normalization: String,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub seed: u64,
    pub status: RunStatus,
    pub val_at_best: Option<f64>,
    pub test_at_best_val: Option<f64>,
    pub train_at_best_val: Option<f64>,
    pub best_val_epoch: Option<usize>,
    pub wall_time_seconds: Option<f64>,
    pub error: Option<String>,
}

impl RunRecord {
    fn pending(faf: &FafConfig, mlp: &MlpConfig, split: usize) -> Self {
        RunRecord {
            config_key: config_key(faf, mlp),
            split,
            reducers: format_reducer_list(&faf.reducers),
            hops: faf.hops,
            hop_selection: faf.hop_selection.name().to_string(),
            num_layers: mlp.num_layers,
            hidden_channels: mlp.hidden_channels,
            dropout: mlp.dropout,
            normalization: mlp.normalization.name().to_string(),
            learning_rate: mlp.learning_rate,
            weight_decay: mlp.weight_decay,
            max_epochs: mlp.max_epochs,
            seed: mlp.seed,
            status: RunStatus::Failed,
            val_at_best: None,
            test_at_best_val: None,
            train_at_best_val: None,
            best_val_epoch: None,
            wall_time_seconds: None,
            error: None,
        }
    }

    pub fn run_key(&self) -> String {
        format!("{}#{}", self.config_key, self.split)
    }
}

/// Per-configuration averages over splits, ranked by mean validation score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rank: usize,
    pub config_key: String,
    pub reducers: String,
    pub hops: usize,
    pub hop_selection: String,
    pub num_layers: usize,
    pub hidden_channels: usize,
    pub dropout: f64,
    pub normalization: String,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub completed: usize,
    pub failed: usize,
    pub mean_val: f64,
    pub std_val: f64,
    pub mean_test: f64,
    pub std_test: f64,
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub metric: MetricKind,
    /// Concurrent runs; at least 1.
    pub jobs: usize,
    /// Append-only JSONL of finished runs; successful runs found here are
    /// not repeated.
    pub ledger: Option<PathBuf>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            metric: MetricKind::Accuracy,
            jobs: 1,
            ledger: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// Latest record per (configuration, split), in grid order.
    pub runs: Vec<RunRecord>,
    pub table: Vec<SweepRow>,
    /// Runs executed by this call (the rest came from the ledger).
    pub executed: usize,
}

impl SweepResult {
    pub fn best(&self) -> Option<&SweepRow> {
        self.table.first()
    }
}

pub fn read_ledger(path: &Path) -> Result<Vec<RunRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let file = File::open(path).map_err(|e| MlError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| MlError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RunRecord = serde_json::from_str(&line)
            .map_err(|e| MlError::InvalidData(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(record);
    }
    Ok(out)
}

fn append_ledger(file: &mut File, path: &Path, record: &RunRecord) -> Result<()> {
    let line = serde_json::to_string(record).expect("record serializes");
    writeln!(file, "{line}").map_err(|e| MlError::io(path, e))?;
    file.flush().map_err(|e| MlError::io(path, e))
}

/// Trains every grid point on every split of `labels`. Individual failures
/// become `Failed` records; only I/O on the ledger aborts the sweep.
pub fn sweep(
    graph: &Graph,
    features: &FeatureMatrix,
    labels: &LabeledSplits,
    grid: &SweepGrid,
    opts: &SweepOptions,
) -> Result<SweepResult> {
    let faf_configs = grid.faf_configs();
    let mlp_configs = grid.mlp_configs();
    let num_splits = labels.splits().len();
    if num_splits == 0 {
        return Err(MlError::DegenerateSplit("no splits to sweep over".into()));
    }

    let previous = match &opts.ledger {
        Some(path) => read_ledger(path)?,
        None => Vec::new(),
    };
    let done: HashSet<String> = previous
        .iter()
        .filter(|r| r.status == RunStatus::Ok)
        .map(RunRecord::run_key)
        .collect();

    // compile each FAF setting once
    let compiled: Vec<std::result::Result<CompiledFeatures, String>> = faf_configs
        .iter()
        .map(|f| compile(graph, features, f).map_err(|e| e.to_string()))
        .collect();

    let mut tasks = Vec::new();
    for (fi, faf) in faf_configs.iter().enumerate() {
        for mlp in &mlp_configs {
            for split in 0..num_splits {
                let record = RunRecord::pending(faf, mlp, split);
                if !done.contains(&record.run_key()) {
                    tasks.push((fi, mlp.clone(), record));
                }
            }
        }
    }

    let mut ledger_file = match &opts.ledger {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|e| MlError::io(parent, e))?;
            }
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| MlError::io(path, e))?;
            Some((file, path.clone()))
        }
        None => None,
    };

    let jobs = opts.jobs.max(1).min(tasks.len().max(1));
    let next = AtomicUsize::new(0);
    let mut fresh = Vec::with_capacity(tasks.len());
    let (tx, rx) = mpsc::channel::<RunRecord>();
    std::thread::scope(|scope| -> Result<()> {
        for _ in 0..jobs {
            let tx = tx.clone();
            let (tasks, compiled, next) = (&tasks, &compiled, &next);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((fi, mlp, pending)) = tasks.get(i) else { break };
                let record = run_one(&compiled[*fi], labels, mlp, pending.clone(), opts.metric);
                if tx.send(record).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for record in rx {
            if let Some((file, path)) = ledger_file.as_mut() {
                append_ledger(file, path, &record)?;
            }
            fresh.push(record);
        }
        Ok(())
    })?;
    let executed = fresh.len();

    // latest record per run wins
    let mut latest: HashMap<String, RunRecord> = HashMap::new();
    for record in previous.into_iter().chain(fresh) {
        latest.insert(record.run_key(), record);
    }
    let mut runs = Vec::new();
    for faf in &faf_configs {
        for mlp in &mlp_configs {
            for split in 0..num_splits {
                let key = RunRecord::pending(faf, mlp, split).run_key();
                if let Some(r) = latest.remove(&key) {
                    runs.push(r);
                }
            }
        }
    }
    let table = aggregate(&runs);
    Ok(SweepResult { runs, table, executed })
}

fn run_one(
    compiled: &std::result::Result<CompiledFeatures, String>,
    labels: &LabeledSplits,
    mlp: &MlpConfig,
    mut record: RunRecord,
    metric: MetricKind,
) -> RunRecord {
    let outcome = match compiled {
        Ok(features) => train(features, labels, record.split, mlp, metric).map_err(|e| e.to_string()),
        Err(e) => Err(e.clone()),
    };
    match outcome {
        Ok(out) => {
            let r = out.report;
            record.status = RunStatus::Ok;
            record.val_at_best = Some(r.val_at_best);
            record.test_at_best_val = Some(r.test_at_best_val);
            record.train_at_best_val = Some(r.train_at_best_val);
            record.best_val_epoch = Some(r.best_val_epoch);
            record.wall_time_seconds = Some(r.wall_time_seconds);
        }
        Err(e) => {
            record.status = RunStatus::Failed;
            record.error = Some(e);
        }
    }
    record
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Groups runs by configuration (first-seen order) and ranks by mean
/// validation score. Ties and all-failed configurations keep grid order.
pub fn aggregate(runs: &[RunRecord]) -> Vec<SweepRow> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<&RunRecord>> = HashMap::new();
    for r in runs {
        groups
            .entry(&r.config_key)
            .or_insert_with(|| {
                order.push(&r.config_key);
                Vec::new()
            })
            .push(r);
    }
    let mut rows: Vec<SweepRow> = order
        .iter()
        .map(|key| {
            let members = &groups[key];
            let ok: Vec<&&RunRecord> = members.iter().filter(|r| r.status == RunStatus::Ok).collect();
            let vals: Vec<f64> = ok.iter().filter_map(|r| r.val_at_best).collect();
            let tests: Vec<f64> = ok.iter().filter_map(|r| r.test_at_best_val).collect();
            let (mean_val, std_val) = mean_std(&vals);
            let (mean_test, std_test) = mean_std(&tests);
            let first = members[0];
            SweepRow {
                rank: 0,
                config_key: first.config_key.clone(),
                reducers: first.reducers.clone(),
                hops: first.hops,
                hop_selection: first.hop_selection.clone(),
                num_layers: first.num_layers,
                hidden_channels: first.hidden_channels,
                dropout: first.dropout,
                normalization: first.normalization.clone(),
                learning_rate: first.learning_rate,
                weight_decay: first.weight_decay,
                completed: ok.len(),
                failed: members.len() - ok.len(),
                mean_val,
                std_val,
                mean_test,
                std_test,
            }
        })
        .collect();
    // NaN (nothing completed) sorts last
    rows.sort_by(|a, b| match (a.mean_val.is_nan(), b.mean_val.is_nan()) {
        (false, false) => b.mean_val.total_cmp(&a.mean_val),
        (x, y) => x.cmp(&y),
    });
    for (i, row) in rows.iter_mut().enumerate() {
        row.rank = i + 1;
    }
    rows
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| MlError::io(parent, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| MlError::InvalidData(format!("{}: {e}", path.display())))?;
    for row in rows {
        w.serialize(row)
            .map_err(|e| MlError::InvalidData(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| MlError::io(path, e))
}

pub fn write_runs_csv(path: &Path, runs: &[RunRecord]) -> Result<()> {
    write_csv(path, runs)
}

pub fn write_table_csv(path: &Path, table: &[SweepRow]) -> Result<()> {
    write_csv(path, table)
}
