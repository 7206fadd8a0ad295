use std::path::Path;
use std::time::Instant;

use faf_core::io::{
    load_features, load_graph, load_labels, load_splits, save_features_binary, save_features_csv, save_graph,
    save_json, save_labels, save_splits, write_text,
};
use faf_core::reducers::format_reducer_list;
use faf_core::synth::{
    gen_fig4_tree, gen_minesweeper, gen_planted_partition, gen_xor, Dataset, MinesweeperSpec, PlantedPartitionSpec,
};
use faf_core::{compile_with_timing, CompiledFeatures, FeatureMatrix, Graph, LabeledSplits};
use faf_ml::explain::write_hop_stack_csv;
use faf_ml::sweep::{write_runs_csv, write_table_csv};
use faf_ml::{
    hop_stack_report, permutation_importance, sweep, train, ImportanceOptions, ImportanceReport, SweepGrid,
    SweepOptions, SweepResult, TrainReport,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::experiments::{ablation_settings, results_table, run_settings, Ablation, DatasetRef, Setting, SettingResult};
use crate::table::{num, Table};
use crate::verify::{self, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    Minesweeper,
    Fig4,
    Sbm,
    Xor,
}

/// Graph and features, plus labels and splits when configured.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub graph: Graph,
    pub features: FeatureMatrix,
    pub labels: Option<LabeledSplits>,
}

impl LoadedData {
    pub fn labeled(&self) -> Result<&LabeledSplits> {
        self.labels
            .as_ref()
            .ok_or_else(|| CliError::Usage("this command needs labels and splits (set data, or labels and splits)".into()))
    }
}

pub fn load_data(cfg: &RunConfig) -> Result<LoadedData> {
    let paths = cfg.data_paths()?;
    let graph = load_graph(&paths.graph)?;
    let features = load_features(&paths.features, graph.num_nodes())?;
    let labels = match (&paths.labels, &paths.splits) {
        (Some(_), None) | (None, Some(_)) if cfg.is_set("labels") || cfg.is_set("splits") => {
            return Err(CliError::Usage("labels and splits must be given together".into()));
        }
        (Some(l), Some(s)) if l.exists() || cfg.is_set("labels") => {
            let labels = load_labels(l)?;
            if labels.len() != graph.num_nodes() {
                return Err(CliError::Data(format!(
                    "{} labels for a graph with {} nodes",
                    labels.len(),
                    graph.num_nodes()
                )));
            }
            Some(LabeledSplits::from_labels(labels, load_splits(s)?)?)
        }
        _ => None,
    };
    Ok(LoadedData {
        graph,
        features,
        labels,
    })
}

fn write_echo(cfg: &RunConfig, out: &Path) -> Result<()> {
    write_text(out.join("config.txt"), &cfg.echo())?;
    Ok(())
}

fn json_to<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    save_json(value, path)?;
    Ok(())
}

pub fn synth_dataset(cfg: &RunConfig, kind: SynthKind) -> Result<Option<Dataset>> {
    let seed = cfg.seed()?;
    Ok(match kind {
        SynthKind::Minesweeper => Some(gen_minesweeper(&MinesweeperSpec {
            side: cfg.parsed("side")?,
            mine_rate: cfg.parsed("mine_rate")?,
            mask_rate: cfg.parsed("mask_rate")?,
            seed,
        })?),
        SynthKind::Sbm => Some(gen_planted_partition(&PlantedPartitionSpec {
            n_per_class: cfg.parsed("n_per_class")?,
            classes: cfg.parsed("classes")?,
            p_in: cfg.parsed("p_in")?,
            p_out: cfg.parsed("p_out")?,
            feature_noise: cfg.parsed("feature_noise")?,
            seed,
        })?),
        SynthKind::Xor => Some(gen_xor(cfg.parsed("copies")?)?),
        SynthKind::Fig4 => None,
    })
}

/// Writes graph.txt and features.csv, plus labels.txt and splits.json for
/// labeled datasets.
pub fn cmd_synth(cfg: &RunConfig, kind: SynthKind, out: &Path) -> Result<()> {
    let (graph, features, labels) = match synth_dataset(cfg, kind)? {
        Some(d) => (d.graph, d.features, Some(d.labels)),
        None => {
            let (g, x) = gen_fig4_tree();
            (g, x, None)
        }
    };
    save_graph(&graph, out.join("graph.txt"))?;
    save_features_csv(features.values(), out.join("features.csv"))?;
    if let Some(labels) = &labels {
        save_labels(labels.labels(), out.join("labels.txt"))?;
        save_splits(labels.splits(), out.join("splits.json"))?;
    }
    write_echo(cfg, out)?;
    println!(
        "nodes={} edges={} features={}{}",
        graph.num_nodes(),
        graph.num_edges(),
        features.num_features(),
        labels.map_or(String::new(), |l| format!(" classes={}", l.num_classes()))
    );
    println!("wrote {}", out.display());
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct HopTimingRecord {
    pub reducer: String,
    pub hop: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BuildSummary {
    pub num_nodes: usize,
    pub num_base_features: usize,
    pub dim: usize,
    pub reducers: String,
    pub hops: usize,
    pub hop_selection: String,
    pub rewire: String,
    pub timings: Vec<HopTimingRecord>,
    pub total_seconds: f64,
}

pub fn compile_configured(cfg: &RunConfig, data: &LoadedData) -> Result<(CompiledFeatures, Vec<HopTimingRecord>)> {
    let faf = cfg.faf_config()?;
    match cfg.rewire_spec()? {
        Some(spec) => {
            let z = faf_core::compile_augmented(&data.graph, &data.features, &faf, &spec)?;
            Ok((z, Vec::new()))
        }
        None => {
            let (z, timings) = compile_with_timing(&data.graph, &data.features, &faf)?;
            let timings = timings
                .into_iter()
                .map(|t| HopTimingRecord {
                    reducer: t.reducer.name().to_string(),
                    hop: t.hop,
                    seconds: t.seconds,
                })
                .collect();
            Ok((z, timings))
        }
    }
}

/// Compiles features and writes features.bin, columns.json and build.json.
pub fn cmd_build(cfg: &RunConfig, out: &Path) -> Result<BuildSummary> {
    let data = load_data(cfg)?;
    let faf = cfg.faf_config()?;
    let start = Instant::now();
    let (z, timings) = compile_configured(cfg, &data)?;
    let total_seconds = start.elapsed().as_secs_f64();
    save_features_binary(z.matrix(), out.join("features.bin"))?;
    write_text(out.join("columns.json"), &z.column_index_json())?;
    let summary = BuildSummary {
        num_nodes: z.num_nodes(),
        num_base_features: z.num_base_features(),
        dim: z.dim(),
        reducers: format_reducer_list(&faf.reducers),
        hops: faf.hops,
        hop_selection: faf.hop_selection.name().to_string(),
        rewire: cfg.get("rewire").to_string(),
        timings,
        total_seconds,
    };
    json_to(&summary, &out.join("build.json"))?;
    write_echo(cfg, out)?;
    println!("D={} nodes={} base_features={}", summary.dim, summary.num_nodes, summary.num_base_features);
    for t in &summary.timings {
        println!("hop {} {}: {:.6}s", t.hop, t.reducer, t.seconds);
    }
    println!("total: {:.6}s", summary.total_seconds);
    Ok(summary)
}

fn chosen_splits(cfg: &RunConfig, labels: &LabeledSplits) -> Result<Vec<usize>> {
    let available = labels.splits().len();
    match cfg.split_index()? {
        Some(i) if i >= available => Err(CliError::Usage(format!("split {i} out of range ({available} splits)"))),
        Some(i) => Ok(vec![i]),
        None => Ok((0..available).collect()),
    }
}

/// Trains one model per selected split; writes report/model JSON per split
/// and a summary table.
pub fn cmd_train(cfg: &RunConfig, out: &Path) -> Result<Vec<TrainReport>> {
    let data = load_data(cfg)?;
    let labels = data.labeled()?;
    let mlp = cfg.mlp_config()?;
    let metric = cfg.metric()?;
    let (z, _) = compile_configured(cfg, &data)?;
    let mut table = Table::new([
        "split", "dim", "epochs", "best_epoch", "train", "val", "test", "seconds",
    ]);
    let mut reports = Vec::new();
    for split in chosen_splits(cfg, labels)? {
        let outcome = train(&z, labels, split, &mlp, metric)?;
        let r = &outcome.report;
        write_text(out.join(format!("report_split{split}.json")), &r.to_json())?;
        json_to(&outcome.model, &out.join(format!("model_split{split}.json")))?;
        table.push(vec![
            split.to_string(),
            z.dim().to_string(),
            r.epochs().to_string(),
            r.best_val_epoch.to_string(),
            num(r.train_at_best_val),
            num(r.val_at_best),
            num(r.test_at_best_val),
            format!("{:.2}", r.wall_time_seconds),
        ]);
        reports.push(outcome.report);
    }
    table.write(out, "train_summary")?;
    write_echo(cfg, out)?;
    print!("{}", table.to_text());
    Ok(reports)
}

pub fn sweep_grid(cfg: &RunConfig) -> Result<SweepGrid> {
    let reducer_sets = cfg.reducer_sets()?;
    let hops: Vec<usize> = cfg.list("hops")?;
    let base = faf_core::FafConfig {
        reducers: reducer_sets[0].clone(),
        hops: hops[0],
        hop_selection: cfg.hop_selection()?,
        scaling: cfg.scaling()?,
        ka: faf_core::KaEncoder::new(cfg.parsed("ka_precision")?)?,
    };
    let max_epochs = cfg.parsed("max_epochs")?;
    let seed = cfg.seed()?;
    let grid = match cfg.get("grid") {
        "reference" => SweepGrid::reference(&base, max_epochs, seed),
        "explicit" => SweepGrid {
            num_layers: cfg.list("num_layers")?,
            hidden_channels: cfg.list("hidden_channels")?,
            dropout: cfg.list("dropout")?,
            normalization: cfg.list("normalization")?,
            learning_rate: cfg.list("learning_rate")?,
            weight_decay: cfg.list("weight_decay")?,
            ..SweepGrid::reference(&base, max_epochs, seed)
        },
        other => return Err(CliError::Usage(format!("grid must be explicit or reference, got {other:?}"))),
    };
    Ok(SweepGrid {
        reducer_sets,
        hops,
        ..grid
    })
}

/// Runs the grid with a resumable ledger and writes run and ranking tables.
pub fn cmd_sweep(cfg: &RunConfig, out: &Path) -> Result<SweepResult> {
    if cfg.rewire_spec()?.is_some() {
        return Err(CliError::Usage("sweep does not support rewire; use train".into()));
    }
    let data = load_data(cfg)?;
    let labels = data.labeled()?;
    let grid = sweep_grid(cfg)?;
    for mlp in grid.mlp_configs() {
        mlp.validate()?;
    }
    let labels = match cfg.split_index()? {
        Some(i) => {
            let split = labels
                .splits()
                .get(i)
                .ok_or_else(|| CliError::Usage(format!("split {i} out of range")))?;
            labels.with_splits(vec![split.clone()])?
        }
        None => labels.clone(),
    };
    std::fs::create_dir_all(out).map_err(|e| CliError::Data(format!("{}: {e}", out.display())))?;
    let opts = SweepOptions {
        metric: cfg.metric()?,
        jobs: cfg.jobs()?,
        ledger: Some(out.join("ledger.jsonl")),
    };
    eprintln!("sweep: {} configurations x {} splits", grid.len(), labels.splits().len());
    let result = sweep(&data.graph, &data.features, &labels, &grid, &opts)?;
    write_runs_csv(&out.join("runs.csv"), &result.runs)?;
    write_table_csv(&out.join("sweep_table.csv"), &result.table)?;
    let mut text = Table::new([
        "rank", "reducers", "hops", "layers", "hidden", "dropout", "norm", "lr", "wd", "ok", "failed", "mean_val",
        "std_val", "mean_test", "std_test",
    ]);
    for row in &result.table {
        text.push(vec![
            row.rank.to_string(),
            row.reducers.clone(),
            row.hops.to_string(),
            row.num_layers.to_string(),
            row.hidden_channels.to_string(),
            row.dropout.to_string(),
            row.normalization.clone(),
            row.learning_rate.to_string(),
            row.weight_decay.to_string(),
            row.completed.to_string(),
            row.failed.to_string(),
            num(row.mean_val),
            num(row.std_val),
            num(row.mean_test),
            num(row.std_test),
        ]);
    }
    std::fs::write(out.join("sweep_table.txt"), text.to_text())
        .map_err(|e| CliError::Data(format!("sweep_table.txt: {e}")))?;
    write_echo(cfg, out)?;
    println!("executed {} runs ({} recorded)", result.executed, result.runs.len());
    let preview = Table {
        headers: text.headers.clone(),
        rows: text.rows.iter().take(10).cloned().collect(),
    };
    print!("{}", preview.to_text());
    Ok(result)
}

/// Trains each ablation setting on the configured data and writes the
/// comparison table `ablate_<kind>`.
pub fn cmd_ablate(cfg: &RunConfig, kind: Ablation, out: &Path) -> Result<Vec<SettingResult>> {
    let data = load_data(cfg)?;
    let labels = data.labeled()?;
    let mut settings: Vec<Setting> = ablation_settings(kind, &cfg.faf_config()?, &cfg.mlp_config()?)?;
    let rewire = cfg.rewire_spec()?;
    for s in &mut settings {
        s.rewire = rewire;
    }
    let splits = chosen_splits(cfg, labels)?;
    let dataset = DatasetRef {
        graph: &data.graph,
        features: &data.features,
        labels,
        model_seed: None,
    };
    let results = run_settings(&[dataset], &settings, Some(&splits), cfg.metric()?, cfg.jobs()?)?;
    let table = results_table(&results);
    table.write(out, &format!("ablate_{}", kind.name()))?;
    write_echo(cfg, out)?;
    print!("{}", table.to_text());
    Ok(results)
}

/// Trains on one split, scores permutation importance on the chosen mask
/// and writes importance.json plus the hop-stacked table.
pub fn cmd_explain(cfg: &RunConfig, out: &Path) -> Result<ImportanceReport> {
    let data = load_data(cfg)?;
    let labels = data.labeled()?;
    let split = cfg.split_index()?.unwrap_or(0);
    let part = labels
        .splits()
        .get(split)
        .ok_or_else(|| CliError::Usage(format!("split {split} out of range")))?;
    let mask = match cfg.get("mask") {
        "train" => &part.train,
        "val" => &part.val,
        "test" => &part.test,
        other => return Err(CliError::Usage(format!("mask must be train, val or test, got {other:?}"))),
    };
    let metric = cfg.metric()?;
    let (z, _) = compile_configured(cfg, &data)?;
    let outcome = train(&z, labels, split, &cfg.mlp_config()?, metric)?;
    write_text(out.join("report.json"), &outcome.report.to_json())?;
    json_to(&outcome.model, &out.join("model.json"))?;

    let opts = ImportanceOptions {
        metric,
        repeats: cfg.parsed("repeats")?,
        seed: cfg.seed()?,
        jobs: cfg.jobs()?,
    };
    let report = permutation_importance(&outcome.model, &z, labels.labels(), mask, &opts)?;
    write_text(out.join("importance.json"), &report.to_json())?;
    let rows = hop_stack_report(&report);
    write_hop_stack_csv(&out.join("hop_stack.csv"), &rows)?;
    let mut text = Table::new(["base_feature", "hop", "reducer", "importance", "rank_in_hop"]);
    for r in &rows {
        text.push(vec![
            r.base_feature.to_string(),
            r.hop.to_string(),
            r.reducer.clone(),
            num(r.importance),
            r.rank_in_hop.to_string(),
        ]);
    }
    std::fs::write(out.join("hop_stack.txt"), text.to_text())
        .map_err(|e| CliError::Data(format!("hop_stack.txt: {e}")))?;
    write_echo(cfg, out)?;

    println!(
        "baseline {}={:.4} on {} {} nodes",
        metric.name(),
        report.baseline,
        report.mask_size,
        cfg.get("mask")
    );
    let mut top = Table::new(["hop", "base_feature", "importance", "rank_in_hop"]);
    for c in report.ranked_cells().into_iter().take(10) {
        top.push(vec![
            c.hop.to_string(),
            c.base_feature.to_string(),
            num(c.importance),
            c.rank_in_hop.to_string(),
        ]);
    }
    print!("{}", top.to_text());
    Ok(report)
}

/// Runs the property checks (and the training checks with `full`), prints
/// one JSON verdict per line and writes verify.json.
pub fn cmd_verify(cfg: &RunConfig, full: bool, out: &Path) -> Result<Vec<Verdict>> {
    let full = full || cfg.flag("full")?;
    let mut verdicts = verify::quick_checks();
    for v in &verdicts {
        println!("{}", v.to_json());
    }
    if full {
        let epochs = if cfg.is_set("max_epochs") {
            cfg.parsed("max_epochs")?
        } else {
            verify::STUDY_EPOCHS
        };
        for v in verify::full_checks(epochs, cfg.jobs()?) {
            println!("{}", v.to_json());
            verdicts.push(v);
        }
    }
    json_to(&verdicts, &out.join("verify.json"))?;
    let failed: Vec<&str> = verdicts.iter().filter(|v| !v.passed).map(|v| v.property.as_str()).collect();
    if failed.is_empty() {
        Ok(verdicts)
    } else {
        Err(CliError::Verification(failed.join(", ")))
    }
}
