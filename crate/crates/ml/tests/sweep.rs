use std::fs;

use faf_core::synth::gen_xor;
use faf_core::{compile, FafConfig, HopSelection, ReducerKind};
use faf_ml::sweep::{aggregate, read_ledger, write_runs_csv, write_table_csv, RunStatus};
use faf_ml::{sweep, train, MetricKind, MlpConfig, SweepGrid, SweepOptions};

fn base_mlp() -> MlpConfig {
    MlpConfig {
        hidden_channels: 16,
        max_epochs: 60,
        seed: 1,
        ..MlpConfig::default()
    }
}

fn accuracy_opts() -> SweepOptions {
    SweepOptions {
        metric: MetricKind::Accuracy,
        ..SweepOptions::default()
    }
}

#[test]
fn reference_grid_has_2700_mlp_settings() {
    let faf = FafConfig::new(vec![ReducerKind::Mean], 2);
    let grid = SweepGrid::reference(&faf, 10, 0);
    assert_eq!(grid.num_mlp_configs(), 5 * 4 * 3 * 3 * 5 * 3);
    assert_eq!(grid.len(), 2700);
    assert_eq!(grid.configs().len(), 2700);
    let with_hops = SweepGrid {
        hops: vec![1, 2, 3],
        ..grid
    };
    assert_eq!(with_hops.len(), 3 * 2700);
}

#[test]
fn single_point_matches_a_direct_training_run() {
    let data = gen_xor(6).unwrap();
    let faf = FafConfig::new(vec![ReducerKind::Mean], 0);
    let mlp = base_mlp();
    let result = sweep(&data.graph, &data.features, &data.labels, &SweepGrid::single(&faf, &mlp), &accuracy_opts()).unwrap();
    assert_eq!(result.table.len(), 1);
    assert_eq!(result.runs.len(), 1);

    let z = compile(&data.graph, &data.features, &faf).unwrap();
    let direct = train(&z, &data.labels, 0, &mlp, MetricKind::Accuracy).unwrap().report;
    let row = &result.table[0];
    assert_eq!(row.rank, 1);
    assert_eq!(row.mean_val, direct.val_at_best);
    assert_eq!(row.mean_test, direct.test_at_best_val);
    assert_eq!(row.std_val, 0.0);
}

#[test]
fn higher_validation_config_ranks_first() {
    let data = gen_xor(6).unwrap();
    let faf = FafConfig::new(vec![ReducerKind::Mean], 0);
    let grid = SweepGrid {
        num_layers: vec![1, 2],
        ..SweepGrid::single(&faf, &base_mlp())
    };
    let result = sweep(&data.graph, &data.features, &data.labels, &grid, &accuracy_opts()).unwrap();
    assert_eq!(result.table.len(), 2);
    assert!(result.table[0].mean_val > result.table[1].mean_val);
    assert_eq!(result.table[0].num_layers, 2);
    assert_eq!(result.best().unwrap().rank, 1);
}

#[test]
fn failed_runs_are_recorded_and_the_sweep_continues() {
    let data = gen_xor(6).unwrap();
    // last-hop-only selection is invalid at zero hops
    let faf = FafConfig::new(vec![ReducerKind::Mean], 0).with_hop_selection(HopSelection::LastHopOnly);
    let grid = SweepGrid {
        hops: vec![0, 1],
        ..SweepGrid::single(&faf, &base_mlp())
    };
    let result = sweep(&data.graph, &data.features, &data.labels, &grid, &accuracy_opts()).unwrap();
    assert_eq!(result.runs.len(), 2);
    assert_eq!(result.runs[0].status, RunStatus::Failed);
    assert!(result.runs[0].error.as_deref().unwrap().contains("last-hop"));
    assert_eq!(result.runs[1].status, RunStatus::Ok);
    // the failed configuration sorts last
    assert_eq!(result.table[0].hops, 1);
    assert_eq!(result.table[1].failed, 1);
    assert!(result.table[1].mean_val.is_nan());
}

#[test]
fn ledger_resumes_without_repeating_runs() {
    let dir = tempfile::tempdir().unwrap();
    let ledger = dir.path().join("runs.jsonl");
    let data = gen_xor(6).unwrap();
    let faf = FafConfig::new(vec![ReducerKind::Mean], 0);
    let grid = SweepGrid {
        learning_rate: vec![0.01, 0.005, 0.001],
        ..SweepGrid::single(&faf, &base_mlp())
    };
    let opts = SweepOptions {
        ledger: Some(ledger.clone()),
        ..accuracy_opts()
    };
    let first = sweep(&data.graph, &data.features, &data.labels, &grid, &opts).unwrap();
    assert_eq!(first.executed, 3);
    assert_eq!(read_ledger(&ledger).unwrap().len(), 3);

    let again = sweep(&data.graph, &data.features, &data.labels, &grid, &opts).unwrap();
    assert_eq!(again.executed, 0);
    assert_eq!(again.table, first.table);

    // drop one finished run from the ledger
    let text = fs::read_to_string(&ledger).unwrap();
    let kept: Vec<&str> = text.lines().skip(1).collect();
    fs::write(&ledger, kept.join("\n") + "\n").unwrap();
    let resumed = sweep(&data.graph, &data.features, &data.labels, &grid, &opts).unwrap();
    assert_eq!(resumed.executed, 1);
    assert_eq!(resumed.table, first.table);
}

#[test]
fn parallel_and_serial_sweeps_agree() {
    let data = gen_xor(6).unwrap();
    let faf = FafConfig::new(vec![ReducerKind::Mean], 0);
    let grid = SweepGrid {
        dropout: vec![0.0, 0.3],
        num_layers: vec![1, 2],
        ..SweepGrid::single(&faf, &base_mlp())
    };
    let serial = sweep(&data.graph, &data.features, &data.labels, &grid, &accuracy_opts()).unwrap();
    let parallel = sweep(
        &data.graph,
        &data.features,
        &data.labels,
        &grid,
        &SweepOptions {
            jobs: 3,
            ..accuracy_opts()
        },
    )
    .unwrap();
    let strip = |rs: &[faf_ml::RunRecord]| {
        rs.iter()
            .map(|r| (r.config_key.clone(), r.val_at_best, r.test_at_best_val))
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&serial.runs), strip(&parallel.runs));
    assert_eq!(aggregate(&parallel.runs), parallel.table);
}

#[test]
fn csv_outputs_have_one_row_per_run_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_xor(6).unwrap();
    let faf = FafConfig::new(vec![ReducerKind::Mean], 0);
    let grid = SweepGrid {
        weight_decay: vec![0.0, 1e-3],
        ..SweepGrid::single(&faf, &base_mlp())
    };
    let result = sweep(&data.graph, &data.features, &data.labels, &grid, &accuracy_opts()).unwrap();
    let runs = dir.path().join("runs.csv");
    let table = dir.path().join("nested/table.csv");
    write_runs_csv(&runs, &result.runs).unwrap();
    write_table_csv(&table, &result.table).unwrap();
    let mut reader = csv::Reader::from_path(&table).unwrap();
    let headers = reader.headers().unwrap().clone();
    assert_eq!(&headers[0], "rank");
    assert!(headers.iter().any(|h| h == "mean_test"));
    assert_eq!(reader.records().count(), 2);
    assert_eq!(csv::Reader::from_path(&runs).unwrap().records().count(), 2);
}
