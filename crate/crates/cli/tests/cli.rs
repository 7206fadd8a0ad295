use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use faf_core::io::{decode_matrix_binary, load_features, load_graph, save_features_binary};
use faf_core::{CompiledFeatures, ReducerKind};
use faf_ml::{Classifier, Mlp, TrainReport};
use ndarray::Array2;

fn faf(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_faf"))
        .current_dir(dir)
        .env_remove("FAF_SEED")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = faf(dir, args);
    assert!(
        out.status.success(),
        "faf {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn synth_writes_a_loadable_minesweeper() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(dir.path(), &["synth", "minesweeper", "--out-dir", "ms", "-s", "side=10"]);
    assert!(stdout.contains("nodes=100"));
    let g = load_graph(dir.path().join("ms/graph.txt")).unwrap();
    assert_eq!(g.num_edges(), 2 * 9 * 10 + 2 * 9 * 9);
    let x = load_features(dir.path().join("ms/features.csv"), 100).unwrap();
    assert_eq!(x.num_features(), 7);
    for name in ["labels.txt", "splits.json", "config.txt"] {
        assert!(dir.path().join("ms").join(name).exists(), "{name}");
    }
    assert!(fs::read_to_string(dir.path().join("ms/config.txt")).unwrap().contains("side = 10\n"));
}

#[test]
fn seed_comes_from_environment_unless_overridden() {
    let dir = tempfile::tempdir().unwrap();
    let run = |env: Option<&str>, extra: &[&str], out: &str| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_faf"));
        cmd.current_dir(dir.path()).env_remove("FAF_SEED");
        if let Some(s) = env {
            cmd.env("FAF_SEED", s);
        }
        let mut args = vec!["synth", "sbm", "--out-dir", out, "-s", "n_per_class=30"];
        args.extend_from_slice(extra);
        assert!(cmd.args(&args).output().unwrap().status.success());
        fs::read_to_string(dir.path().join(out).join("graph.txt")).unwrap()
    };
    let a = run(Some("4"), &[], "a");
    let b = run(None, &["--seed", "4"], "b");
    let c = run(Some("4"), &["--seed", "5"], "c");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn fig4_build_has_six_columns_over_three_hops() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "fig4", "--out-dir", "fig"]);
    assert!(!dir.path().join("fig/labels.txt").exists());
    let stdout = ok(
        dir.path(),
        &["build", "--out-dir", "z", "-s", "data=fig", "-s", "reducers=sum", "-s", "hops=2"],
    );
    assert!(stdout.starts_with("D=6 "));
    let columns = CompiledFeatures::parse_column_index(&fs::read_to_string(dir.path().join("z/columns.json")).unwrap()).unwrap();
    assert_eq!(columns.iter().map(|c| c.hop).collect::<Vec<_>>(), vec![0, 0, 1, 1, 2, 2]);
    let z = decode_matrix_binary(&fs::read(dir.path().join("z/features.bin")).unwrap()).unwrap();
    assert_eq!(z.row(0).to_vec(), vec![1.0, 0.0, 0.0, 2.0, 5.0, 2.0]);
    let build: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("z/build.json")).unwrap()).unwrap();
    assert_eq!(build["dim"], 6);
    assert_eq!(build["timings"].as_array().unwrap().len(), 2);
}

#[test]
fn zero_hop_build_of_binary_features_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "sbm", "--out-dir", "d", "-s", "n_per_class=20"]);
    let x = load_features(dir.path().join("d/features.csv"), 80).unwrap();
    // round through f32 so the input is representable exactly
    let x32 = x.values().mapv(|v| v as f32 as f64);
    save_features_binary(x32.view(), dir.path().join("d/features.bin")).unwrap();
    ok(
        dir.path(),
        &["build", "--out-dir", "z", "-s", "data=d", "-s", "features=d/features.bin", "-s", "hops=0"],
    );
    assert_eq!(
        fs::read(dir.path().join("d/features.bin")).unwrap(),
        fs::read(dir.path().join("z/features.bin")).unwrap()
    );
}

#[test]
fn train_writes_a_reloadable_model() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "sbm", "--out-dir", "d", "-s", "n_per_class=40"]);
    let common = ["-s", "data=d", "-s", "max_epochs=40", "-s", "hidden_channels=8", "-s", "reducers=mean", "-s", "hops=1"];
    let mut args = vec!["train", "--out-dir", "t"];
    args.extend_from_slice(&common);
    let stdout = ok(dir.path(), &args);
    assert!(stdout.contains("best_epoch"));
    let report: TrainReport = serde_json::from_str(&fs::read_to_string(dir.path().join("t/report_split0.json")).unwrap()).unwrap();
    assert_eq!(report.epochs(), 40);
    let model: Mlp = serde_json::from_str(&fs::read_to_string(dir.path().join("t/model_split0.json")).unwrap()).unwrap();
    assert_eq!(model.input_dim(), 8);
    let logits = model.predict_logits(Array2::<f64>::zeros((3, 8)).view());
    assert_eq!(logits.dim(), (3, 4));
    let csv = fs::read_to_string(dir.path().join("t/train_summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(dir.path().join("t/train_summary.txt").exists());
}

#[test]
fn sweep_resumes_from_its_ledger() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "xor", "--out-dir", "d", "-s", "copies=6"]);
    let args = [
        "sweep", "--out-dir", "s", "-s", "data=d", "-s", "hops=0", "-s", "max_epochs=20", "-s", "hidden_channels=8",
        "-s", "num_layers=1,2", "-s", "learning_rate=0.01,0.001",
    ];
    assert!(ok(dir.path(), &args).contains("executed 4 runs"));
    assert!(ok(dir.path(), &args).contains("executed 0 runs"));
    let table = fs::read_to_string(dir.path().join("s/sweep_table.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);
    assert!(table.starts_with("rank,"));
    assert!(dir.path().join("s/sweep_table.txt").exists());
    assert_eq!(fs::read_to_string(dir.path().join("s/ledger.jsonl")).unwrap().lines().count(), 4);
}

#[test]
fn ablations_emit_one_row_per_setting() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "sbm", "--out-dir", "d", "-s", "n_per_class=30"]);
    let base = ["-s", "data=d", "-s", "max_epochs=15", "-s", "hidden_channels=8", "-s", "hops=2", "--jobs", "2"];
    for (kind, rows) in [("hops", 3), ("lasthop", 2), ("linear", 2), ("reducers", ReducerKind::ALL.len() + 1)] {
        let mut args = vec!["ablate", kind, "--out-dir", "a"];
        args.extend_from_slice(&base);
        ok(dir.path(), &args);
        let csv = fs::read_to_string(dir.path().join(format!("a/ablate_{kind}.csv"))).unwrap();
        assert_eq!(csv.lines().count(), rows + 1, "{kind}");
    }
    let hops = fs::read_to_string(dir.path().join("a/ablate_hops.txt")).unwrap();
    assert!(hops.lines().nth(2).unwrap().starts_with("K=0"));
}

#[test]
fn explain_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "sbm", "--out-dir", "d", "-s", "n_per_class=30"]);
    ok(
        dir.path(),
        &["explain", "--out-dir", "e", "-s", "data=d", "-s", "max_epochs=20", "-s", "hops=1", "-s", "repeats=2"],
    );
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("e/importance.json")).unwrap()).unwrap();
    assert_eq!(report["num_repeats"], 2);
    assert_eq!(report["cells"].as_array().unwrap().len(), 2 * 4);
    let mut reader = csv::Reader::from_path(dir.path().join("e/hop_stack.csv")).unwrap();
    let headers: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(headers, ["base_feature", "hop", "reducer", "importance", "rank_in_hop"]);
    assert_eq!(reader.records().count(), 8);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(faf(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(faf(dir.path(), &["train", "-s", "nonsense=1"]).status.code(), Some(1));
    assert_eq!(faf(dir.path(), &["train"]).status.code(), Some(1));
    assert_eq!(faf(dir.path(), &["train", "-s", "data=missing"]).status.code(), Some(2));
    ok(dir.path(), &["synth", "fig4", "--out-dir", "fig"]);
    // fig4 has no labels
    assert_eq!(faf(dir.path(), &["train", "-s", "data=fig"]).status.code(), Some(1));
    fs::write(dir.path().join("fig/features.csv"), "1,0\n").unwrap();
    assert_eq!(faf(dir.path(), &["build", "-s", "data=fig"]).status.code(), Some(2));
    assert_eq!(faf_cli::error::CliError::Verification("x".into()).exit_code(), 3);
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.cfg"), "# base\nhops = 3\nseed = 2\n").unwrap();
    let echo = ok(dir.path(), &["config", "--config", "run.cfg", "-s", "hops=5"]);
    assert!(echo.contains("hops = 5\n"));
    assert!(echo.contains("seed = 2\n"));
    fs::write(dir.path().join("bad.cfg"), "hopz = 3\n").unwrap();
    let out = faf(dir.path(), &["config", "--config", "bad.cfg"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("hopz"));
}

#[test]
fn quick_verify_passes_and_reports_json() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(dir.path(), &["verify", "--out-dir", "v"]);
    let verdicts: Vec<serde_json::Value> = stdout.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(verdicts.len() >= 10);
    assert!(verdicts.iter().all(|v| v["passed"] == true));
    let file: Vec<serde_json::Value> = serde_json::from_str(&fs::read_to_string(dir.path().join("v/verify.json")).unwrap()).unwrap();
    assert_eq!(file.len(), verdicts.len());
}
