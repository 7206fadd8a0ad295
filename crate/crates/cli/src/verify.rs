//! Self-checks behind `faf verify`. Quick checks are exact or finite
//! difference properties; the training checks reproduce the comparative
//! claims on the synthetic datasets and take minutes.

use std::collections::HashSet;
use std::time::Instant;

use faf_core::synth::{
    gen_fig4_collapsed_variant, gen_fig4_tree, gen_minesweeper, gen_planted_partition, gen_xor, king_grid,
    king_grid_edges, Dataset, MinesweeperSpec, PlantedPartitionSpec,
};
use faf_core::{
    compile, compile_augmented, count_recovery, reduce, FafConfig, FeatureMatrix, Graph, HopSelection, KaEncoder,
    ReducerKind, RewireCombine, RewireMode, RewireSpec,
};
use faf_ml::{
    gradient_check, permutation_importance, train, ImportanceOptions, MetricKind, MlpConfig, Normalization,
};
use ndarray::Array2;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::experiments::{mean_std, run_settings, DatasetRef, Setting, SettingResult};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub property: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl Verdict {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("verdict serializes")
    }
}

/// Times `check` and turns errors into failed verdicts.
pub fn timed(property: &str, check: impl FnOnce() -> Result<(bool, String)>) -> Verdict {
    let start = Instant::now();
    let (passed, detail) = match check() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    Verdict {
        property: property.to_string(),
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Epochs used by the training checks unless configured otherwise.
pub const STUDY_EPOCHS: usize = 300;
pub const STUDY_SEEDS: [u64; 3] = [0, 1, 2];

pub fn quick_checks() -> Vec<Verdict> {
    vec![
        timed("sum_injective_multisets", check_sum_injective),
        timed("ka_grid_injective", check_ka_grid),
        timed("ka_round_trip", check_ka_round_trip),
        timed("ka_phi_monotone", check_phi_monotone),
        timed("two_hop_example", check_fig4),
        timed("dimension_formula", check_dimensions),
        timed("mean_sum_degree", check_mean_sum_degree),
        timed("synthetic_graph_invariants", check_graph_invariants),
        timed("rewire_bookkeeping", check_rewire),
        timed("gradient_check", check_gradients),
        timed("deterministic_training", check_determinism),
        timed("xor_linear_vs_mlp", || check_xor(STUDY_EPOCHS)),
    ]
}

/// Training checks on Minesweeper (`seeds` doubles as dataset and model
/// seed) and the planted-partition hop sweep.
pub fn full_checks(epochs: usize, jobs: usize) -> Vec<Verdict> {
    let mut verdicts = Vec::new();
    let start = Instant::now();
    match run_minesweeper_study(&STUDY_SEEDS, epochs, jobs) {
        Ok(study) => {
            let shared = start.elapsed().as_secs_f64();
            let mut add = |mut v: Verdict| {
                v.seconds += shared / 4.0;
                verdicts.push(v);
            };
            add(timed("minesweeper_end_to_end", || Ok(study.end_to_end())));
            add(timed("last_hop_gap", || Ok(study.last_hop_gap())));
            add(timed("linear_vs_mlp_minesweeper", || Ok(study.linear_parity())));
            add(timed("importance_ranks", || study.importance_ranks(jobs)));
        }
        Err(e) => verdicts.push(Verdict {
            property: "minesweeper_study".into(),
            passed: false,
            detail: format!("error: {e}"),
            seconds: start.elapsed().as_secs_f64(),
        }),
    }
    verdicts.push(timed("hop_ablation_shape", || check_hop_shape(&STUDY_SEEDS, epochs, jobs)));
    verdicts
}

fn one_hot(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

/// Count vectors of every multiset of size at most `max_size` over `n` items.
fn count_vectors(n: usize, max_size: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<usize>| {
                let used: usize = prefix.iter().sum();
                (0..=max_size - used).map(move |c| {
                    let mut p = prefix.clone();
                    p.push(c);
                    p
                })
            })
            .collect();
    }
    out
}

fn sum_injective(n: usize, max_size: usize) -> Result<(usize, bool)> {
    let basis: Vec<Vec<f64>> = (0..n).map(|i| one_hot(n, i)).collect();
    let refs: Vec<&[f64]> = basis.iter().map(|b| b.as_slice()).collect();
    let mut seen = HashSet::new();
    let mut ok = true;
    let multisets = count_vectors(n, max_size);
    for counts in &multisets {
        let rows: Vec<&[f64]> = counts
            .iter()
            .enumerate()
            .flat_map(|(i, &c)| std::iter::repeat_n(refs[i], c))
            .collect();
        let sum = reduce(ReducerKind::Sum, &rows, n)?;
        ok &= seen.insert(sum.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        let recovered = count_recovery(&sum, &refs)?;
        ok &= recovered.iter().zip(counts).all(|(&r, &c)| r == c as f64);
    }
    Ok((multisets.len(), ok))
}

fn check_sum_injective() -> Result<(bool, String)> {
    let (a, ok_a) = sum_injective(3, 4)?;
    let (b, ok_b) = sum_injective(4, 6)?;
    Ok((
        ok_a && ok_b && a == 35 && b == 210,
        format!("n=3 size<=4: {a} multisets; n=4 size<=6: {b} multisets (incl. empty); distinct sums and exact counts: {}", ok_a && ok_b),
    ))
}

fn check_ka_grid() -> Result<(bool, String)> {
    let ka = KaEncoder::new(6)?;
    let mut codes = HashSet::new();
    for a in 0..64 {
        for b in 0..64 {
            codes.insert(ka.aggregate(&[a as f64 / 64.0, b as f64 / 64.0])?);
        }
    }
    let collisions = 4096 - codes.len();
    Ok((collisions == 0, format!("4096 grid points, {collisions} collisions")))
}

fn check_ka_round_trip() -> Result<(bool, String)> {
    let ka = KaEncoder::new(20)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let p = [rng.random::<f64>(), rng.random::<f64>()];
        let back = ka.decode(&ka.aggregate(&p)?, 2)?;
        for (x, y) in p.iter().zip(&back) {
            worst = worst.max((x - y).abs());
        }
    }
    let bound = 2f64.powi(-20);
    Ok((worst < bound, format!("max error {worst:.3e} (bound {bound:.3e}) over 10000 points")))
}

fn check_phi_monotone() -> Result<(bool, String)> {
    let ka = KaEncoder::default();
    let values: Vec<f64> = (0..=10_000).map(|i| ka.phi(i as f64 / 10_000.0)).collect::<std::result::Result<_, _>>()?;
    let ok = values.windows(2).all(|w| w[0] <= w[1]);
    Ok((ok, "phi non-decreasing on a 10001-point grid".into()))
}

fn root_rows(graph: &Graph, x: &FeatureMatrix, reducer: ReducerKind) -> Result<Vec<f64>> {
    let z = compile(graph, x, &FafConfig::new(vec![reducer], 2))?;
    Ok(z.matrix().row(0).to_vec())
}

fn within_ulps(a: f64, b: f64, ulps: u64) -> bool {
    a == b || (a.signum() == b.signum() && a.to_bits().abs_diff(b.to_bits()) <= ulps)
}

fn check_fig4() -> Result<(bool, String)> {
    let (g, x) = gen_fig4_tree();
    let sum = root_rows(&g, &x, ReducerKind::Sum)?;
    let mean = root_rows(&g, &x, ReducerKind::Mean)?;
    let sum_ok = sum == [1.0, 0.0, 0.0, 2.0, 5.0, 2.0];
    let want_mean = [1.0, 0.0, 0.0, 1.0, 17.0 / 24.0, 7.0 / 24.0];
    let mean_ok = mean.iter().zip(want_mean).all(|(&a, b)| within_ulps(a, b, 2));
    let (cg, cx) = gen_fig4_collapsed_variant();
    let collapsed_ok = root_rows(&cg, &cx, ReducerKind::Sum)? == sum && cg != g;
    Ok((
        sum_ok && mean_ok && collapsed_ok,
        format!("root sum {sum:?}, mean {mean:?}, collapsed twin matches sums: {collapsed_ok}"),
    ))
}

fn random_graph(n: usize, edges: usize, rng: &mut ChaCha8Rng) -> Result<Graph> {
    let pairs: Vec<(usize, usize)> = (0..edges)
        .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
        .filter(|(a, b)| a != b)
        .collect();
    Ok(Graph::from_edges(n, pairs)?)
}

fn random_features(n: usize, f: usize, rng: &mut ChaCha8Rng) -> Result<FeatureMatrix> {
    Ok(FeatureMatrix::new(Array2::from_shape_fn((n, f), |_| rng.random::<f64>()))?)
}

fn check_dimensions() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut failures = Vec::new();
    for i in 0..20 {
        let f = rng.random_range(1..=5);
        let k = if i < 2 { 0 } else { rng.random_range(0..=4) };
        let r = i % 6 + 1;
        let reducers: Vec<ReducerKind> = ReducerKind::ALL.choose_multiple(&mut rng, r).copied().collect();
        let n = 10;
        let g = random_graph(n, 20, &mut rng)?;
        let x = random_features(n, f, &mut rng)?;
        let cfg = FafConfig::new(reducers, k);
        let z = compile(&g, &x, &cfg)?;
        let want = f * (1 + r * k);
        if z.dim() != want || cfg.output_dim(f) != want || z.columns().len() != want {
            failures.push(format!("F={f} R={r} K={k}: got {}", z.dim()));
        }
    }
    Ok((failures.is_empty(), format!("20 configurations, failures: {failures:?}")))
}

/// `mean == sum / d` bit for bit, and `d * mean` within one rounding of sum.
fn mean_sum_degree(graph: &Graph, x: &FeatureMatrix) -> Result<(usize, usize)> {
    let z = compile(graph, x, &FafConfig::new(vec![ReducerKind::Mean, ReducerKind::Sum], 1))?;
    let f = x.num_features();
    let (mut bad, mut exact) = (0, 0);
    let matrix = z.matrix();
    for v in 0..graph.num_nodes() {
        let d = graph.neighbors(v).len() as f64;
        let row = matrix.row(v);
        for c in 0..f {
            let (mean, sum) = (row[f + c], row[2 * f + c]);
            let expected = if d == 0.0 { 0.0 } else { sum / d };
            if mean != expected || (d * mean - sum).abs() > f64::EPSILON * sum.abs() {
                bad += 1;
            }
            if d * mean == sum {
                exact += 1;
            }
        }
    }
    Ok((bad, exact))
}

fn check_mean_sum_degree() -> Result<(bool, String)> {
    let mine = gen_minesweeper(&MinesweeperSpec::default())?;
    let sbm = gen_planted_partition(&default_partition(0))?;
    let (bad_m, exact_m) = mean_sum_degree(&mine.graph, &mine.features)?;
    let (bad_s, exact_s) = mean_sum_degree(&sbm.graph, &sbm.features)?;
    let cells_m = mine.graph.num_nodes() * mine.features.num_features();
    Ok((
        bad_m == 0 && bad_s == 0 && exact_m == cells_m,
        format!(
            "minesweeper {exact_m}/{cells_m} cells exact; planted partition {bad_s} violations, {exact_s} exact products"
        ),
    ))
}

fn graph_ok(g: &Graph) -> bool {
    let degree_sum: usize = g.degrees().iter().sum();
    degree_sum == 2 * g.num_edges()
        && (0..g.num_nodes()).all(|v| {
            let nb = g.neighbors(v);
            nb.windows(2).all(|w| w[0] < w[1]) && !nb.contains(&v) && nb.iter().all(|&u| g.has_edge(u, v))
        })
}

fn check_graph_invariants() -> Result<(bool, String)> {
    let mine = gen_minesweeper(&MinesweeperSpec::default())?;
    let sbm = gen_planted_partition(&default_partition(1))?;
    let (fig, _) = gen_fig4_tree();
    let stats_ok = mine.graph.num_nodes() == 10_000 && mine.graph.num_edges() == 39_402 && mine.features.num_features() == 7;
    let kings_ok = (1..=60).all(|s| king_grid(s).num_edges() == king_grid_edges(s));
    let ok = stats_ok && kings_ok && [&mine.graph, &sbm.graph, &fig].iter().all(|g| graph_ok(g));
    Ok((
        ok,
        format!(
            "minesweeper {} nodes / {} edges / {} features; king grid edge formula sides 1..60: {kings_ok}",
            mine.graph.num_nodes(),
            mine.graph.num_edges(),
            mine.features.num_features()
        ),
    ))
}

fn rewire_ok(g: &Graph, x: &FeatureMatrix) -> Result<(bool, String)> {
    let (pos, neg) = faf_core::rewire::rewire_split(g, x)?;
    let all: HashSet<(usize, usize)> = g.edges().collect();
    let p: HashSet<(usize, usize)> = pos.edges().collect();
    let n: HashSet<(usize, usize)> = neg.edges().collect();
    let partition = p.is_disjoint(&n) && p.union(&n).copied().collect::<HashSet<_>>() == all;

    let faf = FafConfig::new(vec![ReducerKind::Mean, ReducerKind::Sum], 2);
    let plain = compile(g, x, &faf)?;
    let mut prefix = true;
    for mode in [RewireMode::Drop, RewireMode::Split] {
        let z = compile_augmented(g, x, &faf, &RewireSpec::new(mode, RewireCombine::Concat))?;
        let head = z.matrix().slice(ndarray::s![.., ..plain.dim()]).to_owned();
        prefix &= head.iter().zip(plain.matrix().iter()).all(|(a, b)| a.to_bits() == b.to_bits());
    }
    Ok((partition && prefix, format!("{}/{}", n.len(), all.len())))
}

fn check_rewire() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut graphs = Vec::new();
    let mine = gen_minesweeper(&MinesweeperSpec {
        side: 30,
        ..MinesweeperSpec::default()
    })?;
    graphs.push((mine.graph, mine.features));
    let sbm = gen_planted_partition(&default_partition(2))?;
    graphs.push((sbm.graph, sbm.features));
    for _ in 0..5 {
        let g = random_graph(40, 120, &mut rng)?;
        let x = FeatureMatrix::new(Array2::from_shape_fn((40, 3), |_| rng.random_range(-1.0..1.0)))?;
        graphs.push((g, x));
    }
    let mut ok = true;
    let mut negatives = Vec::new();
    for (g, x) in &graphs {
        let (good, neg) = rewire_ok(g, x)?;
        ok &= good;
        negatives.push(neg);
    }
    Ok((ok, format!("{} graphs; negative/total edges {}", graphs.len(), negatives.join(" "))))
}

fn check_gradients() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = Array2::from_shape_fn((12, 4), |_| rng.random_range(-1.0..1.0));
    let labels: Vec<i64> = (0..12).map(|i| (i % 3) as i64).collect();
    let cfg = |layers, norm| MlpConfig {
        num_layers: layers,
        hidden_channels: 5,
        normalization: norm,
        seed: 3,
        ..MlpConfig::default()
    };
    let plain = gradient_check(&cfg(1, Normalization::None), x.view(), &labels)?
        .max(gradient_check(&cfg(3, Normalization::None), x.view(), &labels)?);
    let normed = gradient_check(&cfg(2, Normalization::LayerNorm), x.view(), &labels)?
        .max(gradient_check(&cfg(2, Normalization::BatchNorm), x.view(), &labels)?);
    Ok((
        plain < 1e-4 && normed < 1e-3,
        format!("max relative error {plain:.2e} without normalization, {normed:.2e} with"),
    ))
}

fn check_determinism() -> Result<(bool, String)> {
    let data = gen_planted_partition(&PlantedPartitionSpec {
        n_per_class: 40,
        ..default_partition(5)
    })?;
    let z = compile(&data.graph, &data.features, &FafConfig::new(vec![ReducerKind::Mean], 2))?;
    let cfg = MlpConfig {
        hidden_channels: 16,
        dropout: 0.3,
        normalization: Normalization::BatchNorm,
        max_epochs: 40,
        seed: 9,
        ..MlpConfig::default()
    };
    let a = train(&z, &data.labels, 0, &cfg, MetricKind::Accuracy)?.report;
    let b = train(&z, &data.labels, 0, &cfg, MetricKind::Accuracy)?.report;
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    let same = bits(&a.loss_curve) == bits(&b.loss_curve)
        && bits(&a.train_curve) == bits(&b.train_curve)
        && bits(&a.val_curve) == bits(&b.val_curve)
        && bits(&a.test_curve) == bits(&b.test_curve);
    Ok((same, format!("two runs of {} epochs bit-identical: {same}", a.epochs())))
}

/// Best train accuracy over four model seeds on the XOR table.
pub fn xor_train_accuracy(num_layers: usize, epochs: usize) -> Result<f64> {
    let data = gen_xor(8)?;
    let z = compile(&data.graph, &data.features, &FafConfig::new(vec![ReducerKind::Mean], 0))?;
    let mut best = 0.0f64;
    for seed in 0..4 {
        let cfg = MlpConfig {
            num_layers,
            hidden_channels: 64,
            max_epochs: epochs,
            seed,
            ..MlpConfig::default()
        };
        let report = train(&z, &data.labels, 0, &cfg, MetricKind::Accuracy)?.report;
        best = best.max(report.train_curve.iter().copied().fold(0.0, f64::max));
    }
    Ok(best)
}

pub fn check_xor(epochs: usize) -> Result<(bool, String)> {
    let linear = xor_train_accuracy(1, epochs)?;
    let mlp = xor_train_accuracy(2, epochs)?;
    Ok((
        mlp == 1.0 && linear <= 0.75,
        format!("best train accuracy: 2-layer {mlp:.4}, 1L {linear:.4}"),
    ))
}

pub fn default_partition(seed: u64) -> PlantedPartitionSpec {
    PlantedPartitionSpec {
        n_per_class: 200,
        classes: 4,
        p_in: 0.05,
        p_out: 0.005,
        feature_noise: 1.5,
        seed,
    }
}

/// MLP hyperparameters of the Minesweeper comparisons.
pub fn minesweeper_mlp(epochs: usize) -> MlpConfig {
    MlpConfig {
        num_layers: 12,
        hidden_channels: 64,
        dropout: 0.2,
        normalization: Normalization::BatchNorm,
        learning_rate: 0.01,
        weight_decay: 0.0,
        max_epochs: epochs,
        seed: 0,
    }
}

/// Hop count of the mean-reducer model whose importances are ranked.
pub const IMPORTANCE_HOPS: usize = 4;

pub const FULL: usize = 0;
pub const BASE_ONLY: usize = 1;
pub const LAST_HOP: usize = 2;
pub const LINEAR: usize = 3;
pub const MEAN: usize = 4;

pub fn minesweeper_settings(epochs: usize) -> Vec<Setting> {
    let faf4 = FafConfig::new(ReducerKind::FAF4.to_vec(), 4);
    let mlp = minesweeper_mlp(epochs);
    vec![
        Setting::new("faf4 K=4", faf4.clone(), mlp.clone()),
        Setting::new("faf4 K=0", FafConfig { hops: 0, ..faf4.clone() }, mlp.clone()),
        Setting::new("faf4 K=4 last hop", faf4.clone().with_hop_selection(HopSelection::LastHopOnly), mlp.clone()),
        Setting::new("faf4 K=4 1L", faf4, MlpConfig { num_layers: 1, ..mlp.clone() }),
        Setting::new(
            format!("mean K={IMPORTANCE_HOPS}"),
            FafConfig::new(vec![ReducerKind::Mean], IMPORTANCE_HOPS),
            mlp,
        ),
    ]
}

/// Minesweeper runs shared by the end-to-end, last-hop, linear and
/// importance checks. Dataset `i` uses `seeds[i]` for generation and model.
pub struct MinesweeperStudy {
    pub datasets: Vec<Dataset>,
    pub results: Vec<SettingResult>,
}

pub fn run_minesweeper_study(seeds: &[u64], epochs: usize, jobs: usize) -> Result<MinesweeperStudy> {
    let datasets: Vec<Dataset> = seeds
        .iter()
        .map(|&s| gen_minesweeper(&MinesweeperSpec::with_seed(s)))
        .collect::<std::result::Result<_, _>>()?;
    let refs: Vec<DatasetRef> = datasets
        .iter()
        .zip(seeds)
        .map(|(d, &s)| DatasetRef {
            graph: &d.graph,
            features: &d.features,
            labels: &d.labels,
            model_seed: Some(s),
        })
        .collect();
    let results = run_settings(&refs, &minesweeper_settings(epochs), Some(&[0]), MetricKind::RocAuc, jobs)?;
    Ok(MinesweeperStudy { datasets, results })
}

fn fmt_scores(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.4}")).collect();
    format!("[{}]", parts.join(", "))
}

impl MinesweeperStudy {
    pub fn end_to_end(&self) -> (bool, String) {
        let stats_ok = self.datasets.iter().all(|d| {
            d.graph.num_nodes() == 10_000 && d.graph.num_edges() == 39_402 && d.features.num_features() == 7
        });
        let full = &self.results[FULL];
        let base = &self.results[BASE_ONLY];
        let (full_mean, base_mean) = (full.mean_test(), base.mean_test());
        (
            stats_ok && full_mean >= 0.85 && base_mean <= 0.60,
            format!(
                "10000 nodes/39402 edges/7 features: {stats_ok}; faf4 K=4 test ROC-AUC {full_mean:.4} {} (need >= 0.85); K=0 {base_mean:.4} {} (need <= 0.60)",
                fmt_scores(&full.tests()),
                fmt_scores(&base.tests())
            ),
        )
    }

    pub fn last_hop_gap(&self) -> (bool, String) {
        let all = self.results[FULL].mean_test();
        let last = self.results[LAST_HOP].mean_test();
        (
            all - last >= 0.10,
            format!(
                "all hops {all:.4}, last hop only {last:.4} {}, gap {:.4} (need >= 0.10)",
                fmt_scores(&self.results[LAST_HOP].tests()),
                all - last
            ),
        )
    }

    pub fn linear_parity(&self) -> (bool, String) {
        let mlp = self.results[FULL].mean_test();
        let linear = self.results[LINEAR].mean_test();
        (
            mlp >= linear - 0.01,
            format!("12-layer {mlp:.4}, 1L {linear:.4} {} (need mlp >= 1L - 0.01)", fmt_scores(&self.results[LINEAR].tests())),
        )
    }

    /// Top cell (hop 1, feature 1) and (hop 0, feature 0) among the top
    /// three, counted over seeds.
    pub fn importance_ranks(&self, jobs: usize) -> Result<(bool, String)> {
        let mean = &self.results[MEAN];
        let mut hits = 0;
        let mut notes = Vec::new();
        for run in &mean.runs {
            let data = &self.datasets[run.dataset];
            let z = mean.setting.compile(&data.graph, &data.features)?;
            let opts = ImportanceOptions {
                metric: MetricKind::RocAuc,
                repeats: 5,
                seed: run.report.config.seed,
                jobs,
            };
            let report = permutation_importance(&run.model, &z, data.labels.labels(), &data.labels.splits()[0].test, &opts)?;
            let ranked = report.ranked_cells();
            let top: Vec<(usize, usize)> = ranked.iter().take(3).map(|c| (c.hop, c.base_feature)).collect();
            let good = top[0] == (1, 1) && top.contains(&(0, 0));
            hits += usize::from(good);
            notes.push(format!("seed {}: top3 (hop, feature) {top:?}", run.report.config.seed));
        }
        Ok((
            hits >= 2,
            format!("{hits}/{} seeds match; test ROC-AUC {}; {}", mean.runs.len(), fmt_scores(&mean.tests()), notes.join("; ")),
        ))
    }
}

/// Mean validation accuracy at K = 0, 1, 2 on planted-partition graphs.
pub fn hop_shape_scores(seeds: &[u64], epochs: usize, jobs: usize) -> Result<Vec<f64>> {
    let datasets: Vec<Dataset> = seeds
        .iter()
        .map(|&s| gen_planted_partition(&default_partition(s)))
        .collect::<std::result::Result<_, _>>()?;
    let refs: Vec<DatasetRef> = datasets
        .iter()
        .zip(seeds)
        .map(|(d, &s)| DatasetRef {
            graph: &d.graph,
            features: &d.features,
            labels: &d.labels,
            model_seed: Some(s),
        })
        .collect();
    let mlp = MlpConfig {
        hidden_channels: 64,
        max_epochs: epochs,
        ..MlpConfig::default()
    };
    let settings: Vec<Setting> = (0..=2)
        .map(|k| Setting::new(format!("K={k}"), FafConfig::new(vec![ReducerKind::Mean], k), mlp.clone()))
        .collect();
    let results = run_settings(&refs, &settings, None, MetricKind::Accuracy, jobs)?;
    Ok(results.iter().map(|r| mean_std(&r.vals()).0).collect())
}

pub fn check_hop_shape(seeds: &[u64], epochs: usize, jobs: usize) -> Result<(bool, String)> {
    let acc = hop_shape_scores(seeds, epochs, jobs)?;
    let (k0, k1, k2) = (100.0 * acc[0], 100.0 * acc[1], 100.0 * acc[2]);
    Ok((
        k1 - k0 >= 10.0 && k2 >= k1 - 1.0,
        format!("val accuracy K=0 {k0:.2}, K=1 {k1:.2}, K=2 {k2:.2} (need K1-K0 >= 10, K2 >= K1-1)"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiset_enumeration_counts() {
        assert_eq!(count_vectors(3, 4).len(), 35);
        assert_eq!(count_vectors(4, 6).len(), 210);
        assert!(count_vectors(2, 2).iter().all(|c| c.iter().sum::<usize>() <= 2));
    }

    #[test]
    fn ulp_window() {
        assert!(within_ulps(1.0, 1.0 + f64::EPSILON, 1));
        assert!(!within_ulps(1.0, 1.0 + 4.0 * f64::EPSILON, 2));
    }
}
