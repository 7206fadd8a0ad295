//! Comparative runs shared by `ablate`, `verify full` and the acceptance
//! harness: a list of settings trained on one or more datasets.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use faf_core::{
    compile, compile_augmented, CompiledFeatures, FafConfig, FeatureMatrix, Graph, HopSelection, LabeledSplits,
    ReducerKind, RewireSpec,
};
use faf_ml::{train, MetricKind, Mlp, MlpConfig, TrainReport};

use crate::config::reducer_label;
use crate::error::{CliError, Result};
use crate::table::{num, Table};

/// One point of a comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct Setting {
    pub label: String,
    pub faf: FafConfig,
    pub rewire: Option<RewireSpec>,
    pub mlp: MlpConfig,
}

impl Setting {
    pub fn new(label: impl Into<String>, faf: FafConfig, mlp: MlpConfig) -> Self {
        Setting {
            label: label.into(),
            faf,
            rewire: None,
            mlp,
        }
    }

    pub fn compile(&self, graph: &Graph, features: &FeatureMatrix) -> Result<CompiledFeatures> {
        Ok(match &self.rewire {
            Some(spec) => compile_augmented(graph, features, &self.faf, spec)?,
            None => compile(graph, features, &self.faf)?,
        })
    }
}

/// A dataset to train on. `model_seed` replaces each setting's MLP seed.
#[derive(Debug, Clone, Copy)]
pub struct DatasetRef<'a> {
    pub graph: &'a Graph,
    pub features: &'a FeatureMatrix,
    pub labels: &'a LabeledSplits,
    pub model_seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dataset: usize,
    pub split: usize,
    pub report: TrainReport,
    pub model: Mlp,
}

#[derive(Debug, Clone)]
pub struct SettingResult {
    pub setting: Setting,
    pub dim: usize,
    pub runs: Vec<RunOutcome>,
}

impl SettingResult {
    pub fn vals(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.report.val_at_best).collect()
    }

    pub fn tests(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.report.test_at_best_val).collect()
    }

    pub fn trains(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.report.train_at_best_val).collect()
    }

    pub fn mean_test(&self) -> f64 {
        mean_std(&self.tests()).0
    }

    pub fn mean_val(&self) -> f64 {
        mean_std(&self.vals()).0
    }
}

/// Population mean and standard deviation; NaN for no values.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Applies `f` to every item on up to `jobs` threads, keeping input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs.max(1).min(items.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("no poisoned workers")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("no poisoned workers")
        .into_iter()
        .map(|r| r.expect("every item mapped"))
        .collect()
}

/// Trains every setting on every dataset split. `splits = None` uses all
/// splits of each dataset. Features are compiled once per (dataset, setting).
pub fn run_settings(
    datasets: &[DatasetRef<'_>],
    settings: &[Setting],
    splits: Option<&[usize]>,
    metric: MetricKind,
    jobs: usize,
) -> Result<Vec<SettingResult>> {
    let pairs: Vec<(usize, usize)> = (0..settings.len())
        .flat_map(|s| (0..datasets.len()).map(move |d| (s, d)))
        .collect();
    let compiled = par_map(&pairs, jobs, |&(s, d)| {
        settings[s].compile(datasets[d].graph, datasets[d].features)
    });
    let compiled: Vec<CompiledFeatures> = compiled.into_iter().collect::<Result<_>>()?;

    let mut tasks = Vec::new();
    for (p, &(s, d)) in pairs.iter().enumerate() {
        let available = datasets[d].labels.splits().len();
        let chosen: Vec<usize> = match splits {
            Some(list) => list.to_vec(),
            None => (0..available).collect(),
        };
        for split in chosen {
            if split >= available {
                return Err(CliError::Usage(format!("split {split} out of range ({available} splits)")));
            }
            tasks.push((p, s, d, split));
        }
    }
    let outcomes = par_map(&tasks, jobs, |&(p, s, d, split)| -> Result<RunOutcome> {
        let mut mlp = settings[s].mlp.clone();
        if let Some(seed) = datasets[d].model_seed {
            mlp.seed = seed;
        }
        let out = train(&compiled[p], datasets[d].labels, split, &mlp, metric)
            .map_err(|e| CliError::from(e).context(&settings[s].label))?;
        Ok(RunOutcome {
            dataset: d,
            split,
            report: out.report,
            model: out.model,
        })
    });

    let mut results: Vec<SettingResult> = settings
        .iter()
        .enumerate()
        .map(|(s, setting)| SettingResult {
            setting: setting.clone(),
            dim: compiled[s * datasets.len()].dim(),
            runs: Vec::new(),
        })
        .collect();
    for (&(_, s, _, _), outcome) in tasks.iter().zip(outcomes) {
        results[s].runs.push(outcome?);
    }
    Ok(results)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ablation {
    Hops,
    Reducers,
    LastHop,
    Linear,
}

impl Ablation {
    pub fn name(self) -> &'static str {
        match self {
            Ablation::Hops => "hops",
            Ablation::Reducers => "reducers",
            Ablation::LastHop => "lasthop",
            Ablation::Linear => "linear",
        }
    }
}

/// Settings compared by an ablation around a base configuration.
pub fn ablation_settings(kind: Ablation, faf: &FafConfig, mlp: &MlpConfig) -> Result<Vec<Setting>> {
    let settings = match kind {
        Ablation::Hops => (0..=faf.hops)
            .map(|k| {
                let cfg = FafConfig {
                    hops: k,
                    hop_selection: HopSelection::AllHops,
                    ..faf.clone()
                };
                Setting::new(format!("K={k}"), cfg, mlp.clone())
            })
            .collect(),
        Ablation::Reducers => {
            let mut sets: Vec<Vec<ReducerKind>> = ReducerKind::ALL.iter().map(|&r| vec![r]).collect();
            sets.push(ReducerKind::FAF4.to_vec());
            if !sets.contains(&faf.reducers) {
                sets.push(faf.reducers.clone());
            }
            sets.into_iter()
                .map(|reducers| {
                    let label = reducer_label(&reducers);
                    Setting::new(label, FafConfig { reducers, ..faf.clone() }, mlp.clone())
                })
                .collect()
        }
        Ablation::LastHop => {
            if faf.hops == 0 {
                return Err(CliError::Usage("the last-hop ablation needs hops >= 1".into()));
            }
            [HopSelection::AllHops, HopSelection::LastHopOnly]
                .into_iter()
                .map(|sel| Setting::new(sel.name(), faf.clone().with_hop_selection(sel), mlp.clone()))
                .collect()
        }
        Ablation::Linear => {
            let linear = MlpConfig {
                num_layers: 1,
                ..mlp.clone()
            };
            vec![
                Setting::new(format!("mlp{}L", mlp.num_layers), faf.clone(), mlp.clone()),
                Setting::new("1L", faf.clone(), linear),
            ]
        }
    };
    Ok(settings)
}

/// One row per setting with mean and spread over its runs.
pub fn results_table(results: &[SettingResult]) -> Table {
    let mut table = Table::new([
        "setting",
        "reducers",
        "hops",
        "hop_selection",
        "num_layers",
        "dim",
        "runs",
        "mean_train",
        "mean_val",
        "std_val",
        "mean_test",
        "std_test",
    ]);
    for r in results {
        let (mean_val, std_val) = mean_std(&r.vals());
        let (mean_test, std_test) = mean_std(&r.tests());
        table.push(vec![
            r.setting.label.clone(),
            reducer_label(&r.setting.faf.reducers),
            r.setting.faf.hops.to_string(),
            r.setting.faf.hop_selection.name().to_string(),
            r.setting.mlp.num_layers.to_string(),
            r.dim.to_string(),
            r.runs.len().to_string(),
            num(mean_std(&r.trains()).0),
            num(mean_val),
            num(std_val),
            num(mean_test),
            num(std_test),
        ]);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn par_map_keeps_order() {
        let items: Vec<u64> = (0..50).collect();
        assert_eq!(par_map(&items, 4, |x| x * x), items.iter().map(|x| x * x).collect::<Vec<_>>());
        assert!(par_map(&Vec::<u8>::new(), 3, |x| *x).is_empty());
    }

    #[test]
    fn ablation_grids() {
        let faf = FafConfig::new(vec![ReducerKind::Mean], 3);
        let mlp = MlpConfig::default();
        let hops = ablation_settings(Ablation::Hops, &faf, &mlp).unwrap();
        assert_eq!(hops.iter().map(|s| s.faf.hops).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
        let reducers = ablation_settings(Ablation::Reducers, &faf, &mlp).unwrap();
        assert_eq!(reducers.len(), ReducerKind::ALL.len() + 1);
        let last = ablation_settings(Ablation::LastHop, &faf, &mlp).unwrap();
        assert_eq!(last[1].faf.hop_selection, HopSelection::LastHopOnly);
        assert!(ablation_settings(Ablation::LastHop, &FafConfig::new(vec![ReducerKind::Mean], 0), &mlp).is_err());
        let linear = ablation_settings(Ablation::Linear, &faf, &mlp).unwrap();
        assert_eq!(linear[1].mlp.num_layers, 1);
        assert_eq!(linear[0].label, "mlp2L");
    }

    #[test]
    fn spread_is_population() {
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 1.0));
        assert!(mean_std(&[]).0.is_nan());
    }
}
