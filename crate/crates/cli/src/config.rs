//! Flat `key = value` run configuration.
//!
//! Files hold one assignment per line; `#` starts a comment. Values from
//! `--set KEY=VALUE` override the file, which overrides `FAF_SEED`, which
//! overrides the built-in defaults. List-valued keys (used by `sweep`)
//! separate items with commas; reducer sets are separated by `;`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use faf_core::reducers::{format_reducer_list, parse_reducer_list};
use faf_core::{FafConfig, HopSelection, KaEncoder, ReducerKind, RewireCombine, RewireMode, RewireSpec, Scaling};
use faf_ml::{MetricKind, MlpConfig, Normalization};

use crate::error::{CliError, Result};

/// Every accepted key with its default and a one-line description.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("data", "", "directory holding graph.txt, features.csv|bin, labels.txt, splits.json"),
    ("graph", "", "edge list path (overrides data)"),
    ("features", "", "feature CSV or FAF1 path (overrides data)"),
    ("labels", "", "label file path (overrides data)"),
    ("splits", "", "split JSON path (overrides data)"),
    ("split", "all", "split index to use, or all"),
    ("reducers", "mean", "reducer list, e.g. mean,sum,max; sets separated by ;"),
    ("hops", "2", "number of aggregation hops"),
    ("hop_selection", "all", "all | last | last+base"),
    ("scaling", "none", "none | standardize"),
    ("ka_precision", "20", "digits per coordinate of the KA encoder"),
    ("rewire", "none", "none | drop | split"),
    ("rewire_combine", "concat", "replace | concat"),
    ("rewire_threshold", "0", "edges with cosine similarity below this are negative"),
    ("num_layers", "2", "MLP depth (1 = linear)"),
    ("hidden_channels", "64", "hidden width"),
    ("dropout", "0", "dropout probability"),
    ("normalization", "none", "none | layer_norm | batch_norm"),
    ("learning_rate", "0.01", "AdamW learning rate"),
    ("weight_decay", "0", "AdamW decoupled weight decay"),
    ("max_epochs", "2500", "training epochs"),
    ("metric", "accuracy", "accuracy | roc_auc"),
    ("seed", "0", "seed for models, permutations and generators"),
    ("jobs", "1", "parallel runs"),
    ("grid", "explicit", "explicit | reference (sweep)"),
    ("repeats", "5", "permutations per column (explain)"),
    ("mask", "test", "train | val | test (explain)"),
    ("side", "100", "Minesweeper grid side"),
    ("mine_rate", "0.2", "Minesweeper mine fraction"),
    ("mask_rate", "0.5", "Minesweeper masked fraction"),
    ("n_per_class", "200", "planted partition class size"),
    ("classes", "4", "planted partition class count"),
    ("p_in", "0.05", "planted partition within-class edge probability"),
    ("p_out", "0.005", "planted partition cross-class edge probability"),
    ("feature_noise", "1.5", "planted partition feature noise"),
    ("copies", "25", "XOR copies per corner"),
    ("full", "false", "verify: also run the training-based checks"),
];

fn default_of(key: &str) -> Option<&'static str> {
    KEYS.iter().find(|(k, _, _)| *k == key).map(|(_, d, _)| *d)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", i + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| CliError::Usage(format!("config line {}: {}", i + 1, strip(e))))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if default_of(key).is_none() {
            return Err(CliError::Usage(format!("unknown config key {key:?}")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies a `KEY=VALUE` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {pair:?}")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn is_set(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    /// The effective value of `key`.
    pub fn get(&self, key: &str) -> &str {
        match self.values.get(key) {
            Some(v) => v,
            None => default_of(key).unwrap_or_else(|| panic!("{key} is not a config key")),
        }
    }

    /// Every key with its effective value, one `key = value` per line.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        for (key, _, _) in KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key));
        }
        out
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        parse_value(key, self.get(key))
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        let items: Vec<&str> = self.get(key).split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        if items.is_empty() {
            return Err(CliError::Usage(format!("{key} needs at least one value")));
        }
        items.into_iter().map(|s| parse_value(key, s)).collect()
    }

    /// The single value of `key`; lists are rejected.
    pub fn scalar<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let values = self.list(key)?;
        if values.len() != 1 {
            return Err(CliError::Usage(format!("{key} takes a single value here (lists are for sweep)")));
        }
        Ok(values.into_iter().next().expect("one value"))
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            other => Err(CliError::Usage(format!("{key}: expected true or false, got {other:?}"))),
        }
    }

    pub fn seed(&self) -> Result<u64> {
        self.parsed("seed")
    }

    pub fn jobs(&self) -> Result<usize> {
        let jobs: usize = self.parsed("jobs")?;
        if jobs == 0 {
            return Err(CliError::Usage("jobs must be at least 1".into()));
        }
        Ok(jobs)
    }

    pub fn metric(&self) -> Result<MetricKind> {
        self.parsed("metric")
    }

    pub fn reducer_sets(&self) -> Result<Vec<Vec<ReducerKind>>> {
        let sets: Vec<&str> = self.get("reducers").split(';').map(str::trim).filter(|s| !s.is_empty()).collect();
        if sets.is_empty() {
            return Err(CliError::Usage("reducers needs at least one set".into()));
        }
        sets.into_iter().map(|s| Ok(parse_reducer_list(s)?)).collect()
    }

    pub fn hop_selection(&self) -> Result<HopSelection> {
        Ok(HopSelection::parse(self.get("hop_selection"))?)
    }

    pub fn scaling(&self) -> Result<Scaling> {
        Ok(Scaling::parse(self.get("scaling"))?)
    }

    pub fn faf_config(&self) -> Result<FafConfig> {
        let sets = self.reducer_sets()?;
        if sets.len() != 1 {
            return Err(CliError::Usage("reducers takes a single set here (sets are for sweep)".into()));
        }
        let cfg = FafConfig {
            reducers: sets.into_iter().next().expect("one set"),
            hops: self.scalar("hops")?,
            hop_selection: self.hop_selection()?,
            scaling: self.scaling()?,
            ka: KaEncoder::new(self.parsed("ka_precision")?)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn rewire_spec(&self) -> Result<Option<RewireSpec>> {
        let mode = match self.get("rewire") {
            "none" => return Ok(None),
            other => RewireMode::parse(other)?,
        };
        let mut spec = RewireSpec::new(mode, RewireCombine::parse(self.get("rewire_combine"))?);
        spec.similarity_threshold = self.parsed("rewire_threshold")?;
        Ok(Some(spec))
    }

    pub fn mlp_config(&self) -> Result<MlpConfig> {
        let cfg = MlpConfig {
            num_layers: self.scalar("num_layers")?,
            hidden_channels: self.scalar("hidden_channels")?,
            dropout: self.scalar("dropout")?,
            normalization: self.scalar::<Normalization>("normalization")?,
            learning_rate: self.scalar("learning_rate")?,
            weight_decay: self.scalar("weight_decay")?,
            max_epochs: self.parsed("max_epochs")?,
            seed: self.seed()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `None` means every split.
    pub fn split_index(&self) -> Result<Option<usize>> {
        match self.get("split") {
            "all" => Ok(None),
            other => parse_value("split", other).map(Some),
        }
    }

    /// Resolved dataset paths; explicit keys win over `data`.
    pub fn data_paths(&self) -> Result<DataPaths> {
        let dir = PathBuf::from(self.get("data"));
        let pick = |key: &str, names: &[&str]| -> Option<PathBuf> {
            if !self.get(key).is_empty() {
                return Some(PathBuf::from(self.get(key)));
            }
            if self.get("data").is_empty() {
                return None;
            }
            names.iter().map(|n| dir.join(n)).find(|p| p.exists()).or_else(|| Some(dir.join(names[0])))
        };
        let graph = pick("graph", &["graph.txt"])
            .ok_or_else(|| CliError::Usage("set data=DIR or graph=PATH".into()))?;
        let features = pick("features", &["features.csv", "features.bin"])
            .ok_or_else(|| CliError::Usage("set data=DIR or features=PATH".into()))?;
        Ok(DataPaths {
            graph,
            features,
            labels: pick("labels", &["labels.txt"]),
            splits: pick("splits", &["splits.json"]),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataPaths {
    pub graph: PathBuf,
    pub features: PathBuf,
    pub labels: Option<PathBuf>,
    pub splits: Option<PathBuf>,
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| CliError::Usage(format!("{key}: cannot parse {value:?}: {e}")))
}

fn strip(e: CliError) -> String {
    match e {
        CliError::Usage(m) | CliError::Data(m) | CliError::Verification(m) => m,
    }
}

/// Canonical text of a reducer set, as used in tables.
pub fn reducer_label(reducers: &[ReducerKind]) -> String {
    format_reducer_list(reducers)
}
