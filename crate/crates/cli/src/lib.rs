//! The `faf` command-line tool: synthetic data, feature compilation,
//! training, sweeps, ablations, importance reports and self-verification.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod table;
pub mod verify;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::commands::SynthKind;
use crate::config::RunConfig;
use crate::error::Result;
use crate::experiments::Ablation;

#[derive(Debug, Parser)]
#[command(name = "faf", version, about = "Fixed aggregation features for node classification")]
pub struct Cli {
    /// Flat key = value configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override a configuration key (repeatable).
    #[arg(long = "set", short = 's', global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Directory for every output file.
    #[arg(long, global = true, value_name = "DIR", default_value = "faf-out")]
    pub out_dir: PathBuf,
    /// Seed; defaults to FAF_SEED, then the config file, then 0.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Parallel runs.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Synth {
        #[arg(value_enum)]
        kind: SynthArg,
    },
    /// Compile features to a FAF1 matrix with a column index.
    Build,
    /// Train an MLP on compiled features.
    Train,
    /// Grid search with a resumable ledger.
    Sweep,
    /// Compare settings around the configured one.
    Ablate {
        #[arg(value_enum)]
        kind: AblationArg,
    },
    /// Permutation importance grouped by hop.
    Explain,
    /// Run the property checks.
    Verify {
        /// Also run the training-based checks (minutes).
        #[arg(long)]
        full: bool,
    },
    /// Print the effective configuration.
    Config,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SynthArg {
    Minesweeper,
    Fig4,
    Sbm,
    Xor,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AblationArg {
    Hops,
    Reducers,
    Lasthop,
    Linear,
}

/// Layers the config file, `FAF_SEED`, `--set` and the dedicated flags.
pub fn effective_config(cli: &Cli, env_seed: Option<String>) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = env_seed.filter(|_| !cfg.is_set("seed")) {
        cfg.set("seed", &seed)?;
    }
    for pair in &cli.set {
        cfg.set_pair(pair)?;
    }
    if let Some(seed) = cli.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    if let Some(jobs) = cli.jobs {
        cfg.set("jobs", &jobs.to_string())?;
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = effective_config(cli, std::env::var("FAF_SEED").ok())?;
    let out = cli.out_dir.as_path();
    match &cli.command {
        Command::Synth { kind } => {
            let kind = match kind {
                SynthArg::Minesweeper => SynthKind::Minesweeper,
                SynthArg::Fig4 => SynthKind::Fig4,
                SynthArg::Sbm => SynthKind::Sbm,
                SynthArg::Xor => SynthKind::Xor,
            };
            commands::cmd_synth(&cfg, kind, out)
        }
        Command::Build => commands::cmd_build(&cfg, out).map(drop),
        Command::Train => commands::cmd_train(&cfg, out).map(drop),
        Command::Sweep => commands::cmd_sweep(&cfg, out).map(drop),
        Command::Ablate { kind } => {
            let kind = match kind {
                AblationArg::Hops => Ablation::Hops,
                AblationArg::Reducers => Ablation::Reducers,
                AblationArg::Lasthop => Ablation::LastHop,
                AblationArg::Linear => Ablation::Linear,
            };
            commands::cmd_ablate(&cfg, kind, out).map(drop)
        }
        Command::Explain => commands::cmd_explain(&cfg, out).map(drop),
        Command::Verify { full } => commands::cmd_verify(&cfg, *full, out).map(drop),
        Command::Config => {
            print!("{}", cfg.echo());
            Ok(())
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("faf: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("faf").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn seed_precedence() {
        let cli = parse(&["train", "--set", "hops=3"]);
        assert_eq!(effective_config(&cli, None).unwrap().get("seed"), "0");
        assert_eq!(effective_config(&cli, Some("5".into())).unwrap().get("seed"), "5");
        let cli = parse(&["train", "--set", "seed=6"]);
        assert_eq!(effective_config(&cli, Some("5".into())).unwrap().get("seed"), "6");
        let cli = parse(&["--seed", "7", "train", "-s", "seed=6"]);
        assert_eq!(effective_config(&cli, Some("5".into())).unwrap().get("seed"), "7");
    }

    #[test]
    fn config_file_beats_environment_seed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "seed = 11\njobs = 2\n").unwrap();
        let cli = parse(&["--config", path.to_str().unwrap(), "build", "--jobs", "3"]);
        let cfg = effective_config(&cli, Some("5".into())).unwrap();
        assert_eq!(cfg.get("seed"), "11");
        assert_eq!(cfg.get("jobs"), "3");
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["faf", "no-such-command"]), 1);
        assert_eq!(run(["faf", "config", "--set", "bogus=1"]), 1);
        assert_eq!(run(["faf", "--help"]), 0);
    }
}
