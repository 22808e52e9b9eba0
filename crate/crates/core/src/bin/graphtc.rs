use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use graphtc::config::ExperimentConfig;
use graphtc::run::{run, Command};
use graphtc::{Error, Result};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Sub {
    Generate,
    Complete,
    SweepSs,
    CompareGraphModes,
    AlphaProbe,
    ScalingProbe,
    TheoryCheck,
    CvRank,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Generate => Command::Generate,
            Sub::Complete => Command::Complete,
            Sub::SweepSs => Command::SweepSs,
            Sub::CompareGraphModes => Command::CompareGraphModes,
            Sub::AlphaProbe => Command::AlphaProbe,
            Sub::ScalingProbe => Command::ScalingProbe,
            Sub::TheoryCheck => Command::TheoryCheck,
            Sub::CvRank => Command::CvRank,
        }
    }
}

/// Dynamic-graph-regularized tensor completion experiments.
///
/// Settings come from the defaults, then the `--config` file, then `--set`
/// overrides, then the dedicated flags. The output directory receives the
/// resolved `config.txt`, `metrics.csv` and `seeds.txt`.
#[derive(Debug, Parser)]
#[command(name = "graphtc", version)]
struct Cli {
    #[arg(value_enum)]
    command: Sub,

    /// Flat `key = value` configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    #[arg(long, value_name = "U64")]
    seed: Option<u64>,

    /// Worker threads for grid commands (default: all cores).
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,

    /// Use the conservative step size from the convergence bound.
    #[arg(long)]
    beta_theory: bool,

    /// Sample observation positions with replacement.
    #[arg(long)]
    with_replacement: bool,

    /// Treat zero traffic readings as measurements instead of gaps.
    #[arg(long)]
    zeros_are_values: bool,

    /// Extra `key=value` assignments applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
            let mut cfg = ExperimentConfig::parse(&text)?;
            cfg.input.resolve_paths(path.parent().unwrap_or(Path::new(".")));
            cfg
        }
        None => ExperimentConfig::default(),
    };
    for item in &cli.overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("--set expects KEY=VALUE, got `{item}`")))?;
        cfg.set(key.trim(), value.trim())?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.solver.beta_theory |= cli.beta_theory;
    cfg.sampling.with_replacement |= cli.with_replacement;
    cfg.input.zeros_are_values |= cli.zeros_are_values;
    if let Ok(cwd) = std::env::current_dir() {
        cfg.input.resolve_paths(&cwd);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main_inner(cli: &Cli) -> Result<()> {
    let cfg = resolve(cli)?;
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("--jobs: {e}")))?;
    }
    let command = Command::from(cli.command);
    log::info!("running {command} into {}", cli.out.display());
    let output = run(command, &cfg, &cli.out)?;
    print!("{}", output.metrics.to_csv());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match main_inner(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
