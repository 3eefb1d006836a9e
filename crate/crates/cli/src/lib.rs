//! Command logic behind the `swarmer` binary. Every command returns its
//! process exit code so tests can drive it without spawning a process.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use swarmer_core::engine::{self, emit_comparison, emit_metrics, emit_snapshot, ConfigError, EngineError, RunConfig};
use swarmer_core::fixtures::{generate, FixtureKind};
use swarmer_core::geometry::{Dim, GeometryError, PointCloud};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_WARN: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
/// Simulation failed for a reason that is neither config nor I/O.
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "swarmer", version, about = "Swarm-merging localization simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation and write metrics.csv, snapshots and summary.txt.
    Run(RunArgs),
    /// Run SwarMer, triangulation and trilateration from the same deployment.
    Compare(RunArgs),
    /// Generate a synthetic point cloud.
    Gen(GenArgs),
    /// Check a point-cloud file for format errors and duplicates.
    Validate { path: PathBuf },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override applied after the file, in order; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Shorthand for `--set seed=N`, applied last.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// grid, line, ring or blob
    pub kind: String,
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(2..=3))]
    pub dim: u8,
    #[arg(long, default_value_t = 1.0)]
    pub spacing: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory to write `<kind>.xyz` into; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Cloud(GeometryError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Engine(EngineError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) | CliError::Cloud(_) => EXIT_CONFIG,
            CliError::Io { .. } => EXIT_IO,
            CliError::Engine(e) => match e {
                EngineError::Config(_) | EngineError::Geometry(GeometryError::Malformed { .. }) => EXIT_CONFIG,
                EngineError::Geometry(GeometryError::Io { .. }) => EXIT_IO,
                EngineError::Io { .. } | EngineError::Csv(_) | EngineError::Snapshot(_) => EXIT_IO,
                _ => EXIT_INTERNAL,
            },
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Config(c) => CliError::Config(c),
            other => CliError::Engine(other),
        }
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::Io { path, source } => CliError::Io { path: path.into(), source },
            other => CliError::Cloud(other),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

/// Runs a parsed command and reports errors on stderr.
pub fn execute(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Compare(args) => cmd_compare(&args),
        Command::Gen(args) => cmd_gen(&args),
        Command::Validate { path } => return cmd_validate(&path),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Builds the effective config: file, then `--set` in order, then `--seed`.
/// A relative `cloud_path` in the file is taken relative to the file.
pub fn load_config(args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        cfg.apply_text(&text)?;
        if let (Some(cloud), Some(dir)) = (&cfg.cloud_path, path.parent()) {
            if Path::new(cloud).is_relative() {
                cfg.cloud_path = Some(dir.join(cloud).to_string_lossy().into_owned());
            }
        }
    }
    for kv in &args.set {
        cfg.apply_override(kv)?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn prepare(args: &RunArgs) -> Result<(RunConfig, PointCloud), CliError> {
    let cfg = load_config(args)?;
    let path = cfg.cloud_path.as_deref().ok_or_else(|| ConfigError::Invalid("cloud_path is required".into()))?;
    let (cloud, report) = PointCloud::load(Path::new(path))?;
    if report.duplicates > 0 {
        warn!("{path}: dropped {} duplicate points", report.duplicates);
    }
    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    info!("{} points from {path}, seed {}", cloud.len(), cfg.seed);
    Ok((cfg, cloud))
}

pub fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let (cfg, cloud) = prepare(args)?;
    let outcome = engine::run(&cloud, &cfg)?;
    emit_metrics(&outcome.trace, &args.out.join("metrics.csv"))?;
    for snap in &outcome.snapshots {
        emit_snapshot(&snap.est, outcome.planar, snap.index, &args.out)?;
    }
    let summary = args.out.join("summary.txt");
    fs::write(&summary, outcome.summary_text(&cfg)).map_err(io_err(&summary))?;
    info!("{}: final HD {}", outcome.status.as_str(), outcome.final_hd);
    Ok(())
}

pub fn cmd_compare(args: &RunArgs) -> Result<(), CliError> {
    let (cfg, cloud) = prepare(args)?;
    let c = engine::compare(&cloud, &cfg)?;
    emit_comparison(&c, &args.out)?;
    Ok(())
}

pub fn cmd_gen(args: &GenArgs) -> Result<(), CliError> {
    let kind: FixtureKind = args.kind.parse().map_err(CliError::Usage)?;
    let dim = if args.dim == 2 { Dim::Two } else { Dim::Three };
    let cloud = generate(kind, args.n, dim, args.spacing, args.seed)?;
    match &args.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
            let path = dir.join(format!("{kind}.xyz"));
            fs::write(&path, cloud.to_text()).map_err(io_err(&path))?;
        }
        None => print!("{}", cloud.to_text()),
    }
    Ok(())
}

/// 0 clean, 1 duplicates found, 2 malformed, 3 unreadable.
pub fn cmd_validate(path: &Path) -> i32 {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return EXIT_IO;
        }
    };
    match PointCloud::parse(&text) {
        Err(e) => {
            println!("{}: malformed: {e}", path.display());
            EXIT_CONFIG
        }
        Ok((cloud, report)) if report.duplicates > 0 => {
            println!(
                "{}: {} points, {} duplicates (removed on load)",
                path.display(),
                cloud.len(),
                report.duplicates
            );
            EXIT_WARN
        }
        Ok((cloud, _)) => {
            println!("{}: {} points, {}D, clean", path.display(), cloud.len(), cloud.dim().as_usize());
            EXIT_OK
        }
    }
}
