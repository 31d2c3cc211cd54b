//! The `dermalab` command line: `synth`, `pipeline`, `analyze`, `stats`, `report`.
//!
//! Exit codes: 0 ok, 2 usage, 3 ingest, 4 modeling, 5 stats, 6 report.

mod analyze;
mod config;
mod pipeline;
mod report;
mod stats_cmd;
mod svg;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;
use thiserror::Error;

use crate::synth::{gen_session, write_session, Relation};

pub use config::{ForestOverrides, PipelineToggles, RunConfig};

/// Environment variable consulted when neither `--seed` nor the config sets one.
pub const SEED_ENV: &str = "DERMALAB_SEED";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Ingest(String),
    #[error("{0}")]
    Modeling(String),
    #[error("{0}")]
    Stats(String),
    #[error("{0}")]
    Report(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Ingest(_) => 3,
            CliError::Modeling(_) => 4,
            CliError::Stats(_) => 5,
            CliError::Report(_) => 6,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dermalab", version, about = "Electrodermal activity pipeline and analysis")]
pub struct Cli {
    /// JSON file of flat dotted keys, e.g. {"cvxeda.alpha": 0.0008}.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides a config key; repeatable. VALUE is parsed as JSON.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Random seed; falls back to the config, then to DERMALAB_SEED, then 0.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic session with a planted environment relation.
    Synth(SynthArgs),
    /// Clean, filter, decompose and featurize a session directory.
    Pipeline(PipelineArgs),
    /// Train a random forest on features.csv and attribute it with Shapley values.
    Analyze(AnalyzeArgs),
    /// Per-event summaries, Kruskal-Wallis comparisons and SAM correlations.
    Stats(StatsArgs),
    /// Render SVG plots and report.md from analyze and stats outputs.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 8)]
    pub windows: usize,
    /// co2, ir or none.
    #[arg(long, default_value = "co2")]
    pub relation: Relation,
    #[arg(short = 'o', long = "out", value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long, value_name = "DIR")]
    pub session: PathBuf,
    #[arg(short = 'o', long = "out", value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long)]
    pub no_clean: bool,
    #[arg(long)]
    pub no_normalize: bool,
    /// Detect responses on the filtered signal instead of a cvxEDA phasic component.
    #[arg(long)]
    pub no_decompose: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Regression,
    Classification,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Directory holding features.csv.
    #[arg(long, value_name = "DIR")]
    pub run: PathBuf,
    /// Output directory; defaults to the run directory.
    #[arg(short = 'o', long = "out", value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = TaskArg::Regression)]
    pub task: TaskArg,
    /// Target column; tvsymp for regression, arousal for classification.
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub split_ratio: Option<f64>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long, value_name = "DIR")]
    pub run: PathBuf,
    #[arg(short = 'o', long = "out", value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// `NAME=label,label/label`; repeatable, replaces the default comparisons.
    #[arg(long = "compare", value_name = "SPEC")]
    pub compare: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, value_name = "DIR")]
    pub run: PathBuf,
    #[arg(short = 'o', long = "out", value_name = "DIR")]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for kv in &cli.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        let v = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
        cfg.set(k.trim(), &v)?;
    }
    let seed = resolve_seed(cli.seed, cfg.seed)?;

    match &cli.command {
        Command::Synth(a) => cmd_synth(a, seed),
        Command::Pipeline(a) => {
            cfg.pipeline.clean &= !a.no_clean;
            cfg.pipeline.normalize &= !a.no_normalize;
            cfg.pipeline.decompose &= !a.no_decompose;
            cfg.validate()?;
            pipeline::run(&a.session, &a.out, &cfg)
        }
        Command::Analyze(a) => {
            if let Some(t) = a.trees {
                cfg.forest.n_trees = Some(t);
            }
            if let Some(r) = a.split_ratio {
                cfg.split_ratio = r;
            }
            cfg.validate()?;
            analyze::run(a, &cfg, seed)
        }
        Command::Stats(a) => stats_cmd::run(&a.run, a.out.as_deref().unwrap_or(&a.run), &a.compare),
        Command::Report(a) => report::run(&a.run, a.out.as_deref().unwrap_or(&a.run)),
    }
}

fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}=`{v}` is not a non-negative integer"))),
        Err(_) => Ok(0),
    }
}

fn cmd_synth(a: &SynthArgs, seed: u64) -> Result<(), CliError> {
    let bundle = gen_session(a.windows, a.relation, seed).map_err(|e| CliError::Usage(e.to_string()))?;
    write_session(&bundle, &a.out).map_err(|e| CliError::Usage(e.to_string()))?;
    eprintln!(
        "wrote {} windows ({:?}, seed {seed}) to {}",
        a.windows,
        a.relation,
        a.out.display()
    );
    Ok(())
}

/// Creates `dir` and writes each file atomically; on failure removes what was written.
fn write_outputs(
    dir: &Path,
    files: &[(String, Vec<u8>)],
    err: fn(String) -> CliError,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| err(format!("creating {}: {e}", dir.display())))?;
    for (i, (name, bytes)) in files.iter().enumerate() {
        let path = dir.join(name);
        if let Err(e) = crate::atomic_write(&path, bytes) {
            for (done, _) in &files[..i] {
                let _ = std::fs::remove_file(dir.join(done));
            }
            return Err(err(format!("writing {}: {e}", path.display())));
        }
    }
    Ok(())
}

fn json_bytes(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s.into_bytes()
}

fn read_text(path: &Path, err: fn(String) -> CliError) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| err(format!("reading {}: {e}", path.display())))
}
