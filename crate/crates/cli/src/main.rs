//! `crstc`: command-line driver for feature extraction, synthetic data,
//! ST-VAE training, segmentation, evaluation and annotation aggregation.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration
//! error, 3 config hash mismatch between an input artifact and the current
//! configuration.

mod aggregate;
mod artifacts;
mod config;
mod eval;
mod features;
mod segment;
mod synth;
mod train;
mod truth;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use thiserror::Error;

use config::RunConfig;

#[derive(Debug, Error)]
pub enum Failure {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{artifact} was produced with config hash {found}, current configuration hashes to {expected} (use --force to override)")]
    HashMismatch {
        artifact: String,
        found: String,
        expected: String,
    },
}

#[derive(Parser)]
#[command(
    name = "crstc",
    about = "Unsupervised cry segmentation via sparse-transition VAE embeddings"
)]
#[command(disable_version_flag = true, arg_required_else_help = true)]
struct Cli {
    /// TOML run configuration; defaults apply to anything it omits.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one config value, e.g. `--set stvae.epochs=20`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Set every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for per-file work.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Accept input artifacts whose config hash differs from the current one.
    #[arg(long, global = true)]
    force: bool,
    /// Print name and version as JSON and exit.
    #[arg(long)]
    version: bool,
    /// Print the resolved configuration as TOML and exit.
    #[arg(long)]
    config_dump: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Extract per-frame features from every WAV file in a directory.
    Features {
        wav_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic dataset with known domain labels.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the ST-VAE on a feature directory.
    Train {
        feature_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Shorthand for `--set stvae.epochs=N`.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Cluster transition embeddings and write per-file events.
    Segment {
        feature_dir: PathBuf,
        /// Directory written by `train`.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// `kmeans`, `bisecting` or `mean-shift`.
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        k: Option<usize>,
        /// Cluster all files together.
        #[arg(long)]
        pooled: bool,
    },
    /// Score a segmentation against ground truth.
    Eval {
        /// Directory written by `segment`.
        segments: PathBuf,
        /// Annotation CSV, or a directory of TextGrid / events / labels files.
        #[arg(long)]
        truth: PathBuf,
        /// Write report.json and summary.csv here instead of printing JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run name for the summary row.
        #[arg(long, default_value = "run")]
        name: String,
    },
    /// Majority-vote several annotators into one label set.
    Aggregate {
        /// One annotation CSV or annotation directory per annotator.
        #[arg(required = true)]
        annotators: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn version_json() -> String {
    serde_json::json!({
        "name": "crstc",
        "version": env!("CARGO_PKG_VERSION"),
        "feature_format": String::from_utf8_lossy(crstc::dsp::FEATURE_MAGIC),
        "checkpoint_format": String::from_utf8_lossy(crstc::tensor::CHECKPOINT_MAGIC),
    })
    .to_string()
}

/// Writes one line of data to stdout; a closed pipe ends output quietly.
fn emit(data: impl std::fmt::Display) -> Result<()> {
    match writeln!(std::io::stdout().lock(), "{data}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> Result<()> {
    if cli.version {
        emit(version_json())?;
        return Ok(());
    }
    let mut overrides = cli.set.clone();
    match &cli.command {
        Some(Command::Train { epochs: Some(e), .. }) => overrides.push(format!("stvae.epochs={e}")),
        Some(Command::Segment { method, k, pooled, .. }) => {
            if let Some(m) = method {
                overrides.push(format!("clustering.method=\"{m}\""));
            }
            if let Some(k) = k {
                overrides.push(format!("clustering.k={k}"));
            }
            if *pooled {
                overrides.push("clustering.pooled=true".into());
            }
        }
        _ => {}
    }
    let cfg = RunConfig::resolve(cli.config.as_deref(), &overrides, cli.seed)?;
    if cli.config_dump {
        emit(format!(
            "# config_hash = \"{}\"\n{}",
            cfg.hash(),
            cfg.to_toml().trim_end()
        ))?;
        return Ok(());
    }
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Failure::Config("--jobs must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let Some(command) = cli.command else {
        return Err(Failure::Config("no subcommand given (see --help)".into()).into());
    };
    match command {
        Command::Features { wav_dir, out } => {
            let m = features::run(&cfg, &wav_dir, &out)?;
            emit(serde_json::json!({ "files": m.files.len(), "config_hash": m.provenance.config_hash }))?;
        }
        Command::Synth { out } => {
            let m = synth::run(&cfg, &out)?;
            emit(serde_json::json!({ "files": m.files.len(), "config_hash": m.provenance.config_hash }))?;
        }
        Command::Train { feature_dir, out, .. } => {
            let m = train::run(&cfg, &feature_dir, &out, cli.force)?;
            emit(serde_json::json!({
                "epochs": m.epochs,
                "final_loss": m.final_loss,
                "best_epoch": m.best_epoch,
                "config_hash": m.provenance.config_hash,
            }))?;
        }
        Command::Segment {
            feature_dir,
            model,
            out,
            ..
        } => {
            let m = segment::run(&cfg, &feature_dir, &model, &out, cli.force)?;
            let events: usize = m.files.iter().map(|f| f.events).sum();
            emit(
                serde_json::json!({ "files": m.files.len(), "events": events, "config_hash": m.provenance.config_hash }),
            )?;
        }
        Command::Eval {
            segments,
            truth,
            out,
            name,
        } => {
            let report = eval::run(&cfg, &segments, &truth, cli.force)?;
            match out {
                Some(dir) => {
                    eval::write_outputs(&report, &dir, &name)?;
                    let mut row = Vec::new();
                    crstc::metrics::write_summary_row(
                        &mut row,
                        &name,
                        &report.provenance.config_hash,
                        &report.report,
                        true,
                    )?;
                    emit(String::from_utf8_lossy(&row).trim_end())?;
                }
                None => emit(serde_json::to_string_pretty(&report)?)?,
            }
        }
        Command::Aggregate { annotators, out } => {
            let m = aggregate::run(&cfg, &annotators, &out)?;
            emit(serde_json::json!({ "files": m.files.len(), "config_hash": m.provenance.config_hash }))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Failure>() {
                Some(Failure::Config(_)) => ExitCode::from(2),
                Some(Failure::HashMismatch { .. }) => ExitCode::from(3),
                None => ExitCode::FAILURE,
            }
        }
    }
}
