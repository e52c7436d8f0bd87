//! Command-line driver: dataset generation, model training, parameter sweeps
//! and manifest replay, all deterministic under a fixed seed.

pub mod commands;
pub mod config;
pub mod manifest;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use commands::{cmd_gen, cmd_sweep, cmd_train, GenConfig, SweepConfig, SweepParam, TrainConfig};
use config::{resolve_scene, SceneFlags};
use manifest::RunManifest;
use shieldscatter::{Error, Result};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "SHIELDSCATTER_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "shieldscatter",
    version,
    about = "Backscatter-assisted authentication: synthetic datasets, training and sweeps"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate benign and attack sessions: trace files plus a profile CSV.
    Gen {
        /// Output directory for traces, dataset.csv and the manifest.
        #[arg(long)]
        out_dir: PathBuf,
        /// Scene file (key = value; see the README schema).
        #[arg(long)]
        scene: Option<PathBuf>,
        /// Benign sessions to generate (the same number of attack sessions
        /// is generated alongside).
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Closest attacker placement, meters from the user.
        #[arg(long, default_value_t = 0.5)]
        attacker_min: f64,
        /// Farthest attacker placement, meters from the user.
        #[arg(long, default_value_t = 1.5)]
        attacker_max: f64,
        /// Skip writing per-session trace files (dataset.csv only).
        #[arg(long, default_value_t = false)]
        skip_traces: bool,
        #[arg(long)]
        snr_db: Option<f64>,
        #[arg(long)]
        tag_count: Option<usize>,
        #[arg(long)]
        fading_std: Option<f64>,
    },
    /// Train a one-class model on the positive rows of a dataset CSV.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// Output path of the model JSON.
        #[arg(long)]
        model_out: PathBuf,
        #[arg(long, default_value_t = 0.16)]
        nu: f64,
        /// Kernel width: `auto` (median pairwise distance) or a number.
        #[arg(long, default_value = "auto")]
        sigma: String,
        /// Use at most this many positive rows.
        #[arg(long)]
        train_size: Option<usize>,
    },
    /// Sweep one parameter and report TP/FP per grid point as CSV.
    Sweep {
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Comma-separated grid, e.g. `0.05,0.15,0.25`.
        #[arg(long)]
        grid: String,
        /// Evaluation trials per grid point (benign and attack each).
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Output CSV path; a JSON mirror is written alongside.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        scene: Option<PathBuf>,
        /// Benign profiles used to train each operating model.
        #[arg(long, default_value_t = 200)]
        train_size: usize,
        /// ν of the operating model (the `nu` sweep scans its grid instead).
        #[arg(long, default_value_t = 0.05)]
        nu: f64,
        #[arg(long, default_value = "auto")]
        sigma: String,
        #[arg(long, default_value_t = 0.5)]
        attacker_min: f64,
        #[arg(long, default_value_t = 1.5)]
        attacker_max: f64,
        #[arg(long)]
        snr_db: Option<f64>,
        #[arg(long)]
        tag_count: Option<usize>,
        #[arg(long)]
        fading_std: Option<f64>,
    },
    /// Re-run a recorded manifest; outputs are byte-identical to the
    /// original run.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

/// Map an error to the process exit code: 2 for configuration problems,
/// 3 for numerical failures.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::SolverFailure { .. }
        | Error::NoBackscatterDetected
        | Error::SegmentTooShort { .. }
        | Error::Scenario { .. } => 3,
        _ => 2,
    }
}

fn parse_sigma(s: &str) -> Result<Option<f64>> {
    if s.eq_ignore_ascii_case("auto") {
        Ok(None)
    } else {
        let v: f64 = s
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("sigma must be `auto` or a number, got {s:?}")))?;
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::InvalidConfig("sigma must be positive and finite".into()));
        }
        Ok(Some(v))
    }
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let grid: Vec<f64> = s
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("bad grid value {p:?}")))
        })
        .collect::<Result<_>>()?;
    if grid.is_empty() {
        return Err(Error::InvalidConfig("sweep grid must be non-empty".into()));
    }
    Ok(grid)
}

/// Honor the worker-count cap. Safe to call repeatedly; only the first call
/// can install the global pool.
pub fn init_thread_pool() {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        }
    }
}

/// Execute a parsed command line. Prints a short summary per command.
pub fn run(cli: Cli) -> Result<()> {
    init_thread_pool();
    match cli.command {
        Command::Gen {
            out_dir,
            scene,
            count,
            seed,
            attacker_min,
            attacker_max,
            skip_traces,
            snr_db,
            tag_count,
            fading_std,
        } => {
            let scene = resolve_scene(
                scene.as_deref(),
                SceneFlags {
                    snr_db,
                    tag_count,
                    fading_std,
                },
            )?;
            let cfg = GenConfig {
                scene,
                count,
                seed,
                attacker_min,
                attacker_max,
                write_traces: !skip_traces,
            };
            let artifacts = cmd_gen(&cfg, &out_dir)?;
            let manifest = RunManifest::new("gen", seed, serde_json::to_value(&cfg)?, artifacts);
            manifest.write(&out_dir)?;
            println!(
                "gen: {} profiles -> {}",
                2 * count,
                out_dir.join("dataset.csv").display()
            );
            Ok(())
        }
        Command::Train {
            dataset,
            model_out,
            nu,
            sigma,
            train_size,
        } => {
            let sigma = parse_sigma(&sigma)?;
            let out_dir = model_out
                .parent()
                .filter(|p| !p.as_os_str().is_empty())
                .unwrap_or(Path::new("."))
                .to_path_buf();
            let model_name = model_out
                .file_name()
                .ok_or_else(|| Error::InvalidConfig("model-out must name a file".into()))?
                .to_string_lossy()
                .into_owned();
            let cfg = TrainConfig {
                dataset: dataset.to_string_lossy().into_owned(),
                nu,
                sigma,
                train_size,
                model_name,
            };
            let outcome = cmd_train(&cfg, &out_dir)?;
            let manifest =
                RunManifest::new("train", 0, serde_json::to_value(&cfg)?, outcome.artifacts);
            manifest.write(&out_dir)?;
            println!(
                "train: model {} | support vectors {} | training outlier fraction {:.4}",
                model_out.display(),
                outcome.support_vectors,
                outcome.training_outlier_fraction
            );
            Ok(())
        }
        Command::Sweep {
            param,
            grid,
            trials,
            out,
            seed,
            scene,
            train_size,
            nu,
            sigma,
            attacker_min,
            attacker_max,
            snr_db,
            tag_count,
            fading_std,
        } => {
            let scene = resolve_scene(
                scene.as_deref(),
                SceneFlags {
                    snr_db,
                    tag_count,
                    fading_std,
                },
            )?;
            let sigma = parse_sigma(&sigma)?;
            let grid = parse_grid(&grid)?;
            let out_dir = out
                .parent()
                .filter(|p| !p.as_os_str().is_empty())
                .unwrap_or(Path::new("."))
                .to_path_buf();
            let out_name = out
                .file_name()
                .ok_or_else(|| Error::InvalidConfig("out must name a file".into()))?
                .to_string_lossy()
                .into_owned();
            let cfg = SweepConfig {
                scene,
                param,
                grid,
                trials,
                seed,
                train_size,
                nu,
                sigma,
                attacker_min,
                attacker_max,
                out_name,
            };
            let artifacts = cmd_sweep(&cfg, &out_dir)?;
            let manifest = RunManifest::new("sweep", seed, serde_json::to_value(&cfg)?, artifacts);
            manifest.write(&out_dir)?;
            println!("sweep: {} points -> {}", cfg.grid.len(), out.display());
            Ok(())
        }
        Command::Replay { manifest, out_dir } => {
            let recorded = RunManifest::read(&manifest)?;
            let artifacts = match recorded.command.as_str() {
                "gen" => {
                    let cfg: GenConfig = serde_json::from_value(recorded.resolved.clone())?;
                    cmd_gen(&cfg, &out_dir)?
                }
                "train" => {
                    let cfg: TrainConfig = serde_json::from_value(recorded.resolved.clone())?;
                    cmd_train(&cfg, &out_dir)?.artifacts
                }
                "sweep" => {
                    let cfg: SweepConfig = serde_json::from_value(recorded.resolved.clone())?;
                    cmd_sweep(&cfg, &out_dir)?
                }
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "manifest records unknown command {other:?}"
                    )))
                }
            };
            let replayed = RunManifest::new(
                &recorded.command,
                recorded.seed,
                recorded.resolved.clone(),
                artifacts,
            );
            if replayed.config_hash != recorded.config_hash {
                return Err(Error::InvalidConfig(
                    "replayed configuration hash differs from the manifest".into(),
                ));
            }
            replayed.write(&out_dir)?;
            println!(
                "replay: {} ({} artifacts) -> {}",
                recorded.command,
                replayed.artifacts.len(),
                out_dir.display()
            );
            Ok(())
        }
    }
}
