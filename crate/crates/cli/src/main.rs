//! `courtcal`: detect tennis courts in frames, evaluate against ground
//! truth, and generate synthetic scenes.
//!
//! Exit status: 0 when a court is detected (or a command succeeds), 2 when
//! detection finds nothing, 1 on any error.

mod commands;
mod source;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use courtcal::calibrate::PipelineError;
use courtcal::config::{ConfigError, PipelineConfig};
use courtcal::eval::EvalError;
use courtcal::preprocess::PreprocessError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    Threads(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Parser, Debug)]
#[command(name = "courtcal", version, about = "Tennis court line detection and calibration")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Pipeline configuration (JSON). Defaults apply when absent.
    #[arg(long, env = "COURTCAL_CONFIG")]
    config: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Detect the court in an image, a directory of frames, or a video.
    Detect {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Draw the detection over the source frame.
        #[arg(long)]
        overlay: Option<PathBuf>,
        /// Overlay stroke color as `R,G,B`.
        #[arg(long, default_value = "255,0,0", value_parser = parse_rgb)]
        overlay_color: [u8; 3],
        /// Write intermediate images and line lists here.
        #[arg(long)]
        debug_dir: Option<PathBuf>,
        /// Frames sampled from a multi-frame source.
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Score detections against ground truth keypoints.
    Eval {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Also run the threshold-filter baseline.
        #[arg(long)]
        baseline: bool,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Name used in the report row; defaults to the input directory name.
        #[arg(long)]
        court_id: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Generate synthetic scenes with ground truth.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        gen_config: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print the effective configuration as JSON.
    Config {
        #[arg(long, env = "COURTCAL_CONFIG")]
        config: Option<PathBuf>,
    },
    /// Print the court template as JSON.
    Template {
        #[arg(long, env = "COURTCAL_CONFIG")]
        config: Option<PathBuf>,
    },
}

fn parse_rgb(s: &str) -> Result<[u8; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err("expected R,G,B".into());
    }
    let mut out = [0u8; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().map_err(|e| format!("{p}: {e}"))?;
    }
    Ok(out)
}

pub fn load_config(path: Option<&PathBuf>) -> Result<PipelineConfig, CliError> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
            Ok(PipelineConfig::from_json(&text)?)
        }
        None => Ok(PipelineConfig::default()),
    }
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n.max(1));
    }
    Ok(b.build()?)
}

/// Outcome of a command that completed without error.
pub enum Outcome {
    Done,
    NoDetection,
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Cmd::Detect {
            input,
            out,
            overlay,
            overlay_color,
            debug_dir,
            frames,
            seed,
            common,
        } => {
            let mut cfg = load_config(common.config.as_ref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(n) = frames {
                cfg.video.n_frames = n;
            }
            let args = commands::DetectArgs {
                input,
                out,
                overlay,
                overlay_color,
                debug_dir,
            };
            pool(common.threads)?.install(|| commands::detect(&cfg, &args))
        }
        Cmd::Eval {
            input,
            gt,
            baseline,
            report,
            court_id,
            common,
        } => {
            let cfg = load_config(common.config.as_ref())?;
            let args = commands::EvalArgs {
                input,
                gt,
                baseline,
                report,
                court_id,
            };
            pool(common.threads)?.install(|| commands::eval(&cfg, &args))
        }
        Cmd::Synth {
            out,
            count,
            seed,
            gen_config,
            threads,
        } => pool(threads)?.install(|| commands::synth(&out, count, seed, gen_config.as_deref())),
        Cmd::Config { config } => {
            emit(&format!("{}\n", load_config(config.as_ref())?.to_json()))?;
            Ok(Outcome::Done)
        }
        Cmd::Template { config } => {
            let cfg = load_config(config.as_ref())?;
            let template =
                courtcal::court_model::standard_template(cfg.court).map_err(|e| CliError::Input(e.to_string()))?;
            emit(&format!("{}\n", template.to_json()))?;
            Ok(Outcome::Done)
        }
    }
}

/// Writes to stdout; a reader that closed the pipe early is not an error.
pub(crate) fn emit(text: &str) -> Result<(), CliError> {
    use std::io::Write;
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NoDetection) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
