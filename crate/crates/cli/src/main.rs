//! `fetmosaic` command-line front end.

mod commands;
mod envelope;
mod error;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fetmosaic::mosaic::{BlendMode, DEFAULT_CANVAS_CAP};
use fetmosaic::registration::{Parameterization, RegistrationConfig};
use fetmosaic::seg_metrics::Pooling;

use crate::error::CliError;

const THREADS_VAR: &str = "FETMOSAIC_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "fetmosaic",
    version,
    about = "Fetoscopic video registration, mosaicking and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic sequence with ground-truth homographies.
    Synth(SynthArgs),
    /// Register consecutive frames of a sequence.
    Register(RegisterArgs),
    /// Render a mosaic from pairwise homographies.
    Mosaic(MosaicArgs),
    /// Score registration consistency of frame pairs a fixed gap apart.
    EvalConsistency(ConsistencyArgs),
    /// Per-class IoU of predicted label maps against ground truth.
    EvalSeg(SegArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 50)]
    pub frames: usize,
    #[arg(long, default_value_t = 448)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-frame translation bound, pixels.
    #[arg(long, default_value_t = 4.0)]
    pub max_translation: f64,
    /// Per-frame rotation bound, degrees.
    #[arg(long, default_value_t = 1.0)]
    pub max_rotation: f64,
    /// Per-frame relative scale bound.
    #[arg(long, default_value_t = 0.01)]
    pub max_scale: f64,
    #[arg(long, default_value_t = 0.0)]
    pub perspective: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Video id recorded in the manifest; defaults to `synth<seed>`.
    #[arg(long)]
    pub video_id: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ParamArg {
    Affine6,
    Projective8,
}

#[derive(Debug, Args)]
pub struct RegistrationArgs {
    #[arg(long, default_value_t = 4)]
    pub levels: usize,
    #[arg(long, default_value_t = 50)]
    pub max_iterations: usize,
    /// Convergence threshold on corner displacement, pixels.
    #[arg(long, default_value_t = 1e-3)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value_t = ParamArg::Affine6)]
    pub parameterization: ParamArg,
    #[arg(long, default_value_t = 0.25)]
    pub min_overlap: f64,
}

impl RegistrationArgs {
    pub fn config(&self) -> RegistrationConfig {
        RegistrationConfig {
            pyramid_levels: self.levels,
            max_iterations_per_level: self.max_iterations,
            convergence_epsilon: self.epsilon,
            parameterization: match self.parameterization {
                ParamArg::Affine6 => Parameterization::Affine6,
                ParamArg::Projective8 => Parameterization::Projective8,
            },
            min_valid_overlap_fraction: self.min_overlap,
        }
    }
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    /// Sequence directory (images/, optional labels/ and fov.png).
    pub input: PathBuf,
    /// Register vessel maps derived from labels/ instead of the frames.
    #[arg(long)]
    pub use_labels: bool,
    #[command(flatten)]
    pub registration: RegistrationArgs,
    /// Homography JSON output.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-pair CSV; defaults to the JSON path with a `.csv` extension.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BlendArg {
    OverwriteLatest,
    RunningMean,
}

impl From<BlendArg> for BlendMode {
    fn from(b: BlendArg) -> Self {
        match b {
            BlendArg::OverwriteLatest => BlendMode::OverwriteLatest,
            BlendArg::RunningMean => BlendMode::RunningMean,
        }
    }
}

#[derive(Debug, Args)]
pub struct MosaicArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub homographies: PathBuf,
    /// Reference frame (absolute index); defaults to `--first`.
    #[arg(long)]
    pub anchor: Option<usize>,
    #[arg(long, value_enum, default_value_t = BlendArg::OverwriteLatest)]
    pub blend: BlendArg,
    #[arg(long, default_value_t = 0)]
    pub first: usize,
    /// Last frame included (inclusive); defaults to the final frame.
    #[arg(long)]
    pub last: Option<usize>,
    /// Mosaic vessel maps derived from labels/ instead of the frames.
    #[arg(long)]
    pub use_labels: bool,
    #[arg(long, default_value_t = DEFAULT_CANVAS_CAP)]
    pub canvas_cap: usize,
    /// Mosaic PNG output.
    #[arg(long)]
    pub out: PathBuf,
    /// Drift CSV, written when gt_homographies.json is present; defaults to
    /// `<out>_drift.csv`.
    #[arg(long)]
    pub drift: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConsistencyArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub homographies: PathBuf,
    #[arg(long, default_value_t = fetmosaic::consistency::DEFAULT_GAP)]
    pub gap: usize,
    /// Per-pair CSV output.
    #[arg(long)]
    pub out: PathBuf,
    /// SVG plot; defaults to the CSV path with a `.svg` extension.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PoolingArg {
    FrameMean,
    PixelPooled,
}

impl From<PoolingArg> for Pooling {
    fn from(p: PoolingArg) -> Self {
        match p {
            PoolingArg::FrameMean => Pooling::FrameMean,
            PoolingArg::PixelPooled => Pooling::PixelPooled,
        }
    }
}

#[derive(Debug, Args)]
pub struct SegArgs {
    /// Directory of per-video prediction folders, each with labels/.
    #[arg(long)]
    pub pred: PathBuf,
    /// Directory of per-video ground-truth folders, each with labels/.
    #[arg(long)]
    pub gt: PathBuf,
    /// Fold file of `video_id fold_id` lines; the built-in table otherwise.
    #[arg(long)]
    pub folds: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = PoolingArg::FrameMean)]
    pub pooling: PoolingArg,
    #[arg(long)]
    pub out: PathBuf,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| {
        CliError::Usage(format!(
            "{THREADS_VAR} must be a non-negative integer, got {raw:?}"
        ))
    })?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Register(a) => commands::register(&a),
        Command::Mosaic(a) => commands::mosaic(&a),
        Command::EvalConsistency(a) => commands::eval_consistency(&a),
        Command::EvalSeg(a) => commands::eval_seg(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
