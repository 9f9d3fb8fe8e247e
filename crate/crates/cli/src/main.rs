use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use docslim::aps::{
    ApsParams, DEFAULT_MAX_REMOVAL_FRAC, DEFAULT_NOISE_THRESH, DEFAULT_NORM_SIZE, DEFAULT_RUN_THRESH,
    DEFAULT_VALUE_THRESH,
};
use docslim::bench::Baseline;
use docslim::dts::{DtsParams, DEFAULT_KMEANS_MAX_ITERS, DEFAULT_KMEANS_RESTARTS, DEFAULT_KMEANS_TOL, DEFAULT_VOTE_R};
use docslim::flexres::ResizePolicy;

mod commands;
mod exit;

/// Slim document images (pixel bands) and visual-token sequences.
#[derive(Parser, Debug)]
#[command(name = "docslim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Remove low-gradient row and column bands from PNG images.
    Aps(ApsArgs),
    /// Downscale PNG images to a total pixel budget.
    Resize(ResizeArgs),
    /// Cluster and merge a token sequence (DSTK or CSV).
    Dts(DtsArgs),
    /// Materialize a synthetic corpus from a JSON spec.
    Synth(SynthArgs),
    /// Measure reduction and latency over a corpus directory.
    Bench {
        #[command(subcommand)]
        which: BenchCommand,
    },
}

/// Output location: one file for a single input, or a directory for many.
#[derive(Args, Debug)]
struct Outputs {
    /// Output file (single input only).
    #[arg(short, long, conflicts_with = "out_dir")]
    output: Option<PathBuf>,
    /// Output directory; files keep their input names.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Copy)]
struct ApsOpts {
    /// Gradient noise threshold.
    #[arg(long, default_value_t = DEFAULT_NOISE_THRESH)]
    tn: f32,
    /// Minimum run length, in normalized lines (runs must be longer).
    #[arg(long, default_value_t = DEFAULT_RUN_THRESH)]
    tc: usize,
    /// Profile-sum threshold for a redundant line.
    #[arg(long, default_value_t = DEFAULT_VALUE_THRESH)]
    tv: f64,
    /// Side of the normalized gradient map.
    #[arg(long, default_value_t = DEFAULT_NORM_SIZE)]
    size: usize,
    /// Per-axis removal cap before the image is returned untouched.
    #[arg(long, default_value_t = DEFAULT_MAX_REMOVAL_FRAC)]
    max_removal: f64,
}

impl ApsOpts {
    fn params(&self) -> ApsParams {
        ApsParams {
            norm_size: self.size,
            noise_thresh: self.tn,
            run_thresh: self.tc,
            value_thresh: self.tv,
            max_removal_frac: self.max_removal,
        }
    }
}

#[derive(Args, Debug)]
struct ApsArgs {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    out: Outputs,
    /// JSON report (an array when several inputs are given).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Also write `<output>.overlay.png` with removed bands tinted.
    #[arg(long)]
    visualize: bool,
    #[command(flatten)]
    opts: ApsOpts,
}

#[derive(Args, Debug)]
struct ResizeArgs {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    out: Outputs,
    /// Pixel budget as `HxW` or a plain pixel count.
    #[arg(long, default_value_t = ResizePolicy::default())]
    max_size: ResizePolicy,
}

#[derive(Args, Debug, Clone, Copy)]
struct DtsOpts {
    /// Seed for k-means initialization.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Top-R tokens used in the cluster vote.
    #[arg(long, default_value_t = DEFAULT_VOTE_R)]
    vote_r: usize,
    #[arg(long, default_value_t = DEFAULT_KMEANS_MAX_ITERS)]
    kmeans_iters: usize,
    #[arg(long, default_value_t = DEFAULT_KMEANS_RESTARTS)]
    kmeans_restarts: usize,
    #[arg(long, default_value_t = DEFAULT_KMEANS_TOL)]
    kmeans_tol: f64,
}

impl DtsOpts {
    fn params(&self) -> DtsParams {
        DtsParams {
            vote_r: self.vote_r,
            kmeans_max_iters: self.kmeans_iters,
            kmeans_tol: self.kmeans_tol,
            kmeans_restarts: self.kmeans_restarts,
            seed: self.seed,
        }
    }
}

#[derive(Args, Debug)]
struct DtsArgs {
    /// Token matrix used for clustering (DSTK, or CSV with a .csv extension).
    input: PathBuf,
    /// Output token file; `.csv` writes CSV, anything else DSTK.
    #[arg(short, long)]
    output: PathBuf,
    /// Projected tokens for voting and merging (defaults to the input).
    #[arg(long)]
    projected: Option<PathBuf>,
    /// Sidecar JSON path (defaults to the output with a .json extension).
    #[arg(long)]
    sidecar: Option<PathBuf>,
    #[command(flatten)]
    opts: DtsOpts,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Corpus spec JSON.
    spec: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Subcommand, Debug)]
enum BenchCommand {
    /// Run APS over every PNG in a directory.
    Aps {
        corpus: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Per-item CSV summary.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        opts: ApsOpts,
    },
    /// Run DTS over every .dstk file in a directory.
    Dts {
        corpus: PathBuf,
        #[arg(long, default_value = "none")]
        baseline: Baseline,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        opts: DtsOpts,
    },
}

fn init_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("DOCSLIM_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| format!("DOCSLIM_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(msg) = init_threads() {
        eprintln!("docslim: {msg}");
        return ExitCode::from(exit::BAD_ARGS);
    }
    let result = match cli.command {
        Command::Aps(a) => commands::aps(a),
        Command::Resize(a) => commands::resize(a),
        Command::Dts(a) => commands::dts(a),
        Command::Synth(a) => commands::synth(a),
        Command::Bench { which } => commands::bench(which),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("docslim: {failure}");
            ExitCode::from(failure.code)
        }
    }
}
