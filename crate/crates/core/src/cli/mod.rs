//! The `evc` command line.
//!
//! Every subcommand wraps a library call, writes its outputs, writes one
//! run manifest and prints one summary line. Exit codes: 0 success, 2 bad
//! input, 3 numerical failure, 64 usage error.

mod commands;
mod manifest;

pub use manifest::{sha256_hex, FileDigest, RunManifest};

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser, Serialize)]
#[command(name = "evc", version, about = "Event curves, curve-conditioned flow sampling and sync metrics")]
pub struct Cli {
    /// Where to write the run manifest (default: next to the first output,
    /// or `evc-run.manifest.json`).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    /// Worker threads for batch commands.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Inspect or convert EVCF feature files.
    #[command(subcommand)]
    Features(FeaturesCmd),
    /// Extract, correlate and pick peaks on event curves.
    #[command(subcommand)]
    Curve(CurveCmd),
    /// Synchronization metrics.
    #[command(subcommand)]
    Metrics(MetricsCmd),
    /// Train, sample and evaluate the flow model.
    #[command(subcommand)]
    Flow(FlowCmd),
    /// Render curves and events to SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Subcommand, Serialize)]
pub enum FeaturesCmd {
    /// Print the header of an EVCF file.
    Info {
        #[arg(long)]
        features: PathBuf,
    },
    /// Convert between EVCF (`.evcf`) and JSON frames (`.json`).
    Convert {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand, Serialize)]
pub enum CurveCmd {
    /// Event curves from one or more EVCF files.
    Extract(ExtractArgs),
    /// Correlation of two curves in windows around anchor events.
    Correlate {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        anchors: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        window: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Event times from the peaks of a curve.
    Peaks {
        #[arg(long)]
        curve: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long, default_value_t = 0.0)]
        min_separation: f64,
        #[arg(long, default_value = "peaks")]
        label: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args, Serialize)]
pub struct ExtractArgs {
    #[arg(long, required = true, num_args = 1..)]
    pub features: Vec<PathBuf>,
    #[arg(long, default_value_t = crate::curve::DEFAULT_TARGET_LENGTH)]
    pub length: usize,
    #[arg(long, default_value_t = crate::curve::DEFAULT_KERNEL_SIZE)]
    pub kernel: usize,
    /// Clip duration in seconds.
    #[arg(long)]
    pub duration: f64,
    /// Output CSV for a single input.
    #[arg(long, conflicts_with = "out_dir")]
    pub out: Option<PathBuf>,
    /// Output directory for several inputs; files keep their stem.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum MetricsCmd {
    /// Scene cut hit rate.
    Sch {
        #[arg(long)]
        cuts: PathBuf,
        #[arg(long)]
        onsets: PathBuf,
        #[arg(long, default_value_t = crate::metrics::DEFAULT_SCH_TOLERANCE_S)]
        tolerance: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Beat coverage, beat hit and their F1.
    Beat {
        #[arg(long)]
        motion: PathBuf,
        #[arg(long)]
        music: PathBuf,
        #[arg(long, default_value_t = crate::metrics::DEFAULT_BEAT_TOLERANCE_S)]
        tolerance: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tempo deviation in BPM.
    Td {
        #[arg(long)]
        motion: PathBuf,
        #[arg(long)]
        music: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Squared Fréchet distance between curve sets.
    Fd {
        /// M, M+V, M-V or M|V.
        #[arg(long)]
        mode: String,
        /// Directory of generated music curve CSVs.
        #[arg(long)]
        gen: PathBuf,
        /// Directory of ground-truth music curve CSVs.
        #[arg(long)]
        gt: Option<PathBuf>,
        /// Directory of video curve CSVs.
        #[arg(long)]
        video: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand, Serialize)]
pub enum FlowCmd {
    /// Train on the synthetic dataset and write an EVFM checkpoint.
    Train {
        /// Training config JSON; its seed is replaced by `--seed`.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        /// Seed of the synthetic dataset (default: `--seed`).
        #[arg(long)]
        data_seed: Option<u64>,
        #[arg(long, default_value_t = 4096)]
        items: usize,
        #[arg(long)]
        out: PathBuf,
        /// Optional per-step loss CSV.
        #[arg(long)]
        loss_out: Option<PathBuf>,
    },
    /// Draw latents from a checkpoint.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = crate::flow::DEFAULT_SAMPLE_STEPS)]
        steps: usize,
        #[arg(long, default_value_t = 1.0)]
        cfg_scale: f64,
        /// Conditioning curve CSV; omitted means the null curve.
        #[arg(long)]
        curve: Option<PathBuf>,
        #[arg(long)]
        class: Option<usize>,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean envelope/curve correlation of samples conditioned on held-out curves.
    SwapEval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Directory of curve CSVs; without it, synthetic video curves are used.
        #[arg(long)]
        curves: Option<PathBuf>,
        /// Number of synthetic video curves.
        #[arg(long, default_value_t = 32)]
        synthetic: usize,
        /// Seed of the synthetic video curves (default: `--seed`).
        #[arg(long)]
        curve_seed: Option<u64>,
        #[arg(long, default_value_t = crate::flow::DEFAULT_SAMPLE_STEPS)]
        steps: usize,
        #[arg(long, default_value_t = 2.0)]
        cfg_scale: f64,
        #[arg(long)]
        class: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args, Serialize)]
pub struct PlotArgs {
    #[arg(long = "curve", required = true, num_args = 1..)]
    pub curves: Vec<PathBuf>,
    #[arg(long)]
    pub events: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_INPUT
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code. Summaries go to stdout, errors to stderr.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let command_line = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match commands::dispatch(&cli, command_line) {
        Ok(summary) => {
            println!("{summary}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
