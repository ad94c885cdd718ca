//! The `evframe` command-line tool.
//!
//! [`run`] takes the full argv (program name first) and returns the process
//! exit code, so tests can drive the tool in-process.

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "evframe",
    version,
    about = "Event-camera stream segmentation and frame rendering"
)]
struct Cli {
    /// Seed for every random choice; overrides a scene file's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for rendering (0 picks the number of cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Suppress progress messages.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Event stream (`.csv` or `.evb`).
    #[arg(long = "in")]
    input: PathBuf,
    /// Sensor size `WxH`; required for csv, defaults to the evb header.
    #[arg(long)]
    geometry: Option<String>,
    /// Force the input format instead of guessing from the extension.
    #[arg(long)]
    format: Option<String>,
    /// Map 3-column csv rows (no polarity) to positive events.
    #[arg(long)]
    polarity_less: bool,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[command(flatten)]
    input: InputArgs,
    /// `count:N`, `time:MS`, `pixels:K[/CAP]` or `window:N@T`.
    #[arg(long, default_value = "count:10000")]
    segment: String,
    /// `drop` or `partial`.
    #[arg(long, default_value = "drop")]
    tail: String,
    /// ec, lnes, lnec, lnecs or lnewcs.
    #[arg(long, default_value = "lnecs")]
    rep: String,
    /// Output frame size `WxH`; defaults to the sensor size.
    #[arg(long)]
    size: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Also write per-channel grayscale PNG previews.
    #[arg(long)]
    preview: bool,
    /// Keypoint trajectory csv; writes one label file per segment.
    #[arg(long)]
    traj: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic stream and its keypoint trajectory from a scene file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        traj: Option<PathBuf>,
    },
    /// List segment boundaries as a csv table.
    Segment {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value = "count:10000")]
        segment: String,
        #[arg(long, default_value = "drop")]
        tail: String,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render every segment to an EVF tensor and write a manifest.
    Render(RenderArgs),
    /// Render, then zero pixels whose σ×σ mean event count is at most ε.
    Denoise {
        #[command(flatten)]
        render: RenderArgs,
        #[arg(long, default_value_t = 3)]
        sigma: usize,
        #[arg(long, default_value_t = 1.0)]
        eps: f64,
    },
    /// Export randomly augmented training samples.
    Augment {
        #[command(flatten)]
        input: InputArgs,
        /// Keypoint trajectory csv (labels).
        #[arg(long)]
        traj: PathBuf,
        /// Base events per sample before the length multiplier.
        #[arg(long, default_value_t = 10_000)]
        events: usize,
        /// Anchor spacing in ms; defaults to one anchor per `events` events.
        #[arg(long)]
        anchor_ms: Option<f64>,
        /// Augmented samples drawn per anchor.
        #[arg(long, default_value_t = 1)]
        per_anchor: usize,
        #[arg(long, default_value = "lnecs")]
        rep: String,
        #[arg(long)]
        size: Option<String>,
        /// Allowed quarter turns, e.g. `0,1,2,3`.
        #[arg(long, default_value = "0")]
        rotations: String,
        /// Fine rotation range in degrees `lo:hi`.
        #[arg(long, default_value = "0:0")]
        fine_rotation: String,
        /// Crop size `WxH` placed at random inside the rotated frame.
        #[arg(long)]
        crop: Option<String>,
        /// Length multiplier range `lo:hi`.
        #[arg(long, default_value = "1:1")]
        length: String,
        /// Noise threshold range `lo:hi`.
        #[arg(long, default_value = "0:2")]
        eps: String,
        /// Allowed filter sizes, e.g. `3,5`.
        #[arg(long, default_value = "3")]
        sigma: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Palm-normalized PCK curve and AUC of predictions against ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value = "0:0.01:1")]
        sweep: String,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summary statistics of a stream.
    Stats {
        #[command(flatten)]
        input: InputArgs,
    },
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match commands::execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
