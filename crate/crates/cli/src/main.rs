//! `touchprint`: the touchless capture pipeline, template matching and biometric
//! evaluation as subcommands.
//!
//! Exit codes: 0 success, 1 domain error (discarded frame, failed capture, ...),
//! 2 usage, config or I/O error. Failures also print one JSON line on standard error.

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use touchprint_core::geometry::HandSide;

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "touchprint", version, about = "Touchless four-finger capture, minutiae matching and evaluation")]
struct Cli {
    /// JSON config file. Falls back to $TOUCHPRINT_CONFIG, then to the built-in defaults.
    #[arg(long, global = true, value_name = "JSON")]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set quality.sharp_min=0.2`. Repeatable; applied after
    /// the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Seed for the synthetic-data helpers.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Hand {
    Left,
    Right,
}

impl From<Hand> for HandSide {
    fn from(h: Hand) -> Self {
        match h {
            Hand::Left => HandSide::Left,
            Hand::Right => HandSide::Right,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Hand mask of a frame, written as a 1-bit PNG.
    Segment {
        image: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Write the thresholded mask before plausibility checks and component filtering.
        #[arg(long)]
        raw: bool,
    },
    /// Frame to four normalized fingerprints named `<subject>_<finger>_<session>.png`.
    Process {
        image: PathBuf,
        #[arg(long, value_enum, default_value = "right")]
        hand: Hand,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, default_value = "s000")]
        subject: String,
        #[arg(long, default_value = "1")]
        session: String,
        /// Also dump the upright finger crops and the gradient histograms.
        #[arg(long)]
        debug: bool,
    },
    /// Fingerprint image to a `.mtft` minutiae template.
    Extract {
        image: PathBuf,
        /// Finger ID; taken from a `<subject>_<finger>_<session>` file name when omitted.
        #[arg(long)]
        finger: Option<u8>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Similarity of two templates, printed with 6 decimals.
    Match { a: PathBuf, b: PathBuf },
    /// Runs a capture session over a directory or glob of frames.
    CaptureSim {
        #[arg(long, value_name = "DIR_OR_GLOB")]
        frames: String,
        #[arg(long, value_enum, default_value = "right")]
        hand: Hand,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, default_value = "s000")]
        subject: String,
        #[arg(long, default_value = "1")]
        session: String,
    },
    /// EER, DET and FTA from a score file or from template directories.
    Evaluate(EvaluateArgs),
    /// Prints the effective config as JSON.
    Config,
    /// Synthetic prints and hand frames.
    Synth {
        #[command(subcommand)]
        what: SynthCommand,
    },
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Score CSV: probe_id,reference_id,finger_id,label,score.
    #[arg(long, conflicts_with = "templates", required_unless_present = "templates")]
    scores: Option<PathBuf>,
    /// Directories of `<subject>_<finger>_<session>.mtft` templates, compared across sessions.
    #[arg(long, num_args = 1..)]
    templates: Vec<PathBuf>,
    /// Fuse per-finger scores per hand (4) or per sample pair (8) with the configured rule.
    #[arg(long, value_parser = ["4", "8"])]
    fuse: Option<String>,
    /// Worker threads for the comparisons.
    #[arg(long)]
    jobs: Option<usize>,
    /// Report JSON path; the DET CSV goes next to it. Printed to stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Also write the computed scores as CSV.
    #[arg(long)]
    scores_out: Option<PathBuf>,
    /// Capture attempts, for the FTA rate.
    #[arg(long)]
    attempts: Option<usize>,
    /// Failed capture attempts.
    #[arg(long, requires = "attempts")]
    failures: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum SynthCommand {
    /// Two-session print corpus named `<subject>_<finger>_<session>.png`.
    Corpus {
        #[arg(long, default_value_t = 10)]
        subjects: usize,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// 1920x1080 four-finger hand frames.
    Frames {
        #[arg(long, default_value_t = 5)]
        count: usize,
        #[arg(long, value_enum, default_value = "right")]
        hand: Hand,
        /// Gaussian blur sigma applied to every frame.
        #[arg(long, default_value_t = 0.0)]
        blur: f64,
        #[arg(long, short)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return report(CliError::Usage(e.to_string().trim_end().to_string())),
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(e),
    }
}

fn report(e: CliError) -> ExitCode {
    let code = e.exit_code();
    eprintln!("{}", serde_json::json!({ "error": e.kind(), "message": e.to_string(), "exit_code": code }));
    ExitCode::from(code)
}
