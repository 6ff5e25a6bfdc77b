//! `iotnot`: extract per-slot traffic features from captures, train the
//! traffic and DHCP classifiers, score devices, and evaluate verdicts.
//!
//! Exit codes are part of the interface: 0 on success, 1 for usage errors
//! (bad flags or flag combinations), 2 for data errors (unreadable or
//! malformed inputs). Every failure is one line on stderr so wrappers can
//! grep it.

mod commands;
mod inputs;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use std::num::NonZeroU32;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "iotnot",
    version,
    about = "Classifies LAN devices as single-purpose (IoT) or general-purpose from short traffic captures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cut captures into fixed-width slots and write per-slot features as CSV
    Extract(ExtractArgs),
    /// Train the linear traffic classifier from a feature table
    TrainTraffic(TrainTrafficArgs),
    /// Train the DHCP signature tree from captures
    TrainDhcp(TrainDhcpArgs),
    /// Score captures with saved models, one JSON verdict line per window
    Predict(PredictArgs),
    /// Compute confusion metrics and per-device success rates from verdicts
    Evaluate(EvaluateArgs),
}

/// Packet input: exactly one of a set of pcap files or a packet-event log.
#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct InputArgs {
    /// Capture file(s) in pcap format
    #[arg(long, value_name = "FILE", num_args = 1..)]
    pcap: Vec<PathBuf>,
    /// Packet-event log, one JSON record per line
    #[arg(long, value_name = "FILE")]
    events: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExtractArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Device manifest CSV (mac,name,label)
    #[arg(long, value_name = "CSV")]
    manifest: PathBuf,
    /// Slot width in seconds
    #[arg(long, value_name = "SECONDS")]
    width: NonZeroU32,
    /// Output feature table CSV
    #[arg(long, value_name = "CSV")]
    out: PathBuf,
}

#[derive(Args, Debug)]
#[command(group(
    clap::ArgGroup::new("feature_choice")
        .required(true)
        .args(["select", "feature_set"])
))]
struct TrainTrafficArgs {
    /// Feature table CSV produced by `extract`
    #[arg(long, value_name = "CSV")]
    features: PathBuf,
    /// Device manifest CSV (mac,name,label)
    #[arg(long, value_name = "CSV")]
    manifest: PathBuf,
    /// Slot width in seconds; the table may mix widths, only this one is used
    #[arg(long, value_name = "SECONDS")]
    width: NonZeroU32,
    /// Choose the feature set by greedy forward selection
    #[arg(long)]
    select: bool,
    /// Train on these comma-separated features instead of selecting
    #[arg(long, value_name = "NAMES", value_delimiter = ',')]
    feature_set: Option<Vec<String>>,
    /// Minimum relative F1 gain for selection to keep adding features
    #[arg(long, value_name = "GAIN", default_value_t = 0.01)]
    alpha: f64,
    /// Cross-validation folds (devices are split, not slots)
    #[arg(long, value_name = "FOLDS", default_value_t = 5)]
    k: usize,
    /// Seed for fold assignment
    #[arg(long, value_name = "N", default_value_t = 0)]
    seed: u64,
    /// Also write the selection trace (per-step scores) as JSON
    #[arg(long, value_name = "JSON")]
    selection_report: Option<PathBuf>,
    /// Output model path
    #[arg(long, value_name = "JSON")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainDhcpArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Device manifest CSV (mac,name,label)
    #[arg(long, value_name = "CSV")]
    manifest: PathBuf,
    /// Output model path
    #[arg(long, value_name = "JSON")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// Model file(s), comma-separated; --unified takes the three traffic
    /// widths plus an optional DHCP tree
    #[arg(long, value_name = "JSON", value_delimiter = ',', required = true)]
    model: Vec<PathBuf>,
    /// Combine 5/10/20-minute traffic votes (and DHCP votes when a tree
    /// model is given) over 20-minute windows
    #[arg(long)]
    unified: bool,
    #[command(flatten)]
    input: InputArgs,
    /// Device manifest CSV; required for --pcap input (frame attribution)
    #[arg(long, value_name = "CSV")]
    manifest: Option<PathBuf>,
    /// Output verdicts, one JSON object per line
    #[arg(long, value_name = "JSONL")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Verdicts written by `predict`
    #[arg(long, value_name = "JSONL")]
    verdicts: PathBuf,
    /// Device manifest CSV with ground-truth labels
    #[arg(long, value_name = "CSV")]
    manifest: PathBuf,
    /// Output report path
    #[arg(long, value_name = "JSON")]
    out: PathBuf,
    /// Also export the per-device success CDF as CSV for plotting
    #[arg(long, value_name = "CSV")]
    cdf_csv: Option<PathBuf>,
}

/// A failure with its exit-code class already decided.
#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => return exit_for_clap(err),
    };
    let result = match cli.command {
        Command::Extract(args) => commands::extract(args),
        Command::TrainTraffic(args) => commands::train_traffic(args),
        Command::TrainDhcp(args) => commands::train_dhcp(args),
        Command::Predict(args) => commands::predict(args),
        Command::Evaluate(args) => commands::evaluate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("iotnot: {}", err.message());
            ExitCode::from(err.code())
        }
    }
}

/// Help and version displays are successes; everything else the parser
/// reports is a usage error. Clap's multi-line render is collapsed to its
/// first line to keep diagnostics one line each.
fn exit_for_clap(err: clap::Error) -> ExitCode {
    match err.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
            print!("{err}");
            ExitCode::SUCCESS
        }
        ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
            eprintln!("iotnot: missing subcommand (try --help)");
            ExitCode::from(1)
        }
        _ => {
            // Everything before the usage block, flattened: keeps lists like
            // "the following required arguments were not provided" whole.
            let rendered = err.render().to_string();
            let mut parts = Vec::new();
            for line in rendered.lines() {
                let line = line.trim();
                if line.is_empty() || line.starts_with("Usage:") {
                    break;
                }
                parts.push(line.strip_prefix("error: ").unwrap_or(line));
            }
            if parts.is_empty() {
                parts.push("invalid arguments");
            }
            eprintln!("iotnot: {}", parts.join(" "));
            ExitCode::from(1)
        }
    }
}
