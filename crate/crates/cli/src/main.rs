//! `erp-qpa` command-line front end.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use erp_qpa::{BankKind, BdMethod};

#[derive(Debug, Parser)]
#[command(name = "erp-qpa", version, about = "Latitude-adaptive quality tools for 360-degree ERP video")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a per-row adapted quality map and write it as a document.
    Qmap(QmapArgs),
    /// PSNR / WS-PSNR report for two raw YUV 4:2:0 files.
    Wspsnr(WspsnrArgs),
    /// BD-rate of a test curve against a reference curve.
    Bdrate(BdrateArgs),
    /// Simulate adapted vs uniform allocation under the exponential R-D model.
    Simulate(SimulateArgs),
    /// Inspect or evaluate a vector bank container.
    Bank {
        #[command(subcommand)]
        action: BankAction,
    },
}

#[derive(Debug, Args)]
struct QmapArgs {
    #[arg(long)]
    rows: usize,
    #[arg(long)]
    q0: f64,
    #[arg(long, default_value_t = erp_qpa::qpa::DEFAULT_LAMBDA_MIN)]
    lambda_min: f64,
    #[arg(long, default_value_t = erp_qpa::qpa::DEFAULT_LAMBDA_MAX)]
    lambda_max: f64,
    #[arg(long, default_value_t = erp_qpa::qpa::DEFAULT_Q_NUM)]
    q_num: u32,
    /// Clip values to [0, q_num - 1].
    #[arg(long)]
    clamp: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct WspsnrArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    width: usize,
    #[arg(long)]
    height: usize,
    #[arg(long, default_value_t = 8)]
    bit_depth: u8,
    #[arg(long)]
    frames: usize,
    /// Report file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BdrateArgs {
    #[arg(long)]
    ref_curve: PathBuf,
    #[arg(long)]
    test_curve: PathBuf,
    /// pchip (default) or poly.
    #[arg(long, default_value = "pchip")]
    method: BdMethod,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Number of ERP row bands.
    #[arg(long)]
    bands: usize,
    #[arg(long = "c")]
    c: f64,
    #[arg(long = "k")]
    k: f64,
    /// Comma-separated equator multipliers.
    #[arg(long = "lambda0", value_delimiter = ',', required = true)]
    lambda0: Vec<f64>,
    /// Report file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum BankAction {
    /// Print container dimensions.
    Info {
        #[arg(long)]
        bank_file: PathBuf,
    },
    /// Interpolated vector for one quality value.
    Interp {
        #[arg(long)]
        bank_file: PathBuf,
        #[arg(long)]
        q_tilde: f64,
        #[arg(long, default_value = "encoder")]
        bank: BankKind,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rows x channels modulation matrix for a quality map.
    Rowmod {
        #[arg(long)]
        bank_file: PathBuf,
        #[arg(long)]
        qmap_file: PathBuf,
        #[arg(long, default_value = "encoder")]
        bank: BankKind,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
