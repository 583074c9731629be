//! `unialign` — experiments and verification suites for decoupled
//! uniformity/alignment objectives on synthetic multimodal embeddings.
//!
//! Exit codes: 0 success, 1 verification failure, 2 input parse error,
//! 3 shape/config error, 4 numerical failure.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use unialign_cli::commands::{self, Ctx, OutputFormat};
use unialign_cli::config::Config;
use unialign_cli::error::CliError;

#[derive(Parser)]
#[command(
    name = "unialign",
    version,
    about = "Embedding-space laboratory: decoupled uniformity/alignment objectives, \
             conflict diagnostics, and kernel divergence estimation"
)]
struct Cli {
    /// Seed for all pseudorandom generation; outputs are byte-deterministic
    /// for a fixed seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Configuration file (key = value with [section] headers).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for file outputs (default: unialign-out).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Also write a static SVG plot where the command supports one.
    #[arg(long, global = true)]
    plot: bool,

    /// Stdout format.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the decoupled objective on embeddings from files.
    EvalLoss {
        /// Multi-modality binary embeddings (.uaeb).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Text matrix per modality (repeat the flag).
        #[arg(long = "text")]
        text: Vec<PathBuf>,
        /// Anchor modality index (default from config).
        #[arg(long)]
        anchor: Option<usize>,
    },
    /// Verify analytic gradients against central finite differences.
    Gradcheck {
        /// Print errors for h in {1e-3, 1e-4, 1e-5} before the gated check.
        #[arg(long)]
        h_sweep: bool,
        /// Negative-control hook: corrupt one gradient so the check fails.
        #[arg(long, hide = true)]
        corrupt_gradient: bool,
    },
    /// Scan conflict metrics against the modality count.
    ConflictScan,
    /// Run a synthetic training experiment and record its trajectory.
    Train {
        /// Write real wall-clock values into the CSV seconds column
        /// (breaks byte determinism; timing otherwise lives in the
        /// manifest).
        #[arg(long)]
        timing: bool,
        /// Save the final embeddings as embeddings.uaeb.
        #[arg(long)]
        save_embeddings: bool,
    },
    /// Estimate the divergence across two or more embedding files.
    Divergence {
        /// One file per modality (.uaeb single block, or text matrix).
        #[arg(required = true, num_args = 2..)]
        files: Vec<PathBuf>,
        /// Kernel bandwidth (default from config).
        #[arg(long)]
        tau: Option<f64>,
        /// Include the Gaussian normalization constant.
        #[arg(long)]
        normalized: bool,
        /// Average the estimate over all anchor choices.
        #[arg(long)]
        symmetrize: bool,
        /// Anchor modality of the joint term (default 0).
        #[arg(long)]
        anchor: Option<usize>,
    },
}

fn worker_threads() -> Result<usize, CliError> {
    let available = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    match std::env::var("UNIALIGN_THREADS") {
        Err(_) => Ok(available.min(8)),
        Ok(raw) => {
            let cap: usize = raw.parse().map_err(|_| {
                CliError::Shape(format!("UNIALIGN_THREADS must be a positive integer, got {raw:?}"))
            })?;
            if cap == 0 {
                return Err(CliError::Shape("UNIALIGN_THREADS must be at least 1".into()));
            }
            Ok(cap.min(available.min(8)).max(1))
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let ctx = Ctx {
        seed: cli.seed,
        config,
        out_dir: cli.out_dir,
        plot: cli.plot,
        format: cli.format,
        threads: worker_threads()?,
    };
    match cli.command {
        Command::EvalLoss { input, text, anchor } => commands::eval_loss::run(&ctx, input, text, anchor),
        Command::Gradcheck {
            h_sweep,
            corrupt_gradient,
        } => commands::gradcheck::run(&ctx, h_sweep, corrupt_gradient),
        Command::ConflictScan => commands::conflict_scan::run(&ctx),
        Command::Train {
            timing,
            save_embeddings,
        } => commands::train::run(&ctx, timing, save_embeddings),
        Command::Divergence {
            files,
            tau,
            normalized,
            symmetrize,
            anchor,
        } => commands::divergence::run(&ctx, files, tau, normalized, symmetrize, anchor),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
