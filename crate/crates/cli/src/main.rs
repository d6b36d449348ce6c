//! `residskill`: train, evaluate, and compare peg-in-hole assembly policies.
//!
//! Exit codes: 0 success, 2 config error, 3 runtime failure, 4 bad checkpoint.

use clap::{Args, Parser, Subcommand};
use residskill_core::harness::{
    run_compare, run_eval, run_export, run_train, HarnessError, Overrides,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "residskill", version, about = "Skill-based peg-in-hole assembly with residual reinforcement learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonRun {
    /// Run configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed (highest precedence, above RESIDSKILL_SEED).
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the residual policy on the assembly environment.
    Train {
        #[command(flatten)]
        common: CommonRun,
    },
    /// Evaluate a checkpointed policy over randomized episodes.
    Eval {
        #[command(flatten)]
        common: CommonRun,
        /// Policy checkpoint to load.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Number of evaluation episodes.
        #[arg(long, default_value_t = 100)]
        episodes: usize,
    },
    /// Matched-seed comparison of the nominal controller vs the residual policy.
    Compare {
        #[command(flatten)]
        common: CommonRun,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Number of paired episodes.
        #[arg(long, default_value_t = 100)]
        episodes: usize,
    },
    /// Export smoothed return and success-rate curves from a metrics file.
    ExportCurves {
        /// Metrics file produced by train/eval/compare.
        metrics: PathBuf,
        /// Trailing window length for the running mean.
        #[arg(long, default_value_t = 10)]
        window: usize,
        /// Output directory (defaults to the metrics file's directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn overrides(common: &CommonRun) -> Overrides {
    Overrides { seed: common.seed, output_dir: common.out.clone() }
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Train { common } => {
            let summary = run_train(&common.config, &overrides(&common))?;
            println!(
                "trained {} steps over {} episodes; best eval success rate {:.3}",
                summary.steps, summary.episodes, summary.best_success_rate
            );
            println!("metrics: {}", summary.metrics_path.display());
            println!("latest checkpoint: {}", summary.latest_checkpoint.display());
            println!("best checkpoint: {}", summary.best_checkpoint.display());
        }
        Command::Eval { common, checkpoint, episodes } => {
            let report = run_eval(&common.config, &checkpoint, episodes, &overrides(&common))?;
            println!("{}", report.render());
        }
        Command::Compare { common, checkpoint, episodes } => {
            let report = run_compare(&common.config, &checkpoint, episodes, &overrides(&common))?;
            println!("{}", report.render());
        }
        Command::ExportCurves { metrics, window, out } => {
            let summary = run_export(&metrics, window, out.as_deref())?;
            println!(
                "exported {} rows:\n{}\n{}",
                summary.rows,
                summary.return_curve.display(),
                summary.success_curve.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
