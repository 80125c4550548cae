use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use doublepass::commands::{self, Command, OUT_DIR_ENV};

/// Double-pass magnetometer simulation: conditional trajectories, quantum
/// Fisher information, sweeps over the spin size and power-law fits.
///
/// Settings come from a flat TOML file (or a manifest written by an earlier
/// run) and `--key value` overrides, which win. Exit status: 0 success,
/// 2 configuration error, 3 numerical-validity failure.
#[derive(Parser)]
#[command(version, after_help = format!("Output goes to --out-dir, else ${OUT_DIR_ENV}, else ./{}.", commands::DEFAULT_OUT_DIR))]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Paired double-pass and single-pass trajectories on one noise stream.
    Trajectory(Common),
    /// Ensemble Fisher information at one (F, M, K).
    Qfi(Common),
    /// Field uncertainty over a list of spin sizes.
    Sweep(Common),
    /// Optimal feedback strength K at fixed F and M.
    OptimizeK(Common),
    /// Power-law fit of deltaB against F from a sweep table.
    Fit(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration, or a *.manifest.json to replay.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Overrides as `--key value` pairs.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Sub::Trajectory(a) => (Command::Trajectory, a),
        Sub::Qfi(a) => (Command::Qfi, a),
        Sub::Sweep(a) => (Command::Sweep, a),
        Sub::OptimizeK(a) => (Command::OptimizeK, a),
        Sub::Fit(a) => (Command::Fit, a),
    };
    let out_dir = commands::resolve_out_dir(args.out_dir.as_deref());
    match commands::run(command, args.config.as_deref(), &args.overrides, &out_dir) {
        Ok(outcome) => {
            for note in &outcome.notes {
                eprintln!("{note}");
            }
            for file in &outcome.files {
                println!("{}", file.display());
            }
            if outcome.valid {
                ExitCode::SUCCESS
            } else {
                eprintln!("error: some results failed validity checks");
                ExitCode::from(3)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
