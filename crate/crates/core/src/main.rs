use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use conspo_lab::cli_io::{self, describe, exit_code, EXIT_RUNTIME};

#[derive(Parser)]
#[command(name = "conspo-lab", version, about = "Desk-scale GRPO / ConSPO laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run and write its artifacts.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// KEY=VALUE applied after the config file.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Shorthand for `--override seed=N`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Run the randomized identity and gradient checks.
    Verify {
        /// Trials per check (defaults vary by check).
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Replace every check's tolerance.
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Tabulate two runs' eval curves side by side.
    Compare {
        run_a: PathBuf,
        run_b: PathBuf,
        /// Directory for the table (defaults to the parent of RUN_A).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout();
    let result = match cli.command {
        Command::Train {
            config,
            mut overrides,
            seed,
            out,
        } => {
            if let Some(s) = seed {
                overrides.push(format!("seed={s}"));
            }
            cli_io::cmd_train(&config, &overrides, &out).map(|dir| {
                println!("{}", dir.display());
                true
            })
        }
        Command::Verify {
            trials,
            seed,
            tolerance,
        } => cli_io::cmd_verify(trials, seed, tolerance, &mut stdout),
        Command::Compare { run_a, run_b, out } => {
            let out = out.unwrap_or_else(|| run_a.parent().map(PathBuf::from).unwrap_or_default());
            cli_io::cmd_compare(&run_a, &run_b, &out, &mut stdout).map(|_| true)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_RUNTIME as u8),
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
