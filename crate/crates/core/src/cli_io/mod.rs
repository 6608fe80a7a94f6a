//! Command implementations behind the `conspo-lab` binary.
//!
//! Exit codes: 0 on success, 1 on runtime errors or failed checks, 2 on
//! configuration and precondition errors.

pub mod artifacts;
pub mod compare;
pub mod config;

use std::io::Write;
use std::path::{Path, PathBuf};

pub use artifacts::{train_run, RunArtifacts, RunSummary};
pub use compare::{compare_runs, Comparison};
pub use config::{load_config, parse_config, serialize_config};

use crate::error::{Error, Result};
use crate::propcheck::{run_all, TrialCounts};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}

/// Human-readable diagnostic, naming the key and line when known.
pub fn describe(err: &Error) -> String {
    match err {
        Error::Config {
            line,
            key: Some(key),
            message,
        } => match line {
            Some(l) => format!("config error at line {l} (key `{key}`): {message}"),
            None => format!("config error (key `{key}`): {message}"),
        },
        other => other.to_string(),
    }
}

/// Parse the config, train, and return the run directory.
pub fn cmd_train(config: &Path, overrides: &[String], out: &Path) -> Result<PathBuf> {
    let config = load_config(config, overrides)?;
    Ok(train_run(&config, out)?.artifacts.dir)
}

/// Run every check, printing one line per report. Returns whether all passed.
pub fn cmd_verify(
    trials: Option<usize>,
    seed: u64,
    tolerance: Option<f64>,
    out: &mut impl Write,
) -> Result<bool> {
    let counts = trials.map_or_else(TrialCounts::default, TrialCounts::uniform);
    let reports = run_all(counts, seed, tolerance)?;
    let io = |e| Error::io("<stdout>", e);
    for r in &reports {
        writeln!(out, "{r}").map_err(io)?;
    }
    let all = reports.iter().all(|r| r.pass);
    let failed = reports.iter().filter(|r| !r.pass).count();
    writeln!(
        out,
        "verify seed={seed} checks={} failed={failed} result={}",
        reports.len(),
        if all { "PASS" } else { "FAIL" }
    )
    .map_err(io)?;
    Ok(all)
}

/// Write the paired table and print its path and the seed summary.
pub fn cmd_compare(a: &Path, b: &Path, out: &Path, sink: &mut impl Write) -> Result<Comparison> {
    let comparison = compare_runs(a, b, out)?;
    let io = |e| Error::io("<stdout>", e);
    writeln!(sink, "table {}", comparison.table.display()).map_err(io)?;
    if let Some(s) = &comparison.summary {
        writeln!(sink, "{}", s.line()).map_err(io)?;
    }
    Ok(comparison)
}
