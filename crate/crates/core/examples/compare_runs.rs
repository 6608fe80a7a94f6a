//! Write two short runs to disk and tabulate their eval curves.

use conspo_lab::cli_io::{compare_runs, train_run};
use conspo_lab::trainer::TrainConfig;
use conspo_lab::{Algorithm, Result};

fn main() -> Result<()> {
    let out = std::env::temp_dir().join(format!("conspo-lab-compare-{}", std::process::id()));
    let mut dirs = Vec::new();
    for algorithm in [Algorithm::Conspo, Algorithm::Grpo] {
        let config = TrainConfig {
            algorithm,
            total_steps: 60,
            learning_rate: 0.5,
            ..TrainConfig::default()
        };
        dirs.push(train_run(&config, &out)?.artifacts.dir);
    }
    let comparison = compare_runs(&dirs[0], &dirs[1], &out)?;
    println!("table written to {}", comparison.table.display());
    for row in &comparison.rows {
        println!("{:>4} {:.4} {:.4} {:+.4}", row.step, row.reward_a, row.reward_b, row.diff());
    }
    if let Some(s) = comparison.summary {
        println!("{}", s.line());
    }
    Ok(())
}
