//! Train both algorithms on the sum-mod task and print their exact
//! evaluation curves. Pass a learning rate as the first argument to
//! override the default.

use conspo_lab::trainer::{TrainConfig, Trainer};
use conspo_lab::{Algorithm, Result};

fn main() -> Result<()> {
    let lr = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(TrainConfig::default().learning_rate);
    for algorithm in [Algorithm::Grpo, Algorithm::Conspo] {
        let mut trainer = Trainer::new(TrainConfig {
            algorithm,
            learning_rate: lr,
            eval_interval: 50,
            ..TrainConfig::default()
        })?;
        let mut curve = Vec::new();
        let last = trainer.run(|_| Ok(()), |e| {
            curve.push(format!("{}:{:.3}", e.step, e.mean));
            Ok(())
        })?;
        println!("{algorithm} lr={lr}: {}", curve.join(" "));
        println!("  final per-class {:?}", last.per_class.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>());
    }
    Ok(())
}
