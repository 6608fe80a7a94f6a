//! Analytic logit gradients of the batch objective against central finite
//! differences, off-policy and with a KL penalty.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use conspo_lab::gradients::{finite_diff_oracle, grad_relative_error, objective_param_grad};
use conspo_lab::objectives::{batch_objective, ContrastConfig, ObjectiveConfig};
use conspo_lab::rollouts::{collect_group, filter_valid};
use conspo_lab::scores::ClipConfig;
use conspo_lab::{Algorithm, Result, TabularPolicy, Task};

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let old = TabularPolicy::random(3, 1, 3, 3, 1.0, &mut rng)?;
    let reference = TabularPolicy::uniform(3, 1, 3, 3)?;
    let mut cur = old.clone();
    for z in cur.logits_mut() {
        *z *= 1.1;
    }
    let task = Task::sum_mod(3)?;
    let groups = (0..6)
        .map(|q| collect_group(&old, &reference, &task, q % 3, 8, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let (valid, skipped) = filter_valid(groups);
    println!("{} valid groups, {skipped} skipped", valid.len());

    for algorithm in [Algorithm::Grpo, Algorithm::Conspo] {
        let cfg = ObjectiveConfig {
            algorithm,
            clip: ClipConfig::default(),
            contrast: ContrastConfig::new(10.0, 0.005)?,
            beta: 0.05,
        };
        let analytic = objective_param_grad(&cur, &valid, &cfg, &reference)?;
        let numeric = finite_diff_oracle(
            |p| batch_objective(p, &valid, &cfg, &reference),
            &cur,
            0..cur.logits().len(),
            1e-5,
        )?;
        println!(
            "{algorithm}: objective {:+.6}, |grad| {:.6}, relative error {:.2e}",
            batch_objective(&cur, &valid, &cfg, &reference)?,
            analytic.norm(),
            grad_relative_error(&analytic, &numeric)
        );
    }
    Ok(())
}
