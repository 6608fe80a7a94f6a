//! Exact enumeration of a tabular policy's sequence space, checked against
//! sampling, with exact pass rates for the sum-mod task.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use conspo_lab::{Result, TabularPolicy, Task};

fn main() -> Result<()> {
    let policy = TabularPolicy::uniform(4, 1, 4, 4)?;
    let task = Task::sum_mod(4)?;
    let seqs = policy.enumerate_sequences(0, 1_000_000)?;
    let mass: f64 = seqs.iter().map(|s| s.1).sum();
    println!("sequences per query: {} (total mass {mass:.12})", seqs.len());
    for (tokens, p) in seqs.iter().take(5) {
        println!("  {tokens:?}  p = {p:.6}");
    }

    for class in 0..task.num_classes() {
        println!(
            "target {}: exact pass rate {:.4}",
            task.target(class)?,
            task.exact_pass_rate(&policy, class)?
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let random = TabularPolicy::random(4, 1, 4, 4, 1.0, &mut rng)?;
    let n = 20_000;
    let hits = (0..n)
        .filter(|_| task.verify(1, &random.sample_rollout(1, &mut rng).unwrap()) == 1.0)
        .count();
    println!(
        "random policy, target 1: exact {:.4}, sampled {:.4} over {n} rollouts",
        task.exact_pass_rate(&random, 1)?,
        hits as f64 / n as f64
    );
    Ok(())
}
