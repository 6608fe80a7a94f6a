//! The clipped surrogate written as a discriminative objective: exact
//! expectations on one query, then the empirical version on a sampled group.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use conspo_lab::advantage::decompose;
use conspo_lab::objectives::{
    discriminative_binary_empirical, discriminative_general, expected_clip_surrogate,
    grpo_clip_surrogate, scored_rollout,
};
use conspo_lab::rollouts::collect_group;
use conspo_lab::scores::{clipped_neg_score, clipped_pos_score, ClipConfig};
use conspo_lab::{Result, TabularPolicy, Task};

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let old = TabularPolicy::random(3, 1, 3, 1, 1.0, &mut rng)?;
    let mut cur = old.clone();
    for (i, z) in cur.logits_mut().iter_mut().enumerate() {
        *z += 0.3 * (i as f64).cos();
    }
    let task = Task::sum_mod(3)?;
    let clip = ClipConfig::default();

    let seqs = old.enumerate_sequences(0, 1_000_000)?;
    let d = decompose(&seqs, &task, 0)?;
    let expectation = expected_clip_surrogate(&cur, &old, 0, &d, clip)?;
    let form = discriminative_general(
        &d,
        |o| clipped_pos_score(&scored_rollout(&cur, &old, 0, o)?, clip),
        |o| clipped_neg_score(&scored_rollout(&cur, &old, 0, o)?, clip),
    )?;
    println!("weight W = {:.6} (half mean |A| = {:.6})", d.weight, d.half_abs_advantage);
    println!("expectation form     {expectation:+.15}");
    println!("discriminative form  {:+.15}", form.via_weight);

    let mut group = collect_group(&old, &old, &task, 0, 8, &mut rng)?;
    group.refresh(&cur)?;
    if group.is_valid() {
        println!(
            "sampled group N+={} N-={}: token form {:+.15}, discriminative {:+.15}",
            group.n_pos(),
            group.n_neg(),
            grpo_clip_surrogate(&group, clip)?,
            discriminative_binary_empirical(&group, clip)?
        );
    }
    Ok(())
}
