//! How GRPO and ConSPO distribute credit over the rollouts of one group.
//! GRPO gives every negative the same push; ConSPO pushes hardest on the
//! negatives the policy currently likes most.

use conspo_lab::gradients::{conspo_score_grads, grpo_score_grads_from_counts};
use conspo_lab::objectives::{contrastive_probs, ContrastConfig};
use conspo_lab::Result;

fn main() -> Result<()> {
    let pos = [-0.6, -1.2];
    let neg = [-0.4, -1.0, -2.5];
    let cfg = ContrastConfig::new(1.0, 0.0)?;

    let grpo = grpo_score_grads_from_counts(pos.len(), neg.len())?;
    let conspo = conspo_score_grads(&pos, &neg, cfg)?;
    println!("{:>10} {:>8} {:>10} {:>10}", "rollout", "score", "grpo", "conspo");
    for (i, s) in pos.iter().enumerate() {
        println!("{:>10} {s:>8.2} {:>10.4} {:>10.4}", format!("pos{i}"), grpo.pos[i], conspo.pos[i]);
    }
    for (j, s) in neg.iter().enumerate() {
        println!("{:>10} {s:>8.2} {:>10.4} {:>10.4}", format!("neg{j}"), grpo.neg[j], conspo.neg[j]);
    }
    println!(
        "neg0/neg2 credit ratio {:.4}, exp((s0 - s2)/tau) = {:.4}",
        conspo.neg[0] / conspo.neg[2],
        ((neg[0] - neg[2]) / cfg.tau).exp()
    );
    println!("total credit {:+.2e}", conspo.total());

    for m in [0.0, 0.5, 1.0] {
        let probs = contrastive_probs(&pos, &neg, cfg.with_margin(m)?)?;
        println!("margin {m:.1}: P+ = {:?}", probs.pos.iter().map(|p| format!("{p:.4}")).collect::<Vec<_>>());
    }
    Ok(())
}
