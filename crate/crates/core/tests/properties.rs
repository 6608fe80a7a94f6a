//! Invariants over randomly generated policies, groups and scores.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use conspo_lab::advantage::empirical_advantages;
use conspo_lab::gradients::{conspo_score_grads, grpo_score_grads};
use conspo_lab::objectives::{
    clip_identity_check, contrastive_probs, conspo_objective, discriminative_binary_empirical,
    grpo_clip_surrogate, infonce_objective, ContrastConfig,
};
use conspo_lab::rollouts::{collect_group, Group, Rollout};
use conspo_lab::schedule::MarginSchedule;
use conspo_lab::scores::{likelihood_score, ClipConfig};
use conspo_lab::{TabularPolicy, Task, TaskKind};

fn policy(seed: u64, vocab: usize, order: usize, max_len: usize, classes: usize) -> TabularPolicy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TabularPolicy::random(vocab, order, max_len, classes, 2.0, &mut rng).unwrap()
}

fn scores(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-4.0f64..0.0, 1..=n)
}

proptest! {
    #[test]
    fn enumeration_is_normalized(seed in any::<u64>(), vocab in 1usize..=4, order in 0usize..=2, max_len in 1usize..=4) {
        let p = policy(seed, vocab, order, max_len, 2);
        for class in 0..2 {
            let seqs = p.enumerate_sequences(class, 1_000_000).unwrap();
            prop_assert_eq!(seqs.len() as u128, p.sequence_count());
            let total: f64 = seqs.iter().map(|s| s.1).sum();
            prop_assert!((total - 1.0).abs() <= 1e-10);
            for (tokens, prob) in &seqs {
                let lp = p.sequence_logprob(class, tokens).unwrap();
                prop_assert!((lp.exp() - prob).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn kl_is_nonnegative_and_zero_on_self(seed in any::<u64>(), other in any::<u64>()) {
        let p = policy(seed, 3, 1, 3, 1);
        let q = policy(other, 3, 1, 3, 1);
        let seqs = p.enumerate_sequences(0, 1000).unwrap();
        let visits = || seqs.iter().map(|(s, _)| (0usize, s.as_slice()));
        prop_assert!(p.kl_to_reference(&q, visits()).unwrap() >= 0.0);
        prop_assert!(p.kl_to_reference(&p, visits()).unwrap().abs() <= 1e-15);
    }

    #[test]
    fn advantages_are_standardized(rewards in prop::collection::vec(prop::sample::select(vec![0.0, 0.25, 0.5, 1.0]), 2..16)) {
        let stats = empirical_advantages(&rewards).unwrap();
        if !stats.degenerate {
            let sum: f64 = stats.advantages.iter().sum();
            let second: f64 = stats.advantages.iter().map(|a| a * a).sum::<f64>() / rewards.len() as f64;
            prop_assert!(sum.abs() <= 1e-12);
            prop_assert!((second - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn clip_forms_agree(rho in 0.0f64..4.0, adv in -5.0f64..5.0, eps in 0.01f64..0.99) {
        let (a, b) = clip_identity_check(rho, adv, ClipConfig::new(eps).unwrap());
        prop_assert!((a - b).abs() <= 1e-14);
    }

    #[test]
    fn contrastive_rows_are_distributions(pos in scores(6), neg in scores(6), tau in 0.5f64..20.0, m in 0.0f64..1.0) {
        let probs = contrastive_probs(&pos, &neg, ContrastConfig::new(tau, m).unwrap()).unwrap();
        for (p, row) in probs.pos.iter().zip(&probs.neg) {
            prop_assert!((p + row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(row.iter().chain(std::iter::once(p)).all(|&x| x > 0.0 && x < 1.0));
        }
    }

    #[test]
    fn infonce_is_shift_invariant_and_negative(pos in scores(5), neg in scores(5), c in -3.0f64..3.0, tau in 0.5f64..20.0) {
        let base = infonce_objective(&pos, &neg, tau).unwrap();
        let shift = |v: &[f64]| v.iter().map(|x| x + c).collect::<Vec<_>>();
        let moved = infonce_objective(&shift(&pos), &shift(&neg), tau).unwrap();
        prop_assert!(base < 0.0);
        prop_assert!((base - moved).abs() <= 1e-9 * base.abs().max(1.0));
    }

    #[test]
    fn margin_strictly_lowers_objective(pos in scores(5), neg in scores(5), m1 in 0.0f64..0.5, dm in 0.01f64..0.5) {
        let at = |m| conspo_objective(&pos, &neg, ContrastConfig::new(2.0, m).unwrap()).unwrap();
        prop_assert!(at(m1) > at(m1 + dm));
        prop_assert_eq!(at(0.0), infonce_objective(&pos, &neg, 2.0).unwrap());
    }

    #[test]
    fn contrastive_credit_is_balanced(pos in scores(6), neg in scores(6), tau in 0.5f64..20.0, m in 0.0f64..1.0) {
        let g = conspo_score_grads(&pos, &neg, ContrastConfig::new(tau, m).unwrap()).unwrap();
        prop_assert!(g.total().abs() <= 1e-12);
        prop_assert!(g.pos.iter().all(|&x| x > 0.0));
        prop_assert!(g.neg.iter().all(|&x| x < 0.0));
    }

    #[test]
    fn schedule_is_monotone_and_exact(target in 0.0f64..1.0, alpha in 0.05f64..1.0, total in 1u64..300) {
        let s = MarginSchedule::new(target, alpha, total).unwrap();
        prop_assert_eq!(s.margin_at(0).unwrap(), 0.0);
        prop_assert_eq!(s.margin_at(total).unwrap().to_bits(), target.to_bits());
        let mut last = 0.0;
        for t in 0..=total {
            let m = s.margin_at(t).unwrap();
            prop_assert!(m >= last && m <= target);
            last = m;
        }
    }

    #[test]
    fn length_normalization(lp in -3.0f64..0.0, n in 1usize..6) {
        let one = Rollout::from_logprobs(vec![0; n], 1.0, vec![lp; n], vec![lp; n], vec![lp; n]).unwrap();
        let two = Rollout::from_logprobs(vec![0; 2 * n], 1.0, vec![lp; 2 * n], vec![lp; 2 * n], vec![lp; 2 * n]).unwrap();
        prop_assert!((likelihood_score(&one).unwrap() - likelihood_score(&two).unwrap()).abs() <= 1e-12);
    }

    /// The token-level clipped surrogate of a binary group equals its
    /// empirical discriminative form, off-policy included.
    #[test]
    fn binary_group_surrogate_is_discriminative(seed in any::<u64>(), scale in prop::sample::select(vec![0.0, 0.1, 0.5, 2.0])) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let old = TabularPolicy::random(3, 1, 3, 1, 1.0, &mut rng).unwrap();
        let mut cur = old.clone();
        for (i, z) in cur.logits_mut().iter_mut().enumerate() {
            *z += scale * ((i as f64 * 0.77).sin());
        }
        let task = Task::new(TaskKind::SumMod, 3, vec![(seed % 3) as usize]).unwrap();
        let mut group = collect_group(&old, &old, &task, 0, 8, &mut rng).unwrap();
        if group.is_valid() {
            group.refresh(&cur).unwrap();
            let clip = ClipConfig::default();
            let token_form = grpo_clip_surrogate(&group, clip).unwrap();
            let disc = discriminative_binary_empirical(&group, clip).unwrap();
            prop_assert!((token_form - disc).abs() <= 1e-12);
            let credit = grpo_score_grads(&group).unwrap();
            prop_assert!(credit.total().abs() <= 1e-12);
            if scale == 0.0 {
                prop_assert!(token_form.abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn verifier_is_deterministic(tokens in prop::collection::vec(0usize..4, 0..6), target in 0usize..4) {
        for kind in [TaskKind::SumMod, TaskKind::ConstantTarget, TaskKind::GradedLinear] {
            let task = Task::new(kind, 4, vec![target]).unwrap();
            let r = task.verify(0, &tokens);
            prop_assert_eq!(r, task.verify(0, &tokens));
            prop_assert!((0.0..=1.0).contains(&r));
            if kind.is_binary() {
                prop_assert!(r == 0.0 || r == 1.0);
            }
        }
    }
}

#[test]
fn valid_groups_have_both_sides() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = TabularPolicy::uniform(4, 1, 4, 4).unwrap();
    let task = Task::sum_mod(4).unwrap();
    for class in 0..4 {
        for _ in 0..50 {
            let g: Group = collect_group(&p, &p, &task, class, 8, &mut rng).unwrap();
            assert_eq!(g.is_valid(), g.n_pos() > 0 && g.n_neg() > 0);
            assert_eq!(g.n_pos() + g.n_neg(), 8);
        }
    }
}

#[test]
fn uniform_sum_mod_is_symmetric_across_nonzero_targets() {
    let p = TabularPolicy::uniform(4, 1, 4, 4).unwrap();
    let task = Task::sum_mod(4).unwrap();
    let rates: Vec<f64> = (0..4).map(|c| task.exact_pass_rate(&p, c).unwrap()).collect();
    assert!((rates[0] - 0.4).abs() < 1e-12);
    for r in &rates[1..] {
        assert!((r - 0.2).abs() < 1e-12);
    }
}
