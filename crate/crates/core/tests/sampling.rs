//! Monte-Carlo agreement between the sampler, the enumerator and the
//! exact pass rate, and finite-difference checks of log-prob gradients.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use conspo_lab::gradients::{finite_diff_oracle, grad_relative_error};
use conspo_lab::{TabularPolicy, Task, TaskKind};

const SAMPLES: usize = 100_000;

fn within_four_sigma(observed: usize, p: f64) -> bool {
    let n = SAMPLES as f64;
    let sigma = (n * p * (1.0 - p)).sqrt();
    (observed as f64 - n * p).abs() <= 4.0 * sigma.max(1.0)
}

#[test]
fn sampler_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let p = TabularPolicy::random(3, 1, 3, 1, 1.5, &mut rng).unwrap();
    let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
    for _ in 0..SAMPLES {
        *counts.entry(p.sample_rollout(0, &mut rng).unwrap()).or_default() += 1;
    }
    let exact = p.enumerate_sequences(0, 1000).unwrap();
    for (tokens, prob) in &exact {
        let seen = counts.get(tokens).copied().unwrap_or(0);
        assert!(within_four_sigma(seen, *prob), "{tokens:?}: {seen} vs {prob}");
    }
    assert!(counts.keys().all(|k| exact.iter().any(|(t, _)| t == k)));
}

#[test]
fn monte_carlo_pass_rate_matches_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let p = TabularPolicy::random(4, 1, 4, 4, 1.0, &mut rng).unwrap();
    for kind in [TaskKind::SumMod, TaskKind::ConstantTarget] {
        let task = Task::new(kind, 4, vec![0, 1, 2, 3]).unwrap();
        for class in 0..4 {
            let exact = task.exact_pass_rate(&p, class).unwrap();
            let hits = (0..SAMPLES)
                .filter(|_| task.verify(class, &p.sample_rollout(class, &mut rng).unwrap()) == 1.0)
                .count();
            assert!(within_four_sigma(hits, exact), "{kind} class {class}: {hits} vs {exact}");
        }
    }
}

#[test]
fn logprob_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for trial in 0..100 {
        let order = trial % 3;
        let p = TabularPolicy::random(3, order, 3, 2, 2.0, &mut rng).unwrap();
        let class = trial % 2;
        let tokens = p.sample_rollout(class, &mut rng).unwrap();
        let analytic = p.logprob_param_grad(class, &tokens).unwrap();
        let numeric = finite_diff_oracle(
            |q| q.sequence_logprob(class, &tokens),
            &p,
            0..p.logits().len(),
            1e-5,
        )
        .unwrap();
        let err = grad_relative_error(&analytic, &numeric);
        assert!(err <= 1e-7, "trial {trial}: {err}");
    }
}
