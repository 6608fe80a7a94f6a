//! Group-relative advantages, empirical and exact.
//!
//! The exact decomposition splits the expected advantage `A = (r - mu) / sigma`
//! of the sampling policy into its positive and negative parts and reweights
//! the sampling distribution by each part. Both reweighted distributions
//! share the normaliser `W = E[A+] = E[A-] = E|A| / 2`.

use crate::error::{Error, Result};
use crate::policy::Token;
use crate::tasks::Task;

/// Reward standard deviations at or below this are treated as zero.
pub const DEGENERATE_STD: f64 = 1e-12;

/// Empirical statistics of one group (population standard deviation).
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStats {
    pub mean: f64,
    pub std: f64,
    pub advantages: Vec<f64>,
    /// Set when `std <= DEGENERATE_STD`; advantages are then all zero.
    pub degenerate: bool,
}

/// `A_i = (r_i - mean) / std` over a group of rewards.
pub fn empirical_advantages(rewards: &[f64]) -> Result<GroupStats> {
    if rewards.len() < 2 {
        return Err(Error::domain(format!(
            "group of {} rewards; at least 2 required",
            rewards.len()
        )));
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std <= DEGENERATE_STD {
        return Ok(GroupStats {
            mean,
            std,
            advantages: vec![0.0; rewards.len()],
            degenerate: true,
        });
    }
    Ok(GroupStats {
        mean,
        std,
        advantages: rewards.iter().map(|r| (r - mean) / std).collect(),
        degenerate: false,
    })
}

/// Expected advantages of a correct and an incorrect rollout under binary
/// rewards with pass rate `p`.
pub fn expected_advantage_binary(p: f64) -> Result<(f64, f64)> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("pass rate {p} not in (0, 1)")));
    }
    Ok((((1.0 - p) / p).sqrt(), -(p / (1.0 - p)).sqrt()))
}

/// `sqrt(p (1 - p))`, the discrimination weight under binary rewards.
pub fn binary_weight(p: f64) -> f64 {
    (p * (1.0 - p)).max(0.0).sqrt()
}

/// One outcome of the sampling distribution with its advantage split.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedOutcome {
    pub tokens: Vec<Token>,
    pub prob: f64,
    pub reward: f64,
    pub advantage: f64,
}

/// Exact advantage decomposition over an enumerated outcome space.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageDecomposition {
    pub outcomes: Vec<WeightedOutcome>,
    pub mean: f64,
    pub std: f64,
    /// `E[A+]`.
    pub weight: f64,
    /// `E[A-]`, equal to `weight` up to rounding.
    pub weight_neg: f64,
    /// `E|A| / 2`, equal to `weight` up to rounding.
    pub half_abs_advantage: f64,
    /// Reweighted distribution `A+ pi / W` as `(outcome index, probability)`.
    pub pos_dist: Vec<(usize, f64)>,
    /// Reweighted distribution `A- pi / W` as `(outcome index, probability)`.
    pub neg_dist: Vec<(usize, f64)>,
}

impl AdvantageDecomposition {
    /// Decompose an arbitrary reward assignment over an outcome distribution.
    pub fn from_rewards(outcomes: Vec<(Vec<Token>, f64, f64)>) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::domain("empty outcome space"));
        }
        if outcomes.iter().any(|(_, p, r)| !p.is_finite() || !r.is_finite()) {
            return Err(Error::Numeric("non-finite probability or reward".into()));
        }
        let mean: f64 = outcomes.iter().map(|(_, p, r)| p * r).sum();
        let var: f64 = outcomes.iter().map(|(_, p, r)| p * (r - mean).powi(2)).sum();
        let std = var.sqrt();
        if std <= DEGENERATE_STD {
            return Err(Error::Degenerate(format!(
                "reward standard deviation {std:e} under the sampling policy"
            )));
        }
        let outcomes: Vec<WeightedOutcome> = outcomes
            .into_iter()
            .map(|(tokens, prob, reward)| WeightedOutcome {
                tokens,
                prob,
                reward,
                advantage: (reward - mean) / std,
            })
            .collect();
        let weight: f64 = outcomes.iter().map(|o| o.prob * o.advantage.max(0.0)).sum();
        let weight_neg: f64 = outcomes
            .iter()
            .map(|o| o.prob * (-o.advantage).max(0.0))
            .sum();
        let half_abs_advantage =
            0.5 * outcomes.iter().map(|o| o.prob * o.advantage.abs()).sum::<f64>();
        let pos_dist = outcomes
            .iter()
            .enumerate()
            .filter(|(_, o)| o.advantage > 0.0)
            .map(|(i, o)| (i, o.advantage * o.prob / weight))
            .collect();
        let neg_dist = outcomes
            .iter()
            .enumerate()
            .filter(|(_, o)| o.advantage < 0.0)
            .map(|(i, o)| (i, -o.advantage * o.prob / weight))
            .collect();
        Ok(Self {
            outcomes,
            mean,
            std,
            weight,
            weight_neg,
            half_abs_advantage,
            pos_dist,
            neg_dist,
        })
    }

    /// Expectation of `f` under the positively reweighted distribution.
    pub fn expect_pos(&self, mut f: impl FnMut(&WeightedOutcome) -> f64) -> f64 {
        self.pos_dist
            .iter()
            .map(|&(i, w)| w * f(&self.outcomes[i]))
            .sum()
    }

    /// Expectation of `f` under the negatively reweighted distribution.
    pub fn expect_neg(&self, mut f: impl FnMut(&WeightedOutcome) -> f64) -> f64 {
        self.neg_dist
            .iter()
            .map(|&(i, w)| w * f(&self.outcomes[i]))
            .sum()
    }
}

/// Exact decomposition of a query's enumerated sampling distribution under
/// the task's verifier.
pub fn decompose(
    enumeration: &[(Vec<Token>, f64)],
    task: &Task,
    query_class: usize,
) -> Result<AdvantageDecomposition> {
    task.target(query_class)?;
    AdvantageDecomposition::from_rewards(
        enumeration
            .iter()
            .map(|(seq, p)| (seq.clone(), *p, task.verify(query_class, seq)))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_group() {
        let s = empirical_advantages(&[1.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(s.advantages, vec![1.0, 1.0, -1.0, -1.0]);
        assert!(!s.degenerate);
    }

    #[test]
    fn single_success_group() {
        let s = empirical_advantages(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        let expected = [1.7320508, -0.5773503, -0.5773503, -0.5773503];
        for (a, e) in s.advantages.iter().zip(expected) {
            assert!((a - e).abs() < 1e-7);
        }
        assert!(s.advantages.iter().sum::<f64>().abs() < 1e-10);
    }

    #[test]
    fn degenerate_and_short_groups() {
        let s = empirical_advantages(&[1.0; 4]).unwrap();
        assert!(s.degenerate);
        assert_eq!(s.advantages, vec![0.0; 4]);
        assert!(empirical_advantages(&[1.0]).is_err());
    }

    #[test]
    fn binary_expected_advantages() {
        assert_eq!(expected_advantage_binary(0.5).unwrap(), (1.0, -1.0));
        let (a, b) = expected_advantage_binary(0.25).unwrap();
        assert!((a - 1.7320508).abs() < 1e-7 && (b + 0.5773503).abs() < 1e-7);
        assert!(expected_advantage_binary(0.0).is_err());
        assert!(expected_advantage_binary(1.0).is_err());
        for p in [0.1, 0.37, 0.9] {
            let (a, b) = expected_advantage_binary(p).unwrap();
            assert!((p * a + (1.0 - p) * b).abs() < 1e-15);
        }
    }

    #[test]
    fn binary_weights() {
        assert_eq!(binary_weight(0.5), 0.5);
        assert_eq!(binary_weight(0.0), 0.0);
        assert_eq!(binary_weight(1.0), 0.0);
        assert!((binary_weight(0.25) - 0.4330127).abs() < 1e-7);
    }

    #[test]
    fn binary_decomposition() {
        let d = AdvantageDecomposition::from_rewards(vec![
            (vec![0], 0.25, 1.0),
            (vec![1], 0.25, 1.0),
            (vec![2], 0.5, 0.0),
        ])
        .unwrap();
        assert_eq!(d.weight, 0.5);
        assert_eq!(d.pos_dist, vec![(0, 0.5), (1, 0.5)]);
        assert_eq!(d.neg_dist, vec![(2, 1.0)]);

        let d = AdvantageDecomposition::from_rewards(vec![
            (vec![0], 0.25, 1.0),
            (vec![1], 0.75, 0.0),
        ])
        .unwrap();
        assert!((d.weight - 0.4330127).abs() < 1e-7);
    }

    #[test]
    fn graded_decomposition() {
        let d = AdvantageDecomposition::from_rewards(vec![
            (vec![], 0.25, 0.0),
            (vec![0], 0.5, 0.5),
            (vec![1], 0.25, 1.0),
        ])
        .unwrap();
        assert!((d.std - 0.125f64.sqrt()).abs() < 1e-15);
        assert!((d.weight - 0.3535534).abs() < 1e-7);
        assert!((d.weight - d.half_abs_advantage).abs() < 1e-12);
        assert!((d.weight - d.weight_neg).abs() < 1e-12);
        assert_eq!(d.pos_dist.len(), 1);
        assert_eq!(d.pos_dist[0].0, 2);
        assert!((d.pos_dist[0].1 - 1.0).abs() < 1e-12);
        assert_eq!(d.neg_dist[0].0, 0);
        assert!((d.neg_dist[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_is_degenerate() {
        let err = AdvantageDecomposition::from_rewards(vec![(vec![], 0.5, 1.0), (vec![0], 0.5, 1.0)]);
        assert!(matches!(err, Err(Error::Degenerate(_))));
    }
}
