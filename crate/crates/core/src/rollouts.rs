//! Rollout groups: sampling, reward attachment and validity filtering.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::advantage::{empirical_advantages, GroupStats, DEGENERATE_STD};
use crate::error::{Error, Result};
use crate::policy::{TabularPolicy, Token};
use crate::tasks::Task;

/// A sampled token sequence with per-step log-probabilities under the
/// current, sampling and reference policies.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub tokens: Vec<Token>,
    pub reward: f64,
    pub logp_cur: Vec<f64>,
    pub logp_old: Vec<f64>,
    pub logp_ref: Vec<f64>,
}

impl Rollout {
    pub fn new(
        current: &TabularPolicy,
        old: &TabularPolicy,
        reference: &TabularPolicy,
        query_class: usize,
        tokens: Vec<Token>,
        reward: f64,
    ) -> Result<Self> {
        Ok(Self {
            logp_cur: current.step_logprobs(query_class, &tokens)?,
            logp_old: old.step_logprobs(query_class, &tokens)?,
            logp_ref: reference.step_logprobs(query_class, &tokens)?,
            tokens,
            reward,
        })
    }

    /// Build a rollout directly from log-probability lists.
    pub fn from_logprobs(
        tokens: Vec<Token>,
        reward: f64,
        logp_cur: Vec<f64>,
        logp_old: Vec<f64>,
        logp_ref: Vec<f64>,
    ) -> Result<Self> {
        if logp_cur.is_empty() || logp_cur.len() != logp_old.len() || logp_cur.len() != logp_ref.len() {
            return Err(Error::domain("log-prob lists must be nonempty and aligned"));
        }
        Ok(Self {
            tokens,
            reward,
            logp_cur,
            logp_old,
            logp_ref,
        })
    }

    /// Number of scored steps `|o|`.
    pub fn len(&self) -> usize {
        self.logp_old.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logp_old.is_empty()
    }

    /// Recompute `logp_cur` under `policy`.
    pub fn refresh(&mut self, policy: &TabularPolicy, query_class: usize) -> Result<()> {
        self.logp_cur = policy.step_logprobs(query_class, &self.tokens)?;
        Ok(())
    }
}

/// Which side of the group mean a rollout's reward falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Positive,
    Negative,
    /// Reward equal to the group mean (graded rewards only).
    Neutral,
}

/// The `G` rollouts of one query.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub query_class: usize,
    pub rollouts: Vec<Rollout>,
    pub stats: GroupStats,
}

impl Group {
    pub fn new(query_class: usize, rollouts: Vec<Rollout>) -> Result<Self> {
        let rewards: Vec<f64> = rollouts.iter().map(|r| r.reward).collect();
        let stats = empirical_advantages(&rewards)?;
        Ok(Self {
            query_class,
            rollouts,
            stats,
        })
    }

    pub fn size(&self) -> usize {
        self.rollouts.len()
    }

    /// Whether every reward is 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.rollouts.iter().all(|r| r.reward == 0.0 || r.reward == 1.0)
    }

    /// Binary rewards split on `r = 1` versus `r = 0`. Graded rewards split
    /// on the group mean, and a degenerate graded group has no sides.
    pub fn polarity(&self, index: usize) -> Polarity {
        let r = self.rollouts[index].reward;
        if self.is_binary() {
            if r == 1.0 {
                Polarity::Positive
            } else {
                Polarity::Negative
            }
        } else if self.stats.degenerate || r == self.stats.mean {
            Polarity::Neutral
        } else if r > self.stats.mean {
            Polarity::Positive
        } else {
            Polarity::Negative
        }
    }

    pub fn positive_indices(&self) -> Vec<usize> {
        (0..self.size())
            .filter(|&i| self.polarity(i) == Polarity::Positive)
            .collect()
    }

    pub fn negative_indices(&self) -> Vec<usize> {
        (0..self.size())
            .filter(|&i| self.polarity(i) == Polarity::Negative)
            .collect()
    }

    pub fn n_pos(&self) -> usize {
        self.positive_indices().len()
    }

    pub fn n_neg(&self) -> usize {
        self.negative_indices().len()
    }

    /// `N+ / (N+ + N-)`; zero when both sides are empty.
    pub fn pass_rate(&self) -> f64 {
        let (p, n) = (self.n_pos(), self.n_neg());
        if p + n == 0 {
            0.0
        } else {
            p as f64 / (p + n) as f64
        }
    }

    /// Mean reward over all rollouts.
    pub fn mean_reward(&self) -> f64 {
        self.stats.mean
    }

    /// A group is valid when it has both positives and negatives and a
    /// nonzero reward spread.
    pub fn is_valid(&self) -> bool {
        self.stats.std > DEGENERATE_STD && self.n_pos() > 0 && self.n_neg() > 0
    }

    /// Recompute every rollout's `logp_cur` under `policy`.
    pub fn refresh(&mut self, policy: &TabularPolicy) -> Result<()> {
        let class = self.query_class;
        self.rollouts
            .iter_mut()
            .try_for_each(|r| r.refresh(policy, class))
    }
}

/// Sample `group_size` rollouts from `policy_old` and attach rewards.
///
/// `logp_cur` starts equal to `logp_old`.
pub fn collect_group<R: Rng + ?Sized>(
    policy_old: &TabularPolicy,
    reference: &TabularPolicy,
    task: &Task,
    query_class: usize,
    group_size: usize,
    rng: &mut R,
) -> Result<Group> {
    if group_size < 2 {
        return Err(Error::domain("group size must be at least 2"));
    }
    task.target(query_class)?;
    let mut rollouts = Vec::with_capacity(group_size);
    for _ in 0..group_size {
        let tokens = policy_old.sample_rollout(query_class, rng)?;
        let reward = task.verify(query_class, &tokens);
        let logp_old = policy_old.step_logprobs(query_class, &tokens)?;
        let logp_ref = reference.step_logprobs(query_class, &tokens)?;
        rollouts.push(Rollout {
            tokens,
            reward,
            logp_cur: logp_old.clone(),
            logp_old,
            logp_ref,
        });
    }
    Group::new(query_class, rollouts)
}

/// Keep the groups with at least one positive and one negative rollout.
/// Returns the kept groups and the number dropped.
pub fn filter_valid(groups: Vec<Group>) -> (Vec<Group>, usize) {
    let total = groups.len();
    let kept: Vec<Group> = groups.into_iter().filter(Group::is_valid).collect();
    let skipped = total - kept.len();
    (kept, skipped)
}

/// Independent rng stream for query `index` of optimizer step `step`.
pub fn query_rng(seed: u64, step: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step.wrapping_mul(1 << 32).wrapping_add(index));
    rng
}
