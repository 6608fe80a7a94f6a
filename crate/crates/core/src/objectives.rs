//! Scalar objectives.
//!
//! GRPO's clipped surrogate appears in three equivalent shapes: the
//! token-level group form, the exact expectation form over an enumerated
//! outcome space, and the discriminative form that contrasts clipped scores
//! of positively and negatively reweighted outcomes. ConSPO replaces the
//! clipped scores with length-normalized log-likelihoods and contrasts each
//! positive against the group's negatives through a temperature-scaled
//! softmax, with an optional margin subtracted from the positive score.

use std::fmt;
use std::str::FromStr;

use crate::advantage::{binary_weight, AdvantageDecomposition, WeightedOutcome};
use crate::error::{Error, Result};
use crate::policy::{log_sum_exp, TabularPolicy};
use crate::rollouts::{Group, Rollout};
use crate::scores::{clipped_neg_score, clipped_pos_score, likelihood_score, token_ratios, ClipConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Grpo,
    Conspo,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Grpo => "grpo",
            Algorithm::Conspo => "conspo",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grpo" => Ok(Algorithm::Grpo),
            "conspo" => Ok(Algorithm::Conspo),
            other => Err(Error::domain(format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Temperature and (per-step) margin of the contrastive objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContrastConfig {
    pub tau: f64,
    pub margin: f64,
}

impl ContrastConfig {
    pub fn new(tau: f64, margin: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::domain(format!("temperature {tau} must be positive")));
        }
        if !(margin >= 0.0 && margin.is_finite()) {
            return Err(Error::domain(format!("margin {margin} must be nonnegative")));
        }
        Ok(Self { tau, margin })
    }

    pub fn with_margin(self, margin: f64) -> Result<Self> {
        Self::new(self.tau, margin)
    }
}

impl Default for ContrastConfig {
    fn default() -> Self {
        Self {
            tau: 10.0,
            margin: 0.0,
        }
    }
}

/// Everything a batch objective needs besides the policy and the groups.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveConfig {
    pub algorithm: Algorithm,
    pub clip: ClipConfig,
    pub contrast: ContrastConfig,
    /// KL penalty weight.
    pub beta: f64,
}

/// `min(rho A, clip(rho, 1 - eps, 1 + eps) A)`.
pub fn clip_objective(rho: f64, advantage: f64, clip: ClipConfig) -> f64 {
    let clipped = rho.clamp(clip.lower(), clip.upper());
    (rho * advantage).min(clipped * advantage)
}

/// The min/max form of the clip function and its decomposition
/// `A+ min(rho, 1 + eps) - A- max(rho, 1 - eps)`.
pub fn clip_identity_check(rho: f64, advantage: f64, clip: ClipConfig) -> (f64, f64) {
    let pos = advantage.max(0.0);
    let neg = (-advantage).max(0.0);
    (
        clip_objective(rho, advantage, clip),
        pos * rho.min(clip.upper()) - neg * rho.max(clip.lower()),
    )
}

fn rollout_clip_term(rollout: &Rollout, advantage: f64, clip: ClipConfig) -> Result<f64> {
    let ratios = token_ratios(rollout)?;
    Ok(ratios
        .iter()
        .map(|&rho| clip_objective(rho, advantage, clip))
        .sum::<f64>()
        / ratios.len() as f64)
}

/// Token-level clipped surrogate of one group, without the KL term.
pub fn grpo_clip_surrogate(group: &Group, clip: ClipConfig) -> Result<f64> {
    if group.rollouts.is_empty() {
        return Err(Error::domain("empty group"));
    }
    if group.stats.degenerate {
        return Err(Error::Degenerate(format!(
            "group for query {} has zero reward spread",
            group.query_class
        )));
    }
    let mut total = 0.0;
    for (rollout, &adv) in group.rollouts.iter().zip(&group.stats.advantages) {
        total += rollout_clip_term(rollout, adv, clip)?;
    }
    Ok(total / group.size() as f64)
}

/// Exact expectation of the clipped surrogate over `pi_old`, with the
/// expected (not empirical) advantage of each outcome.
pub fn expected_clip_surrogate(
    current: &TabularPolicy,
    old: &TabularPolicy,
    query_class: usize,
    decomposition: &AdvantageDecomposition,
    clip: ClipConfig,
) -> Result<f64> {
    let mut total = 0.0;
    for o in &decomposition.outcomes {
        let rollout = scored_rollout(current, old, query_class, o)?;
        total += o.prob * rollout_clip_term(&rollout, o.advantage, clip)?;
    }
    Ok(total)
}

/// A rollout for an enumerated outcome, scored under `current` against `old`.
pub fn scored_rollout(
    current: &TabularPolicy,
    old: &TabularPolicy,
    query_class: usize,
    outcome: &WeightedOutcome,
) -> Result<Rollout> {
    Rollout::new(current, old, old, query_class, outcome.tokens.clone(), outcome.reward)
}

/// The discriminative form evaluated with both equal weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscriminativeForm {
    /// `W (E+[s+] - E-[s-])` with `W = E[A+]`.
    pub via_weight: f64,
    /// The same gap weighted by `E|A| / 2`.
    pub via_half_abs: f64,
}

/// `W(q) (E_{pi+}[s+] - E_{pi-}[s-])` over the reweighted distributions.
pub fn discriminative_general(
    decomposition: &AdvantageDecomposition,
    mut s_plus: impl FnMut(&WeightedOutcome) -> Result<f64>,
    mut s_minus: impl FnMut(&WeightedOutcome) -> Result<f64>,
) -> Result<DiscriminativeForm> {
    if !(decomposition.weight > 0.0) {
        return Err(Error::Degenerate("decomposition weight is zero".into()));
    }
    let mut pos = 0.0;
    for &(i, w) in &decomposition.pos_dist {
        pos += w * s_plus(&decomposition.outcomes[i])?;
    }
    let mut neg = 0.0;
    for &(i, w) in &decomposition.neg_dist {
        neg += w * s_minus(&decomposition.outcomes[i])?;
    }
    let gap = pos - neg;
    Ok(DiscriminativeForm {
        via_weight: decomposition.weight * gap,
        via_half_abs: decomposition.half_abs_advantage * gap,
    })
}

/// Binary-reward specialization: `sqrt(p (1 - p))` times the gap between
/// the conditional expectations given `r = 1` and `r = 0`.
pub fn discriminative_binary(
    outcomes: &[WeightedOutcome],
    mut s_plus: impl FnMut(&WeightedOutcome) -> Result<f64>,
    mut s_minus: impl FnMut(&WeightedOutcome) -> Result<f64>,
) -> Result<f64> {
    if outcomes.iter().any(|o| o.reward != 0.0 && o.reward != 1.0) {
        return Err(Error::domain("rewards are not binary"));
    }
    let p: f64 = outcomes.iter().filter(|o| o.reward == 1.0).map(|o| o.prob).sum();
    let q: f64 = outcomes.iter().filter(|o| o.reward == 0.0).map(|o| o.prob).sum();
    if !(p > 0.0 && q > 0.0) {
        return Err(Error::Degenerate(format!("pass rate {p} not in (0, 1)")));
    }
    let mut pos = 0.0;
    let mut neg = 0.0;
    for o in outcomes {
        if o.reward == 1.0 {
            pos += o.prob / p * s_plus(o)?;
        } else {
            neg += o.prob / q * s_minus(o)?;
        }
    }
    Ok(binary_weight(p) * (pos - neg))
}

/// Empirical binary discriminative objective from score lists.
pub fn discriminative_binary_from_scores(pos_scores: &[f64], neg_scores: &[f64]) -> Result<f64> {
    if pos_scores.is_empty() || neg_scores.is_empty() {
        return Err(Error::domain("need at least one positive and one negative"));
    }
    let (np, nn) = (pos_scores.len() as f64, neg_scores.len() as f64);
    let p_hat = np / (np + nn);
    let pos = pos_scores.iter().sum::<f64>() / np;
    let neg = neg_scores.iter().sum::<f64>() / nn;
    Ok(binary_weight(p_hat) * (pos - neg))
}

/// Empirical binary discriminative objective of a valid group:
/// `sqrt(p (1 - p)) (mean s+(positives) - mean s-(negatives))`.
pub fn discriminative_binary_empirical(group: &Group, clip: ClipConfig) -> Result<f64> {
    if !group.is_valid() {
        return Err(Error::Degenerate(format!(
            "group for query {} has no positive/negative split",
            group.query_class
        )));
    }
    let pos = group
        .positive_indices()
        .into_iter()
        .map(|i| clipped_pos_score(&group.rollouts[i], clip))
        .collect::<Result<Vec<_>>>()?;
    let neg = group
        .negative_indices()
        .into_iter()
        .map(|i| clipped_neg_score(&group.rollouts[i], clip))
        .collect::<Result<Vec<_>>>()?;
    discriminative_binary_from_scores(&pos, &neg)
}

/// Per-positive contrastive probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveProbs {
    /// `P_i+` for each positive.
    pub pos: Vec<f64>,
    /// `P_ij-`, one row per positive, one column per negative.
    pub neg: Vec<Vec<f64>>,
}

fn check_sides(pos: &[f64], neg: &[f64]) -> Result<()> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::domain("contrast needs at least one positive and one negative"));
    }
    if pos.iter().chain(neg).any(|s| !s.is_finite()) {
        return Err(Error::Numeric("non-finite score".into()));
    }
    Ok(())
}

/// Softmax over `{(s_i+ - m)/tau} U {s_j-/tau}` for each positive `i`.
pub fn contrastive_probs(
    pos_scores: &[f64],
    neg_scores: &[f64],
    config: ContrastConfig,
) -> Result<ContrastiveProbs> {
    check_sides(pos_scores, neg_scores)?;
    let neg_logits: Vec<f64> = neg_scores.iter().map(|s| s / config.tau).collect();
    let mut pos = Vec::with_capacity(pos_scores.len());
    let mut neg = Vec::with_capacity(pos_scores.len());
    for &s in pos_scores {
        let x = (s - config.margin) / config.tau;
        let max = neg_logits.iter().copied().fold(x, f64::max);
        let ex = (x - max).exp();
        let ey: Vec<f64> = neg_logits.iter().map(|y| (y - max).exp()).collect();
        let z = ex + ey.iter().sum::<f64>();
        pos.push(ex / z);
        neg.push(ey.into_iter().map(|e| e / z).collect());
    }
    Ok(ContrastiveProbs { pos, neg })
}

/// Margin-enhanced contrastive objective
/// `(1/N+) sum_i tau log P_i+` with positive scores shifted down by the margin.
pub fn conspo_objective(
    pos_scores: &[f64],
    neg_scores: &[f64],
    config: ContrastConfig,
) -> Result<f64> {
    check_sides(pos_scores, neg_scores)?;
    let mut logits = Vec::with_capacity(neg_scores.len() + 1);
    let mut total = 0.0;
    for &s in pos_scores {
        let x = (s - config.margin) / config.tau;
        logits.clear();
        logits.push(x);
        logits.extend(neg_scores.iter().map(|y| y / config.tau));
        total += config.tau * (x - log_sum_exp(&logits));
    }
    Ok(total / pos_scores.len() as f64)
}

/// InfoNCE objective: the contrastive objective at zero margin.
pub fn infonce_objective(pos_scores: &[f64], neg_scores: &[f64], tau: f64) -> Result<f64> {
    conspo_objective(pos_scores, neg_scores, ContrastConfig::new(tau, 0.0)?)
}

/// Likelihood scores of a group's positives and negatives.
pub fn likelihood_split(group: &Group) -> Result<(Vec<f64>, Vec<f64>)> {
    let score = |idx: Vec<usize>| -> Result<Vec<f64>> {
        idx.into_iter()
            .map(|i| likelihood_score(&group.rollouts[i]))
            .collect()
    };
    Ok((score(group.positive_indices())?, score(group.negative_indices())?))
}

/// Contrastive objective of one group on its likelihood scores.
pub fn conspo_group_objective(group: &Group, config: ContrastConfig) -> Result<f64> {
    let (pos, neg) = likelihood_split(group)?;
    conspo_objective(&pos, &neg, config)
}

/// Per-group objective under `config.algorithm`, without the KL term.
pub fn group_objective(group: &Group, config: &ObjectiveConfig) -> Result<f64> {
    match config.algorithm {
        Algorithm::Grpo => grpo_clip_surrogate(group, config.clip),
        Algorithm::Conspo => conspo_group_objective(group, config.contrast),
    }
}

/// Mean per-group objective over `groups` with `logp_cur` re-evaluated under
/// `policy`, minus `beta` times the KL to `reference` over the batch's
/// scored steps.
pub fn batch_objective(
    policy: &TabularPolicy,
    groups: &[Group],
    config: &ObjectiveConfig,
    reference: &TabularPolicy,
) -> Result<f64> {
    if groups.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut total = 0.0;
    for group in groups {
        let mut group = group.clone();
        group.refresh(policy)?;
        total += group_objective(&group, config)?;
    }
    let mean = total / groups.len() as f64;
    if config.beta == 0.0 {
        return Ok(mean);
    }
    let kl = policy.kl_to_reference(reference, batch_visits(groups))?;
    Ok(mean - config.beta * kl)
}

/// `(query_class, tokens)` for every rollout of every group, in order.
pub fn batch_visits(groups: &[Group]) -> impl Iterator<Item = (usize, &[usize])> {
    groups.iter().flat_map(|g| {
        g.rollouts
            .iter()
            .map(move |r| (g.query_class, r.tokens.as_slice()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rollout(ratios: &[f64], reward: f64) -> Rollout {
        let old = vec![-1.0; ratios.len()];
        let cur = ratios.iter().map(|r| r.ln() - 1.0).collect();
        Rollout::from_logprobs(vec![], reward, cur, old.clone(), old).unwrap()
    }

    #[test]
    fn clip_branches() {
        let clip = ClipConfig::default();
        assert!((clip_objective(1.5, 1.0, clip) - 1.2).abs() < 1e-15);
        assert!((clip_objective(0.5, -1.0, clip) + 0.8).abs() < 1e-15);
        let (a, b) = clip_identity_check(1.5, 2.0, clip);
        assert!((a - 2.4).abs() < 1e-14 && (b - 2.4).abs() < 1e-14);
        let (a, b) = clip_identity_check(0.5, -2.0, clip);
        assert!((a + 1.6).abs() < 1e-14 && (b + 1.6).abs() < 1e-14);
        assert_eq!(clip_identity_check(3.7, 0.0, clip), (0.0, 0.0));
    }

    #[test]
    fn on_policy_surrogate_is_zero() {
        let g = Group::new(
            0,
            vec![
                rollout(&[1.0, 1.0], 1.0),
                rollout(&[1.0], 0.0),
                rollout(&[1.0, 1.0, 1.0], 0.0),
            ],
        )
        .unwrap();
        assert!(grpo_clip_surrogate(&g, ClipConfig::default()).unwrap().abs() < 1e-15);
        assert_eq!(discriminative_binary_empirical(&g, ClipConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_group_rejected() {
        let g = Group::new(0, vec![rollout(&[1.0], 1.0), rollout(&[1.0], 1.0)]).unwrap();
        assert!(matches!(grpo_clip_surrogate(&g, ClipConfig::default()), Err(Error::Degenerate(_))));
        assert!(discriminative_binary_empirical(&g, ClipConfig::default()).is_err());
    }

    #[test]
    fn empirical_binary_hand_value() {
        let v = discriminative_binary_from_scores(&[1.0], &[0.8]).unwrap();
        assert!((v - 0.1).abs() < 1e-15);
        assert!(discriminative_binary_from_scores(&[0.5], &[0.8]).unwrap() < 0.0);
    }

    #[test]
    fn token_form_equals_empirical_discriminative_form() {
        let clip = ClipConfig::default();
        let g = Group::new(
            0,
            vec![
                rollout(&[1.3, 0.7], 1.0),
                rollout(&[0.9], 0.0),
                rollout(&[1.05, 1.4, 0.6], 0.0),
                rollout(&[0.5, 2.0], 1.0),
                rollout(&[1.1], 0.0),
            ],
        )
        .unwrap();
        let a = grpo_clip_surrogate(&g, clip).unwrap();
        let b = discriminative_binary_empirical(&g, clip).unwrap();
        assert!((a - b).abs() < 1e-14, "{a} vs {b}");
    }

    #[test]
    fn contrastive_probability_values() {
        let cfg = ContrastConfig::new(1.0, 0.0).unwrap();
        let p = contrastive_probs(&[0.3], &[0.3, 0.3, 0.3], cfg).unwrap();
        assert!((p.pos[0] - 0.25).abs() < 1e-15);
        assert!(p.neg[0].iter().all(|x| (x - 0.25).abs() < 1e-15));
        let p = contrastive_probs(&[1.0], &[0.0], cfg).unwrap();
        assert!((p.pos[0] - 0.7310586).abs() < 1e-7);
        let mut last = 1.0;
        for m in [0.0, 0.5, 1.0, 5.0, 50.0] {
            let p = contrastive_probs(&[1.0], &[0.0], cfg.with_margin(m).unwrap()).unwrap();
            assert!(p.pos[0] < last);
            last = p.pos[0];
        }
        assert!(contrastive_probs(&[], &[0.0], cfg).is_err());
        assert!(contrastive_probs(&[0.0], &[], cfg).is_err());
    }

    #[test]
    fn infonce_values() {
        let v = infonce_objective(&[-1.0], &[-1.0, -1.0], 1.0).unwrap();
        assert!((v - (1.0f64 / 3.0).ln()).abs() < 1e-15);
        let near = infonce_objective(&[500.0], &[0.0], 1.0).unwrap();
        assert!(near <= 0.0 && near > -1e-100);
        let shifted = infonce_objective(&[-0.2, -1.5], &[-1.0, -0.4], 2.0).unwrap();
        let base = infonce_objective(&[-0.2 + 7.0, -1.5 + 7.0], &[-1.0 + 7.0, -0.4 + 7.0], 2.0).unwrap();
        assert!((shifted - base).abs() < 1e-12);
    }

    #[test]
    fn margin_values() {
        let pos = [-0.4, -1.2];
        let neg = [-0.9, -0.3, -2.0];
        let zero = conspo_objective(&pos, &neg, ContrastConfig::new(10.0, 0.0).unwrap()).unwrap();
        assert_eq!(zero.to_bits(), infonce_objective(&pos, &neg, 10.0).unwrap().to_bits());
        let v = conspo_objective(&[0.0], &[0.0], ContrastConfig::new(1.0, 3f64.ln()).unwrap()).unwrap();
        assert!((v - 0.25f64.ln()).abs() < 1e-15);
        let a = conspo_objective(&pos, &neg, ContrastConfig::new(10.0, 0.01).unwrap()).unwrap();
        let b = conspo_objective(&pos, &neg, ContrastConfig::new(10.0, 0.02).unwrap()).unwrap();
        assert!(zero > a && a > b);
    }

    #[test]
    fn config_validation() {
        assert!(ContrastConfig::new(0.0, 0.0).is_err());
        assert!(ContrastConfig::new(1.0, -0.1).is_err());
        assert_eq!("conspo".parse::<Algorithm>().unwrap(), Algorithm::Conspo);
        assert!("dapo".parse::<Algorithm>().is_err());
    }
}
