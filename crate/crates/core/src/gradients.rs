//! Analytic gradients and a finite-difference oracle.
//!
//! Score-space gradients give the credit each rollout receives. The chain
//! to logits goes through `d log pi(o_t | ctx_t) / d z = e_{o_t} - pi(. | ctx_t)`.
//! At a clip boundary the flat branch is taken: a token contributes to
//! `s_plus` only when `rho < 1 + eps` and to `s_minus` only when
//! `rho > 1 - eps`.

use crate::error::{Error, Result};
use crate::objectives::{contrastive_probs, likelihood_split, Algorithm, ContrastConfig, ObjectiveConfig};
use crate::objectives::batch_visits;
use crate::policy::{LogitGrad, TabularPolicy};
use crate::rollouts::{Group, Rollout};
use crate::scores::{ClipConfig, ScoreKind};

/// Derivatives of a group objective with respect to each positive and each
/// negative rollout score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreGrads {
    pub pos: Vec<f64>,
    pub neg: Vec<f64>,
}

impl ScoreGrads {
    /// `sum(pos) + sum(neg)`.
    pub fn total(&self) -> f64 {
        self.pos.iter().sum::<f64>() + self.neg.iter().sum::<f64>()
    }
}

/// Score gradients of the empirical binary discriminative objective:
/// `+sqrt(p(1-p)) / N+` per positive and `-sqrt(p(1-p)) / N-` per negative.
pub fn grpo_score_grads_from_counts(n_pos: usize, n_neg: usize) -> Result<ScoreGrads> {
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Degenerate("group lacks positives or negatives".into()));
    }
    let total = (n_pos + n_neg) as f64;
    let p = n_pos as f64 / total;
    let w = (p * (1.0 - p)).sqrt();
    Ok(ScoreGrads {
        pos: vec![w / n_pos as f64; n_pos],
        neg: vec![-w / n_neg as f64; n_neg],
    })
}

pub fn grpo_score_grads(group: &Group) -> Result<ScoreGrads> {
    if !group.is_valid() {
        return Err(Error::Degenerate(format!(
            "group for query {} is not valid",
            group.query_class
        )));
    }
    grpo_score_grads_from_counts(group.n_pos(), group.n_neg())
}

/// Score gradients of the contrastive objective:
/// `(1 - P_i+) / N+` per positive, `-(1/N+) sum_i P_ij-` per negative.
pub fn conspo_score_grads(
    pos_scores: &[f64],
    neg_scores: &[f64],
    config: ContrastConfig,
) -> Result<ScoreGrads> {
    let probs = contrastive_probs(pos_scores, neg_scores, config)?;
    let n_pos = pos_scores.len() as f64;
    let pos = probs.pos.iter().map(|p| (1.0 - p) / n_pos).collect();
    let neg = (0..neg_scores.len())
        .map(|j| -probs.neg.iter().map(|row| row[j]).sum::<f64>() / n_pos)
        .collect();
    Ok(ScoreGrads { pos, neg })
}

/// Gradient of one rollout score with respect to `policy`'s logits, with the
/// rollout's `logp_old` as the importance denominator.
pub fn score_param_grad(
    policy: &TabularPolicy,
    query_class: usize,
    rollout: &Rollout,
    kind: ScoreKind,
    clip: ClipConfig,
) -> Result<LogitGrad> {
    let mut grad = LogitGrad::default();
    add_score_param_grad(policy, query_class, rollout, kind, clip, 1.0, &mut grad)?;
    Ok(grad)
}

fn add_score_param_grad(
    policy: &TabularPolicy,
    query_class: usize,
    rollout: &Rollout,
    kind: ScoreKind,
    clip: ClipConfig,
    scale: f64,
    grad: &mut LogitGrad,
) -> Result<()> {
    let steps = policy.steps(query_class, &rollout.tokens)?;
    if steps.len() != rollout.len() {
        return Err(Error::domain("rollout log-probs do not match its tokens"));
    }
    let norm = scale / steps.len() as f64;
    match kind {
        ScoreKind::Like => {
            for step in steps {
                policy.add_step_grad(step, norm, grad);
            }
        }
        ScoreKind::Plus | ScoreKind::Minus => {
            let logp = policy.step_logprobs(query_class, &rollout.tokens)?;
            for ((step, lp), lo) in steps.into_iter().zip(logp).zip(&rollout.logp_old) {
                let rho = (lp - lo).exp();
                let active = match kind {
                    ScoreKind::Plus => rho < clip.upper(),
                    _ => rho > clip.lower(),
                };
                if active {
                    policy.add_step_grad(step, norm * rho, grad);
                }
            }
        }
    }
    Ok(())
}

/// Exact gradient of one group's token-level clipped surrogate.
fn add_grpo_group_grad(
    policy: &TabularPolicy,
    group: &Group,
    clip: ClipConfig,
    scale: f64,
    grad: &mut LogitGrad,
) -> Result<()> {
    if group.stats.degenerate {
        return Err(Error::Degenerate(format!(
            "group for query {} has zero reward spread",
            group.query_class
        )));
    }
    let g = group.size() as f64;
    for (rollout, &adv) in group.rollouts.iter().zip(&group.stats.advantages) {
        // d/d rho of min(rho A, clip(rho) A): A on the unclipped side, else 0.
        let kind = if adv > 0.0 {
            ScoreKind::Plus
        } else if adv < 0.0 {
            ScoreKind::Minus
        } else {
            continue;
        };
        add_score_param_grad(policy, group.query_class, rollout, kind, clip, scale * adv / g, grad)?;
    }
    Ok(())
}

/// GRPO group gradient assembled from score-space credit and score
/// gradients. Agrees with the token-level gradient on binary groups.
pub fn grpo_group_grad_via_scores(
    policy: &TabularPolicy,
    group: &Group,
    clip: ClipConfig,
) -> Result<LogitGrad> {
    let credit = grpo_score_grads(group)?;
    let mut grad = LogitGrad::default();
    for (i, c) in group.positive_indices().into_iter().zip(&credit.pos) {
        add_score_param_grad(policy, group.query_class, &group.rollouts[i], ScoreKind::Plus, clip, *c, &mut grad)?;
    }
    for (j, c) in group.negative_indices().into_iter().zip(&credit.neg) {
        add_score_param_grad(policy, group.query_class, &group.rollouts[j], ScoreKind::Minus, clip, *c, &mut grad)?;
    }
    Ok(grad)
}

fn add_conspo_group_grad(
    policy: &TabularPolicy,
    group: &Group,
    contrast: ContrastConfig,
    scale: f64,
    grad: &mut LogitGrad,
) -> Result<()> {
    let (pos, neg) = likelihood_split(group)?;
    let credit = conspo_score_grads(&pos, &neg, contrast)?;
    let clip = ClipConfig::default();
    let sides = [
        (group.positive_indices(), &credit.pos),
        (group.negative_indices(), &credit.neg),
    ];
    for (indices, coefs) in sides {
        for (i, c) in indices.into_iter().zip(coefs) {
            add_score_param_grad(policy, group.query_class, &group.rollouts[i], ScoreKind::Like, clip, scale * c, grad)?;
        }
    }
    Ok(())
}

/// Gradient of [`crate::objectives::batch_objective`] with respect to the
/// logits of `policy`.
pub fn objective_param_grad(
    policy: &TabularPolicy,
    groups: &[Group],
    config: &ObjectiveConfig,
    reference: &TabularPolicy,
) -> Result<LogitGrad> {
    if groups.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let scale = 1.0 / groups.len() as f64;
    let mut grad = LogitGrad::default();
    for group in groups {
        match config.algorithm {
            Algorithm::Grpo => {
                // The token-level path needs logp_cur only through the ratio,
                // which add_score_param_grad recomputes from `policy`.
                add_grpo_group_grad(policy, group, config.clip, scale, &mut grad)?
            }
            Algorithm::Conspo => {
                let mut refreshed = group.clone();
                refreshed.refresh(policy)?;
                add_conspo_group_grad(policy, &refreshed, config.contrast, scale, &mut grad)?
            }
        }
    }
    if config.beta != 0.0 {
        let (_, kl_grad) = policy.kl_to_reference_grad(reference, batch_visits(groups))?;
        grad.add_scaled(&kl_grad, -config.beta);
    }
    Ok(grad)
}

/// Central finite differences of `objective` at each logit in `indices`.
pub fn finite_diff_oracle<F>(
    mut objective: F,
    policy: &TabularPolicy,
    indices: impl IntoIterator<Item = usize>,
    h: f64,
) -> Result<LogitGrad>
where
    F: FnMut(&TabularPolicy) -> Result<f64>,
{
    if !(1e-7..=1e-4).contains(&h) {
        return Err(Error::domain(format!("step {h} outside [1e-7, 1e-4]")));
    }
    let mut probe = policy.clone();
    let mut grad = LogitGrad::default();
    for i in indices {
        let z = policy.logits()[i];
        probe.logits_mut()[i] = z + h;
        let up = objective(&probe)?;
        probe.logits_mut()[i] = z - h;
        let down = objective(&probe)?;
        probe.logits_mut()[i] = z;
        grad.add(i, (up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// Central finite differences of a function of positive and negative scores.
pub fn finite_diff_scores<F>(mut objective: F, pos: &[f64], neg: &[f64], h: f64) -> Result<ScoreGrads>
where
    F: FnMut(&[f64], &[f64]) -> Result<f64>,
{
    let mut p = pos.to_vec();
    let mut n = neg.to_vec();
    let mut gp = Vec::with_capacity(pos.len());
    for i in 0..pos.len() {
        p[i] = pos[i] + h;
        let up = objective(&p, &n)?;
        p[i] = pos[i] - h;
        let down = objective(&p, &n)?;
        p[i] = pos[i];
        gp.push((up - down) / (2.0 * h));
    }
    let mut gn = Vec::with_capacity(neg.len());
    for j in 0..neg.len() {
        n[j] = neg[j] + h;
        let up = objective(&p, &n)?;
        n[j] = neg[j] - h;
        let down = objective(&p, &n)?;
        n[j] = neg[j];
        gn.push((up - down) / (2.0 * h));
    }
    Ok(ScoreGrads { pos: gp, neg: gn })
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Max-norm relative error between two logit gradients:
/// `max_i |a_i - b_i| / max(max_i |a_i|, max_i |b_i|)`.
pub fn grad_relative_error(a: &LogitGrad, b: &LogitGrad) -> f64 {
    let mut diff = 0.0f64;
    for i in a.indices().chain(b.indices()) {
        diff = diff.max((a.get(i) - b.get(i)).abs());
    }
    let scale = a.max_abs().max(b.max_abs());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}
