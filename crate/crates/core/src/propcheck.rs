//! Randomized numeric checks of the identities the objectives rely on.
//!
//! Every check draws its instances from a seeded stream, measures the worst
//! deviation over all trials and compares it against a fixed tolerance.
//! Instances whose premise fails (zero reward variance, no valid group) are
//! counted as skipped, never as failures.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::advantage::{binary_weight, AdvantageDecomposition};
use crate::error::{Error, Result};
use crate::gradients::{
    conspo_score_grads, finite_diff_oracle, finite_diff_scores, grad_relative_error,
    grpo_score_grads_from_counts, objective_param_grad, relative_error,
};
use crate::objectives::{
    batch_objective, clip_identity_check, conspo_objective, discriminative_binary,
    discriminative_binary_from_scores, discriminative_general, expected_clip_surrogate,
    scored_rollout, Algorithm, ContrastConfig, ObjectiveConfig,
};
use crate::policy::{TabularPolicy, DEFAULT_ENUMERATION_CAP};
use crate::rollouts::{collect_group, filter_valid, Group};
use crate::schedule::MarginSchedule;
use crate::scores::{clipped_neg_score, clipped_pos_score, token_ratios, ClipConfig};
use crate::tasks::{Task, TaskKind};

/// Floor on the denominator of score-space relative errors.
pub const REL_FLOOR: f64 = 1e-8;
/// Finite-difference step in score space.
pub const SCORE_STEP: f64 = 1e-6;
/// Finite-difference step in logit space.
pub const LOGIT_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Abs,
    Rel,
    /// Number of violated conditions.
    Count,
}

impl Metric {
    fn as_str(self) -> &'static str {
        match self {
            Metric::Abs => "abs",
            Metric::Rel => "rel",
            Metric::Count => "count",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub trials: usize,
    pub skipped: usize,
    pub max_abs: f64,
    pub max_rel: f64,
    /// Violations for [`Metric::Count`] checks.
    pub violations: usize,
    pub metric: Metric,
    pub tolerance: f64,
    pub pass: bool,
    pub seed: u64,
}

impl CheckReport {
    /// The deviation compared against the tolerance.
    pub fn deviation(&self) -> f64 {
        match self.metric {
            Metric::Abs => self.max_abs,
            Metric::Rel => self.max_rel,
            Metric::Count => self.violations as f64,
        }
    }

    /// Re-evaluate the pass flag under a different tolerance.
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self.pass = self.deviation() <= tolerance && self.deviation().is_finite();
        self
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} check={} trials={} skipped={} max_abs={:.3e} max_rel={:.3e} violations={} metric={} tolerance={:e} seed={}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.trials,
            self.skipped,
            self.max_abs,
            self.max_rel,
            self.violations,
            self.metric.as_str(),
            self.tolerance,
            self.seed
        )
    }
}

struct Tracker {
    name: &'static str,
    metric: Metric,
    tolerance: f64,
    trials: usize,
    skipped: usize,
    max_abs: f64,
    max_rel: f64,
    violations: usize,
}

impl Tracker {
    fn new(name: &'static str, metric: Metric, tolerance: f64) -> Self {
        Self {
            name,
            metric,
            tolerance,
            trials: 0,
            skipped: 0,
            max_abs: 0.0,
            max_rel: 0.0,
            violations: 0,
        }
    }

    /// Record a comparison of `value` against `expected`.
    fn compare(&mut self, value: f64, expected: f64) {
        let abs = (value - expected).abs();
        self.observe(abs, relative_error(value, expected, REL_FLOOR));
    }

    fn observe(&mut self, abs: f64, rel: f64) {
        self.trials += 1;
        // NaN propagates to a failing report.
        self.max_abs = if abs.is_nan() { f64::NAN } else { self.max_abs.max(abs) };
        self.max_rel = if rel.is_nan() { f64::NAN } else { self.max_rel.max(rel) };
    }

    fn condition(&mut self, holds: bool) {
        self.trials += 1;
        if !holds {
            self.violations += 1;
        }
    }

    fn skip(&mut self) {
        self.skipped += 1;
    }

    fn finish(self, seed: u64) -> CheckReport {
        let report = CheckReport {
            name: self.name.to_string(),
            trials: self.trials,
            skipped: self.skipped,
            max_abs: self.max_abs,
            max_rel: self.max_rel,
            violations: self.violations,
            metric: self.metric,
            tolerance: self.tolerance,
            pass: false,
            seed,
        };
        report.with_tolerance(self.tolerance)
    }
}

fn check_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Random `(current, old)` pair with logits in `[-2, 2]`. The current policy
/// equals the old one for `scale == 0`, otherwise it is perturbed.
fn random_pair(
    rng: &mut ChaCha8Rng,
    vocab: usize,
    order: usize,
    max_len: usize,
    classes: usize,
    scale: f64,
) -> Result<(TabularPolicy, TabularPolicy)> {
    let old = TabularPolicy::random(vocab, order, max_len, classes, 2.0, rng)?;
    let mut cur = old.clone();
    if scale > 0.0 {
        for z in cur.logits_mut() {
            *z += rng.gen_range(-scale..=scale);
        }
    }
    Ok((cur, old))
}

/// Reward schemes for exact-enumeration checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scheme {
    Graded,
    BinaryRandom,
    BinaryVerifier,
}

fn draw_rewards(
    rng: &mut ChaCha8Rng,
    scheme: Scheme,
    enumeration: &[(Vec<usize>, f64)],
    vocab: usize,
) -> Result<Vec<f64>> {
    Ok(match scheme {
        Scheme::Graded => enumeration
            .iter()
            .map(|_| *[0.0, 0.5, 1.0].choose(rng).unwrap())
            .collect(),
        Scheme::BinaryRandom => enumeration
            .iter()
            .map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 })
            .collect(),
        Scheme::BinaryVerifier => {
            let task = Task::new(TaskKind::SumMod, vocab, vec![rng.gen_range(0..vocab)])?;
            enumeration.iter().map(|(s, _)| task.verify(0, s)).collect()
        }
    })
}

/// Expectation-form clipped surrogate against its discriminative forms.
pub fn check_proposition1(trials: usize, seed: u64) -> Result<Vec<CheckReport>> {
    let mut rng = check_rng(seed, 1);
    let clip = ClipConfig::default();
    let mut general = Tracker::new("proposition1.general", Metric::Abs, 1e-9);
    let mut half_abs = Tracker::new("proposition1.half_abs_weight", Metric::Abs, 1e-9);
    let mut binary = Tracker::new("proposition1.binary", Metric::Abs, 1e-9);
    let mut on_policy = Tracker::new("proposition1.on_policy", Metric::Abs, 1e-12);
    for trial in 0..trials {
        let vocab = rng.gen_range(2..=4);
        let max_len = rng.gen_range(1..=3);
        let order = rng.gen_range(0..=1);
        let scale = [0.0, 0.1, 0.5, 2.0][trial % 4];
        let (cur, old) = random_pair(&mut rng, vocab, order, max_len, 1, scale)?;
        let scheme = [Scheme::Graded, Scheme::BinaryRandom, Scheme::BinaryVerifier][trial % 3];
        let enumeration = old.enumerate_sequences(0, DEFAULT_ENUMERATION_CAP)?;
        let rewards = draw_rewards(&mut rng, scheme, &enumeration, vocab)?;
        let outcomes = enumeration
            .into_iter()
            .zip(rewards)
            .map(|((s, p), r)| (s, p, r))
            .collect();
        let decomposition = match AdvantageDecomposition::from_rewards(outcomes) {
            Ok(d) => d,
            Err(Error::Degenerate(_)) => {
                general.skip();
                continue;
            }
            Err(e) => return Err(e),
        };
        let expectation = expected_clip_surrogate(&cur, &old, 0, &decomposition, clip)?;
        let s_plus = |o: &_| clipped_pos_score(&scored_rollout(&cur, &old, 0, o)?, clip);
        let s_minus = |o: &_| clipped_neg_score(&scored_rollout(&cur, &old, 0, o)?, clip);
        let form = discriminative_general(&decomposition, s_plus, s_minus)?;
        general.compare(form.via_weight, expectation);
        half_abs.compare(form.via_half_abs, expectation);
        if scheme != Scheme::Graded {
            let value = discriminative_binary(&decomposition.outcomes, s_plus, s_minus)?;
            binary.compare(value, expectation);
        }
        if scale == 0.0 {
            on_policy.observe(expectation.abs().max(form.via_weight.abs()), 0.0);
        }
    }
    Ok(vec![
        general.finish(seed),
        half_abs.finish(seed),
        binary.finish(seed),
        on_policy.finish(seed),
    ])
}

/// Advantage reweighting and its binary specialization.
pub fn check_appendix_lemmas(trials: usize, seed: u64) -> Result<Vec<CheckReport>> {
    let mut rng = check_rng(seed, 2);
    let mut balance = Tracker::new("lemma3.weight_balance", Metric::Abs, 1e-12);
    let mut normalization = Tracker::new("lemma3.normalization", Metric::Abs, 1e-10);
    let mut weight = Tracker::new("lemma4.binary_weight", Metric::Abs, 1e-12);
    let mut conditionals = Tracker::new("lemma4.conditionals_tv", Metric::Abs, 1e-10);
    for trial in 0..trials {
        let vocab = rng.gen_range(2..=4);
        let max_len = rng.gen_range(1..=3);
        let policy = TabularPolicy::random(vocab, 1, max_len, 1, 2.0, &mut rng)?;
        let enumeration = policy.enumerate_sequences(0, DEFAULT_ENUMERATION_CAP)?;
        let scheme = [Scheme::Graded, Scheme::BinaryRandom, Scheme::BinaryVerifier][trial % 3];
        let rewards = draw_rewards(&mut rng, scheme, &enumeration, vocab)?;
        let outcomes = enumeration
            .into_iter()
            .zip(rewards)
            .map(|((s, p), r)| (s, p, r))
            .collect();
        let d = match AdvantageDecomposition::from_rewards(outcomes) {
            Ok(d) => d,
            Err(Error::Degenerate(_)) => {
                balance.skip();
                continue;
            }
            Err(e) => return Err(e),
        };
        balance.observe(
            (d.weight - d.weight_neg)
                .abs()
                .max((d.weight - d.half_abs_advantage).abs()),
            0.0,
        );
        let pos_mass: f64 = d.pos_dist.iter().map(|(_, w)| w).sum();
        let neg_mass: f64 = d.neg_dist.iter().map(|(_, w)| w).sum();
        let overlap = d
            .pos_dist
            .iter()
            .any(|(i, _)| d.neg_dist.iter().any(|(j, _)| i == j));
        normalization.observe(
            if overlap {
                f64::INFINITY
            } else {
                (pos_mass - 1.0).abs().max((neg_mass - 1.0).abs())
            },
            0.0,
        );
        if scheme == Scheme::Graded {
            continue;
        }
        let p: f64 = d.outcomes.iter().filter(|o| o.reward == 1.0).map(|o| o.prob).sum();
        weight.compare(d.weight, binary_weight(p));
        let mut pos_cond = vec![0.0; d.outcomes.len()];
        let mut neg_cond = vec![0.0; d.outcomes.len()];
        for (i, o) in d.outcomes.iter().enumerate() {
            if o.reward == 1.0 {
                pos_cond[i] = o.prob / p;
            } else {
                neg_cond[i] = o.prob / (1.0 - p);
            }
        }
        let tv = |dist: &[(usize, f64)], cond: &[f64]| {
            let mut reweighted = vec![0.0; cond.len()];
            for &(i, w) in dist {
                reweighted[i] = w;
            }
            0.5 * reweighted
                .iter()
                .zip(cond)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
        };
        conditionals.observe(tv(&d.pos_dist, &pos_cond).max(tv(&d.neg_dist, &neg_cond)), 0.0);
    }
    Ok(vec![
        balance.finish(seed),
        normalization.finish(seed),
        weight.finish(seed),
        conditionals.finish(seed),
    ])
}

fn random_scores(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Score-space credit of the empirical binary discriminative objective.
pub fn check_lemma1(trials: usize, seed: u64) -> Result<Vec<CheckReport>> {
    let mut rng = check_rng(seed, 3);
    let mut fd = Tracker::new("lemma1.finite_difference", Metric::Rel, 1e-6);
    let mut uniform = Tracker::new("lemma1.uniformity", Metric::Count, 0.0);
    for _ in 0..trials {
        let n_pos = rng.gen_range(1..=8);
        let n_neg = rng.gen_range(1..=8);
        let pos = random_scores(&mut rng, n_pos, 0.5, 1.2);
        let neg = random_scores(&mut rng, n_neg, 0.8, 2.0);
        let analytic = grpo_score_grads_from_counts(n_pos, n_neg)?;
        let numeric = finite_diff_scores(discriminative_binary_from_scores, &pos, &neg, SCORE_STEP)?;
        let mut worst_abs = 0.0f64;
        let mut worst_rel = 0.0f64;
        for (a, n) in analytic.pos.iter().chain(&analytic.neg).zip(numeric.pos.iter().chain(&numeric.neg)) {
            worst_abs = worst_abs.max((a - n).abs());
            worst_rel = worst_rel.max(relative_error(*a, *n, REL_FLOOR));
        }
        fd.observe(worst_abs, worst_rel);
        let same = |v: &[f64]| v.iter().all(|x| x.to_bits() == v[0].to_bits());
        uniform.condition(same(&analytic.pos) && same(&analytic.neg));
    }
    Ok(vec![fd.finish(seed), uniform.finish(seed)])
}

/// Score-space credit of the margin-enhanced contrastive objective.
pub fn check_lemma2(trials: usize, seed: u64) -> Result<Vec<CheckReport>> {
    let mut rng = check_rng(seed, 4);
    let mut fd = Tracker::new("lemma2.finite_difference", Metric::Rel, 1e-6);
    let mut zero_sum = Tracker::new("lemma2.zero_sum", Metric::Abs, 1e-12);
    let mut aggregate = Tracker::new("lemma2.aggregate_negative", Metric::Abs, 1e-12);
    let mut ratio = Tracker::new("lemma2.hard_negative_ratio", Metric::Rel, 1e-9);
    let mut attenuation = Tracker::new("lemma2.positive_attenuation", Metric::Count, 0.0);
    let mut rows = Tracker::new("lemma2.probability_rows", Metric::Abs, 1e-12);
    for trial in 0..trials {
        let n_pos = rng.gen_range(1..=8);
        let n_neg = rng.gen_range(1..=8);
        let pos = random_scores(&mut rng, n_pos, -3.0, -0.05);
        let neg = random_scores(&mut rng, n_neg, -3.0, -0.05);
        let tau = [1.0, 2.0, 10.0][trial % 3];
        let margin = if trial % 2 == 0 { 0.0 } else { rng.gen_range(0.0..0.5) };
        let cfg = ContrastConfig::new(tau, margin)?;
        let g = conspo_score_grads(&pos, &neg, cfg)?;
        let numeric = finite_diff_scores(|p, n| conspo_objective(p, n, cfg), &pos, &neg, SCORE_STEP)?;
        let mut worst_abs = 0.0f64;
        let mut worst_rel = 0.0f64;
        for (a, n) in g.pos.iter().chain(&g.neg).zip(numeric.pos.iter().chain(&numeric.neg)) {
            worst_abs = worst_abs.max((a - n).abs());
            worst_rel = worst_rel.max(relative_error(*a, *n, REL_FLOOR));
        }
        fd.observe(worst_abs, worst_rel);
        zero_sum.observe(g.total().abs(), 0.0);

        let probs = crate::objectives::contrastive_probs(&pos, &neg, cfg)?;
        let expected_neg = -probs.pos.iter().map(|p| 1.0 - p).sum::<f64>() / n_pos as f64;
        aggregate.compare(g.neg.iter().sum::<f64>(), expected_neg);
        let row_dev = probs
            .pos
            .iter()
            .zip(&probs.neg)
            .map(|(p, row)| (p + row.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max);
        rows.observe(row_dev, 0.0);

        for j in 0..n_neg {
            for k in 0..n_neg {
                let observed = g.neg[j].abs() / g.neg[k].abs();
                let expected = ((neg[j] - neg[k]) / tau).exp();
                ratio.compare(observed, expected);
            }
        }

        let i = rng.gen_range(0..n_pos);
        let mut bumped = pos.clone();
        bumped[i] += 0.1;
        let after = conspo_score_grads(&bumped, &neg, cfg)?;
        attenuation.condition(after.pos[i] < g.pos[i]);
    }
    Ok(vec![
        fd.finish(seed),
        zero_sum.finish(seed),
        aggregate.finish(seed),
        ratio.finish(seed),
        attenuation.finish(seed),
        rows.finish(seed),
    ])
}

/// `min(rho A, clip(rho) A) == A+ min(rho, 1+eps) - A- max(rho, 1-eps)`.
pub fn check_clip_identity(trials: usize, seed: u64) -> Result<Vec<CheckReport>> {
    let mut rng = check_rng(seed, 5);
    let mut identity = Tracker::new("clip.identity", Metric::Abs, 1e-14);
    for _ in 0..trials {
        let clip = ClipConfig::new(rng.gen_range(0.01..0.99))?;
        let rho = rng.gen_range(0.0..3.0);
        let adv = rng.gen_range(-3.0..3.0);
        let (a, b) = clip_identity_check(rho, adv, clip);
        identity.compare(a, b);
    }
    Ok(vec![identity.finish(seed)])
}

/// Endpoint exactness and monotonicity of the margin schedule.
pub fn check_margin_schedule(target: f64, warmup_ratio: f64, total_steps: u64, seed: u64) -> Result<Vec<CheckReport>> {
    let schedule = MarginSchedule::new(target, warmup_ratio, total_steps)?;
    let mut endpoints = Tracker::new("schedule.endpoints", Metric::Count, 0.0);
    let mut monotone = Tracker::new("schedule.monotone", Metric::Count, 0.0);
    endpoints.condition(schedule.margin_at(0)?.to_bits() == 0f64.to_bits());
    let mut last = 0.0;
    for t in 0..=total_steps {
        let m = schedule.margin_at(t)?;
        if schedule.progress(t)? >= 1.0 {
            endpoints.condition(m.to_bits() == target.to_bits());
        }
        monotone.condition(m >= last && m <= target);
        last = m;
    }
    Ok(vec![endpoints.finish(seed), monotone.finish(seed)])
}

fn near_clip_boundary(groups: &[Group], policy: &TabularPolicy, clip: ClipConfig) -> Result<bool> {
    for g in groups {
        let mut g = g.clone();
        g.refresh(policy)?;
        for r in &g.rollouts {
            for rho in token_ratios(r)? {
                if (rho - clip.upper()).abs() < 1e-4 || (rho - clip.lower()).abs() < 1e-4 {
                    return Ok(true);
                }
            }
        }
    }
    Ok(false)
}

/// Analytic logit gradients of the batch objective against central finite
/// differences, for both algorithms, off-policy and with a KL term.
pub fn check_param_gradients(trials: usize, seed: u64) -> Result<Vec<CheckReport>> {
    let mut rng = check_rng(seed, 6);
    let mut grpo = Tracker::new("gradients.grpo", Metric::Rel, 1e-5);
    let mut conspo = Tracker::new("gradients.conspo", Metric::Rel, 1e-5);
    for trial in 0..trials {
        let vocab = rng.gen_range(2..=3);
        let max_len = rng.gen_range(2..=3);
        let order = rng.gen_range(0..=1);
        let kind = if trial % 3 == 2 { TaskKind::GradedLinear } else { TaskKind::SumMod };
        let targets = vec![rng.gen_range(0..vocab), rng.gen_range(0..vocab)];
        let task = Task::new(kind, vocab, targets)?;
        let (cur, old) = random_pair(&mut rng, vocab, order, max_len, 2, 0.4)?;
        let reference = TabularPolicy::random(vocab, order, max_len, 2, 1.0, &mut rng)?;
        let mut groups = Vec::new();
        for q in 0..4 {
            groups.push(collect_group(&old, &reference, &task, q % 2, 6, &mut rng)?);
        }
        let (valid, _) = filter_valid(groups);
        let beta = if trial % 2 == 0 { 0.0 } else { 0.1 };
        let tau = [1.0, 10.0][trial % 2];
        let margin = rng.gen_range(0.0..0.05);
        for algorithm in [Algorithm::Grpo, Algorithm::Conspo] {
            let tracker = match algorithm {
                Algorithm::Grpo => &mut grpo,
                Algorithm::Conspo => &mut conspo,
            };
            if valid.is_empty() {
                tracker.skip();
                continue;
            }
            let mut clip = ClipConfig::default();
            while near_clip_boundary(&valid, &cur, clip)? {
                clip = ClipConfig::new(clip.epsilon + 0.013)?;
            }
            let cfg = ObjectiveConfig {
                algorithm,
                clip,
                contrast: ContrastConfig::new(tau, margin)?,
                beta,
            };
            let analytic = objective_param_grad(&cur, &valid, &cfg, &reference)?;
            let numeric = finite_diff_oracle(
                |p| batch_objective(p, &valid, &cfg, &reference),
                &cur,
                0..cur.logits().len(),
                LOGIT_STEP,
            )?;
            let mut abs = 0.0f64;
            for i in 0..cur.logits().len() {
                abs = abs.max((analytic.get(i) - numeric.get(i)).abs());
            }
            tracker.observe(abs, grad_relative_error(&analytic, &numeric));
        }
    }
    Ok(vec![grpo.finish(seed), conspo.finish(seed)])
}

/// Trial counts used when none is given.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialCounts {
    pub proposition1: usize,
    pub appendix_lemmas: usize,
    pub lemma1: usize,
    pub lemma2: usize,
    pub clip_identity: usize,
    pub param_gradients: usize,
}

impl Default for TrialCounts {
    fn default() -> Self {
        Self {
            proposition1: 200,
            appendix_lemmas: 500,
            lemma1: 500,
            lemma2: 1000,
            clip_identity: 100_000,
            param_gradients: 50,
        }
    }
}

impl TrialCounts {
    pub fn uniform(n: usize) -> Self {
        Self {
            proposition1: n,
            appendix_lemmas: n,
            lemma1: n,
            lemma2: n,
            clip_identity: n,
            param_gradients: n,
        }
    }
}

/// Run every check. A `tolerance` override replaces each check's own.
pub fn run_all(counts: TrialCounts, seed: u64, tolerance: Option<f64>) -> Result<Vec<CheckReport>> {
    let mut reports = Vec::new();
    reports.extend(check_proposition1(counts.proposition1, seed)?);
    reports.extend(check_appendix_lemmas(counts.appendix_lemmas, seed)?);
    reports.extend(check_lemma1(counts.lemma1, seed)?);
    reports.extend(check_lemma2(counts.lemma2, seed)?);
    reports.extend(check_clip_identity(counts.clip_identity, seed)?);
    reports.extend(check_margin_schedule(0.01, 0.3, 1000, seed)?);
    reports.extend(check_param_gradients(counts.param_gradients, seed)?);
    if let Some(tol) = tolerance {
        reports = reports.into_iter().map(|r| r.with_tolerance(tol)).collect();
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes() {
        let reports = run_all(TrialCounts::uniform(12), 3, None).unwrap();
        for r in &reports {
            assert!(r.pass, "{r}");
        }
    }

    #[test]
    fn zero_tolerance_forces_failure() {
        let reports = run_all(TrialCounts::uniform(6), 3, Some(0.0)).unwrap();
        assert!(reports.iter().any(|r| !r.pass));
    }

    #[test]
    fn reports_are_seed_reproducible() {
        let a = check_lemma2(50, 11).unwrap();
        let b = check_lemma2(50, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|r| r.seed == 11));
    }

    #[test]
    fn nan_deviation_fails() {
        let mut t = Tracker::new("x", Metric::Abs, 1.0);
        t.observe(f64::NAN, 0.0);
        assert!(!t.finish(0).pass);
    }
}
