//! Tabular autoregressive softmax policy.
//!
//! The policy conditions each step on the query class and the last
//! `context_order` emitted tokens (left-padded with a begin sentinel). Content
//! tokens are `0..vocab_size`; the end-of-sequence outcome has id
//! `vocab_size`. Once `max_len` content tokens have been emitted, EOS is
//! forced with probability one and that step is not scored, so the sequence
//! space is finite and can be enumerated exactly.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};

/// A content token id in `0..vocab_size`.
pub type Token = usize;

/// Default upper bound on the number of sequences [`TabularPolicy::enumerate_sequences`] will visit.
pub const DEFAULT_ENUMERATION_CAP: usize = 1_000_000;

/// One scored generation step: the logit row it reads and the outcome it emitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Step {
    /// Offset of the first logit of the addressed row.
    pub row: usize,
    /// Emitted outcome, `vocab_size` for EOS.
    pub outcome: usize,
}

/// Order-k context-conditioned softmax logit table.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    vocab_size: usize,
    context_order: usize,
    max_len: usize,
    num_classes: usize,
    logits: Vec<f64>,
}

impl TabularPolicy {
    /// Uniform policy (all logits zero).
    pub fn uniform(
        vocab_size: usize,
        context_order: usize,
        max_len: usize,
        num_classes: usize,
    ) -> Result<Self> {
        if vocab_size == 0 {
            return Err(Error::domain("vocab_size must be positive"));
        }
        if num_classes == 0 {
            return Err(Error::domain("at least one query class is required"));
        }
        if max_len == 0 {
            return Err(Error::domain("max_len must be at least 1"));
        }
        let rows = (vocab_size + 1)
            .checked_pow(context_order as u32)
            .and_then(|c| c.checked_mul(num_classes))
            .ok_or_else(|| Error::domain("logit table too large"))?;
        Ok(Self {
            vocab_size,
            context_order,
            max_len,
            num_classes,
            logits: vec![0.0; rows * (vocab_size + 1)],
        })
    }

    /// Policy with logits drawn independently from `U[-scale, scale]`.
    pub fn random<R: Rng + ?Sized>(
        vocab_size: usize,
        context_order: usize,
        max_len: usize,
        num_classes: usize,
        scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut policy = Self::uniform(vocab_size, context_order, max_len, num_classes)?;
        for z in &mut policy.logits {
            *z = rng.gen_range(-scale..=scale);
        }
        Ok(policy)
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn eos_id(&self) -> usize {
        self.vocab_size
    }

    /// Sentinel filling context slots before the first emitted token.
    pub fn begin_id(&self) -> usize {
        self.vocab_size
    }

    pub fn context_order(&self) -> usize {
        self.context_order
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Number of outcomes per row (`vocab_size + 1`).
    pub fn num_outcomes(&self) -> usize {
        self.vocab_size + 1
    }

    fn contexts_per_class(&self) -> usize {
        self.num_outcomes().pow(self.context_order as u32)
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn logits_mut(&mut self) -> &mut [f64] {
        &mut self.logits
    }

    /// Whether two policies address identical table layouts.
    pub fn same_shape(&self, other: &Self) -> bool {
        self.vocab_size == other.vocab_size
            && self.context_order == other.context_order
            && self.max_len == other.max_len
            && self.num_classes == other.num_classes
    }

    /// The sentinel-padded trailing context of a prefix.
    pub fn context_of(&self, prefix: &[Token]) -> Vec<Token> {
        let k = self.context_order;
        let mut ctx = vec![self.begin_id(); k.saturating_sub(prefix.len())];
        ctx.extend_from_slice(&prefix[prefix.len().saturating_sub(k)..]);
        ctx
    }

    /// Offset of the logit row for `(query_class, context)`.
    pub fn row_offset(&self, query_class: usize, context: &[Token]) -> Result<usize> {
        if query_class >= self.num_classes {
            return Err(Error::domain(format!(
                "query class {query_class} out of range (have {})",
                self.num_classes
            )));
        }
        if context.len() != self.context_order {
            return Err(Error::domain(format!(
                "context has length {}, expected {}",
                context.len(),
                self.context_order
            )));
        }
        let base = self.num_outcomes();
        let mut idx = 0usize;
        for &c in context {
            if c > self.begin_id() {
                return Err(Error::domain(format!("context entry {c} out of range")));
            }
            idx = idx * base + c;
        }
        Ok((query_class * self.contexts_per_class() + idx) * base)
    }

    fn row(&self, offset: usize) -> &[f64] {
        &self.logits[offset..offset + self.num_outcomes()]
    }

    /// Softmax of the logit row starting at `offset`.
    pub fn row_probs(&self, offset: usize) -> Vec<f64> {
        softmax(self.row(offset))
    }

    /// Log-softmax of the logit row starting at `offset`.
    pub fn row_log_probs(&self, offset: usize) -> Vec<f64> {
        log_softmax(self.row(offset))
    }

    /// Next-outcome distribution over `vocab_size + 1` outcomes.
    ///
    /// At `position == max_len` the distribution is a point mass on EOS.
    pub fn token_distribution(
        &self,
        query_class: usize,
        context: &[Token],
        position: usize,
    ) -> Result<Vec<f64>> {
        let offset = self.row_offset(query_class, context)?;
        if position > self.max_len {
            return Err(Error::domain(format!(
                "position {position} beyond max_len {}",
                self.max_len
            )));
        }
        if position == self.max_len {
            let mut forced = vec![0.0; self.num_outcomes()];
            forced[self.eos_id()] = 1.0;
            return Ok(forced);
        }
        Ok(self.row_probs(offset))
    }

    /// The scored steps of a rollout: every content token, plus the EOS step
    /// unless termination was forced at `max_len`.
    pub fn steps(&self, query_class: usize, tokens: &[Token]) -> Result<Vec<Step>> {
        if tokens.len() > self.max_len {
            return Err(Error::domain(format!(
                "rollout length {} exceeds max_len {}",
                tokens.len(),
                self.max_len
            )));
        }
        if let Some(&bad) = tokens.iter().find(|&&t| t >= self.vocab_size) {
            return Err(Error::domain(format!("token {bad} out of vocabulary")));
        }
        let mut steps = Vec::with_capacity(tokens.len() + 1);
        for t in 0..=tokens.len() {
            if t == self.max_len {
                break;
            }
            let row = self.row_offset(query_class, &self.context_of(&tokens[..t]))?;
            let outcome = tokens.get(t).copied().unwrap_or(self.eos_id());
            steps.push(Step { row, outcome });
        }
        Ok(steps)
    }

    /// Per-step log-probabilities aligned with [`Self::steps`].
    pub fn step_logprobs(&self, query_class: usize, tokens: &[Token]) -> Result<Vec<f64>> {
        Ok(self
            .steps(query_class, tokens)?
            .iter()
            .map(|s| log_softmax_at(self.row(s.row), s.outcome))
            .collect())
    }

    /// Total log-probability of a rollout in nats.
    pub fn sequence_logprob(&self, query_class: usize, tokens: &[Token]) -> Result<f64> {
        Ok(self.step_logprobs(query_class, tokens)?.iter().sum())
    }

    /// Draw a rollout by ancestral sampling.
    pub fn sample_rollout<R: Rng + ?Sized>(
        &self,
        query_class: usize,
        rng: &mut R,
    ) -> Result<Vec<Token>> {
        let mut tokens = Vec::with_capacity(self.max_len);
        while tokens.len() < self.max_len {
            let offset = self.row_offset(query_class, &self.context_of(&tokens))?;
            let probs = self.row_probs(offset);
            let outcome = sample_index(&probs, rng);
            if outcome == self.eos_id() {
                break;
            }
            tokens.push(outcome);
        }
        Ok(tokens)
    }

    /// Number of sequences of length `0..=max_len`.
    pub fn sequence_count(&self) -> u128 {
        let v = self.vocab_size as u128;
        let mut total = 0u128;
        let mut level = 1u128;
        for _ in 0..=self.max_len {
            total = total.saturating_add(level);
            level = level.saturating_mul(v);
        }
        total
    }

    /// Every sequence with its exact probability, in depth-first order
    /// (shorter prefixes first, then lexicographic).
    pub fn enumerate_sequences(
        &self,
        query_class: usize,
        cap: usize,
    ) -> Result<Vec<(Vec<Token>, f64)>> {
        let requested = self.sequence_count();
        if requested > cap as u128 {
            return Err(Error::Size { requested, cap });
        }
        self.row_offset(query_class, &self.context_of(&[]))?;
        let mut out = Vec::with_capacity(requested as usize);
        let mut prefix = Vec::with_capacity(self.max_len);
        self.enumerate_from(query_class, &mut prefix, 1.0, &mut out)?;
        Ok(out)
    }

    fn enumerate_from(
        &self,
        query_class: usize,
        prefix: &mut Vec<Token>,
        prob: f64,
        out: &mut Vec<(Vec<Token>, f64)>,
    ) -> Result<()> {
        if prefix.len() == self.max_len {
            out.push((prefix.clone(), prob));
            return Ok(());
        }
        let offset = self.row_offset(query_class, &self.context_of(prefix))?;
        let probs = self.row_probs(offset);
        out.push((prefix.clone(), prob * probs[self.eos_id()]));
        for token in 0..self.vocab_size {
            prefix.push(token);
            self.enumerate_from(query_class, prefix, prob * probs[token], out)?;
            prefix.pop();
        }
        Ok(())
    }

    /// Gradient of the sequence log-probability with respect to the logits:
    /// `sum_t [1(o_t = v) - pi(v | ctx_t)]` at each visited row.
    pub fn logprob_param_grad(&self, query_class: usize, tokens: &[Token]) -> Result<LogitGrad> {
        let mut grad = LogitGrad::default();
        for step in self.steps(query_class, tokens)? {
            self.add_step_grad(step, 1.0, &mut grad);
        }
        Ok(grad)
    }

    /// Accumulate `scale * d log pi(outcome | row) / d logits` into `grad`.
    pub fn add_step_grad(&self, step: Step, scale: f64, grad: &mut LogitGrad) {
        let probs = self.row_probs(step.row);
        for (v, p) in probs.iter().enumerate() {
            let indicator = if v == step.outcome { 1.0 } else { 0.0 };
            grad.add(step.row + v, scale * (indicator - p));
        }
    }

    /// Mean over visited scored steps of the exact per-context
    /// KL(self || reference) over the full outcome support.
    pub fn kl_to_reference<'a, I>(&self, reference: &Self, visits: I) -> Result<f64>
    where
        I: IntoIterator<Item = (usize, &'a [Token])>,
    {
        Ok(self.kl_with_grad(reference, visits, false)?.0)
    }

    /// KL penalty together with its gradient with respect to `self`'s logits.
    pub fn kl_to_reference_grad<'a, I>(&self, reference: &Self, visits: I) -> Result<(f64, LogitGrad)>
    where
        I: IntoIterator<Item = (usize, &'a [Token])>,
    {
        self.kl_with_grad(reference, visits, true)
    }

    fn kl_with_grad<'a, I>(
        &self,
        reference: &Self,
        visits: I,
        want_grad: bool,
    ) -> Result<(f64, LogitGrad)>
    where
        I: IntoIterator<Item = (usize, &'a [Token])>,
    {
        if !self.same_shape(reference) {
            return Err(Error::domain("policy and reference tables differ in shape"));
        }
        let mut grad = LogitGrad::default();
        let mut total = 0.0;
        let mut count = 0usize;
        for (class, tokens) in visits {
            for step in self.steps(class, tokens)? {
                let lp = self.row_log_probs(step.row);
                let lq = reference.row_log_probs(step.row);
                let kl: f64 = lp
                    .iter()
                    .zip(&lq)
                    .map(|(a, b)| a.exp() * (a - b))
                    .sum();
                total += kl;
                count += 1;
                if want_grad {
                    for v in 0..lp.len() {
                        grad.add(step.row + v, lp[v].exp() * (lp[v] - lq[v] - kl));
                    }
                }
            }
        }
        if count == 0 {
            return Ok((0.0, grad));
        }
        let n = count as f64;
        grad.scale(1.0 / n);
        Ok((total / n, grad))
    }

    /// `logits += step * grad`.
    pub fn apply_gradient(&mut self, grad: &LogitGrad, step: f64) {
        for (&idx, &g) in grad.iter() {
            self.logits[idx] += step * g;
        }
    }
}

/// Sparse gradient over a policy's flat logit table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LogitGrad {
    entries: BTreeMap<usize, f64>,
}

impl LogitGrad {
    pub fn add(&mut self, index: usize, value: f64) {
        *self.entries.entry(index).or_insert(0.0) += value;
    }

    pub fn add_scaled(&mut self, other: &LogitGrad, scale: f64) {
        for (&i, &g) in &other.entries {
            self.add(i, scale * g);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.entries.values_mut() {
            *g *= factor;
        }
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries.get(&index).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&usize, &f64)> {
        self.entries.iter()
    }

    /// Indices with a stored entry (the logits the computation touched).
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.values().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.values().fold(0.0, |m, g| m.max(g.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.entries.values().all(|g| g.is_finite())
    }

    pub fn to_dense(&self, len: usize) -> Vec<f64> {
        let mut dense = vec![0.0; len];
        for (&i, &g) in &self.entries {
            dense[i] = g;
        }
        dense
    }
}

pub(crate) fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub(crate) fn log_softmax(z: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(z);
    z.iter().map(|v| v - lse).collect()
}

fn log_softmax_at(z: &[f64], i: usize) -> f64 {
    z[i] - log_sum_exp(z)
}

pub(crate) fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn set_row(policy: &mut TabularPolicy, class: usize, ctx: &[Token], values: &[f64]) {
        let off = policy.row_offset(class, ctx).unwrap();
        policy.logits_mut()[off..off + values.len()].copy_from_slice(values);
    }

    #[test]
    fn uniform_distribution() {
        let p = TabularPolicy::uniform(4, 1, 4, 1).unwrap();
        let d = p.token_distribution(0, &[4], 0).unwrap();
        assert_eq!(d.len(), 5);
        for x in d {
            assert!((x - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn degenerate_softmax() {
        let mut p = TabularPolicy::uniform(4, 1, 4, 1).unwrap();
        set_row(&mut p, 0, &[4], &[0.0, 0.0, 30.0, 0.0, 0.0]);
        let d = p.token_distribution(0, &[4], 0).unwrap();
        assert!(d[2] >= 1.0 - 1e-12);
    }

    #[test]
    fn forced_eos_at_max_len() {
        let p = TabularPolicy::uniform(4, 1, 4, 1).unwrap();
        let d = p.token_distribution(0, &[1], 4).unwrap();
        assert_eq!(d[4], 1.0);
        assert_eq!(d[..4].iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn malformed_inputs_are_domain_errors() {
        let p = TabularPolicy::uniform(4, 1, 4, 2).unwrap();
        assert!(matches!(p.token_distribution(2, &[4], 0), Err(Error::Domain(_))));
        assert!(matches!(p.token_distribution(0, &[4, 4], 0), Err(Error::Domain(_))));
        assert!(matches!(p.token_distribution(0, &[5], 0), Err(Error::Domain(_))));
        assert!(matches!(p.sequence_logprob(0, &[4]), Err(Error::Domain(_))));
        assert!(matches!(p.sequence_logprob(0, &[0; 5]), Err(Error::Domain(_))));
    }

    #[test]
    fn uniform_sequence_logprobs() {
        let p = TabularPolicy::uniform(4, 1, 4, 1).unwrap();
        let lp = p.sequence_logprob(0, &[1, 3]).unwrap();
        assert!((lp - 3.0 * 0.2f64.ln()).abs() < 1e-12);
        assert!((lp + 4.82831).abs() < 1e-5);
        let empty = p.sequence_logprob(0, &[]).unwrap();
        assert!((empty + 1.60944).abs() < 1e-5);
        // Full-length rollouts carry no EOS term.
        let full = p.sequence_logprob(0, &[0, 1, 2, 3]).unwrap();
        assert!((full - 4.0 * 0.2f64.ln()).abs() < 1e-12);
        assert_eq!(p.steps(0, &[0, 1, 2, 3]).unwrap().len(), 4);
        assert_eq!(p.steps(0, &[]).unwrap().len(), 1);
    }

    #[test]
    fn context_padding() {
        let p = TabularPolicy::uniform(3, 2, 4, 1).unwrap();
        assert_eq!(p.context_of(&[]), vec![3, 3]);
        assert_eq!(p.context_of(&[1]), vec![3, 1]);
        assert_eq!(p.context_of(&[0, 1, 2]), vec![1, 2]);
        let p0 = TabularPolicy::uniform(3, 0, 4, 1).unwrap();
        assert!(p0.context_of(&[1, 2]).is_empty());
    }

    #[test]
    fn enumeration_counts_and_mass() {
        let p = TabularPolicy::uniform(2, 1, 2, 1).unwrap();
        assert_eq!(p.enumerate_sequences(0, DEFAULT_ENUMERATION_CAP).unwrap().len(), 7);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = TabularPolicy::random(4, 1, 4, 2, 2.0, &mut rng).unwrap();
        let seqs = p.enumerate_sequences(1, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(seqs.len(), 341);
        let total: f64 = seqs.iter().map(|(_, q)| q).sum();
        assert!((total - 1.0).abs() < 1e-10);
        assert!(matches!(p.enumerate_sequences(0, 100), Err(Error::Size { requested: 341, cap: 100 })));
    }

    #[test]
    fn enumeration_probabilities_match_logprob() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = TabularPolicy::random(3, 2, 3, 1, 2.0, &mut rng).unwrap();
        for (seq, q) in p.enumerate_sequences(0, DEFAULT_ENUMERATION_CAP).unwrap() {
            let lp = p.sequence_logprob(0, &seq).unwrap();
            assert!((lp.exp() - q).abs() < 1e-14);
        }
    }

    #[test]
    fn degenerate_samplers() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = TabularPolicy::uniform(3, 1, 3, 1).unwrap();
        for ctx in 0..=3 {
            set_row(&mut p, 0, &[ctx], &[0.0, 30.0, 0.0, 0.0]);
        }
        assert_eq!(p.sample_rollout(0, &mut rng).unwrap(), vec![1, 1, 1]);
        let mut q = TabularPolicy::uniform(3, 1, 3, 1).unwrap();
        set_row(&mut q, 0, &[3], &[0.0, 0.0, 0.0, 30.0]);
        assert!(q.sample_rollout(0, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let p = TabularPolicy::uniform(4, 1, 4, 1).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20)
                .map(|_| p.sample_rollout(0, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(17), draw(17));
        assert_ne!(draw(17), draw(18));
    }

    #[test]
    fn binary_softmax_gradient() {
        // V = 1: outcomes are token 0 and EOS.
        let p = TabularPolicy::uniform(1, 0, 1, 1).unwrap();
        let g = p.logprob_param_grad(0, &[0]).unwrap();
        assert_eq!(g.get(0), 0.5);
        assert_eq!(g.get(1), -0.5);
    }

    #[test]
    fn degenerate_gradient_vanishes() {
        let mut p = TabularPolicy::uniform(4, 0, 1, 1).unwrap();
        set_row(&mut p, 0, &[], &[0.0, 0.0, 30.0, 0.0, 0.0]);
        let g = p.logprob_param_grad(0, &[2]).unwrap();
        assert!(g.max_abs() <= 1e-12);
    }

    #[test]
    fn kl_values() {
        let p = TabularPolicy::uniform(1, 0, 1, 1).unwrap();
        let mut q = p.clone();
        assert_eq!(p.kl_to_reference(&q, [(0, &[][..])]).unwrap(), 0.0);
        // logits (ln 3, 0) give (0.75, 0.25).
        q.logits_mut()[0] = 3f64.ln();
        let kl = q.kl_to_reference(&p, [(0, &[][..])]).unwrap();
        assert!((kl - 0.130812).abs() < 1e-6);
        let other = TabularPolicy::uniform(2, 0, 1, 1).unwrap();
        assert!(q.kl_to_reference(&other, [(0, &[][..])]).is_err());
    }
}
