//! Synthetic verifiable tasks.
//!
//! Token value equals token id. Each query class carries a target value; the
//! verifier is a pure function of `(query_class, tokens)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::policy::{TabularPolicy, Token, DEFAULT_ENUMERATION_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    /// Reward 1 iff the token sum modulo `m` equals the target.
    SumMod,
    /// Reward 1 iff the first token equals the target.
    ConstantTarget,
    /// Reward `1 - |(sum mod m) - target| / m`.
    GradedLinear,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::SumMod => "sum_mod",
            TaskKind::ConstantTarget => "constant_target",
            TaskKind::GradedLinear => "graded_linear",
        }
    }

    /// Whether every reward is in `{0, 1}`.
    pub fn is_binary(self) -> bool {
        !matches!(self, TaskKind::GradedLinear)
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum_mod" => Ok(TaskKind::SumMod),
            "constant_target" => Ok(TaskKind::ConstantTarget),
            "graded_linear" => Ok(TaskKind::GradedLinear),
            other => Err(Error::domain(format!("unknown task kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    pub kind: TaskKind,
    pub modulus: usize,
    /// Target value of each query class, indexed by class.
    pub targets: Vec<usize>,
}

impl Task {
    pub fn new(kind: TaskKind, modulus: usize, targets: Vec<usize>) -> Result<Self> {
        if modulus == 0 {
            return Err(Error::domain("modulus must be positive"));
        }
        if targets.is_empty() {
            return Err(Error::domain("task needs at least one query class"));
        }
        if kind != TaskKind::ConstantTarget {
            if let Some(t) = targets.iter().find(|&&t| t >= modulus) {
                return Err(Error::domain(format!("target {t} not below modulus {modulus}")));
            }
        }
        Ok(Self {
            kind,
            modulus,
            targets,
        })
    }

    /// `sum_mod` with one query class per residue `0..modulus`.
    pub fn sum_mod(modulus: usize) -> Result<Self> {
        Self::new(TaskKind::SumMod, modulus, (0..modulus).collect())
    }

    pub fn num_classes(&self) -> usize {
        self.targets.len()
    }

    pub fn target(&self, query_class: usize) -> Result<usize> {
        self.targets.get(query_class).copied().ok_or_else(|| {
            Error::domain(format!("query class {query_class} not in task"))
        })
    }

    /// Deterministic reward in `[0, 1]`. Panics on an unknown query class;
    /// use [`Task::target`] to validate first.
    pub fn verify(&self, query_class: usize, tokens: &[Token]) -> f64 {
        let target = self.targets[query_class];
        let m = self.modulus;
        match self.kind {
            TaskKind::SumMod => {
                let residue = tokens.iter().fold(0, |acc, &t| (acc + t) % m);
                if residue == target {
                    1.0
                } else {
                    0.0
                }
            }
            TaskKind::ConstantTarget => {
                if tokens.first() == Some(&target) {
                    1.0
                } else {
                    0.0
                }
            }
            TaskKind::GradedLinear => {
                let residue = tokens.iter().fold(0, |acc, &t| (acc + t) % m);
                1.0 - (residue as f64 - target as f64).abs() / m as f64
            }
        }
    }

    /// Exact expected reward of `policy` on `query_class`.
    pub fn exact_pass_rate(&self, policy: &TabularPolicy, query_class: usize) -> Result<f64> {
        self.target(query_class)?;
        Ok(policy
            .enumerate_sequences(query_class, DEFAULT_ENUMERATION_CAP)?
            .iter()
            .map(|(seq, q)| q * self.verify(query_class, seq))
            .sum())
    }

    /// Policy that deterministically solves every query class, built for the
    /// policy shape given. Only defined for tasks whose targets are reachable
    /// in one token (or zero tokens for residue 0).
    pub fn oracle_policy(&self, vocab_size: usize, max_len: usize) -> Result<TabularPolicy> {
        let mut policy =
            TabularPolicy::uniform(vocab_size, 1, max_len, self.num_classes())?;
        let eos = policy.eos_id();
        for (class, &target) in self.targets.iter().enumerate() {
            if target >= vocab_size {
                return Err(Error::domain(format!("target {target} not emittable")));
            }
            let first = if target == 0 && self.kind != TaskKind::ConstantTarget {
                eos
            } else {
                target
            };
            let start = policy.row_offset(class, &[policy.begin_id()])?;
            policy.logits_mut()[start + first] = 30.0;
            for ctx in 0..vocab_size {
                let off = policy.row_offset(class, &[ctx])?;
                policy.logits_mut()[off + eos] = 30.0;
            }
        }
        Ok(policy)
    }
}
