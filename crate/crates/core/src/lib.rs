//! A desk-scale laboratory for group-relative (GRPO) and contrastive
//! sequence-level (ConSPO) policy optimization.
//!
//! Everything runs on a tabular autoregressive softmax policy over a tiny
//! vocabulary, so every expectation can be computed exactly by enumeration
//! and every gradient can be checked against finite differences.
//!
//! Modules, bottom-up:
//!
//! - [`policy`]: the tabular policy, exact enumeration, log-prob gradients, KL.
//! - [`tasks`]: synthetic tasks with deterministic verifiers.
//! - [`rollouts`]: rollout groups, positive/negative split, validity filter.
//! - [`scores`]: clipped-ratio scores and the length-normalized likelihood score.
//! - [`advantage`]: empirical and exact group-relative advantages.
//! - [`objectives`]: clipped surrogate, discriminative forms, InfoNCE and margin objectives.
//! - [`gradients`]: score-space credit, chain rule to logits, finite differences.
//! - [`schedule`]: cosine margin warmup.
//! - [`trainer`]: seeded training loop with exact evaluation.
//! - [`propcheck`]: randomized numeric checks of the identities above.
//! - [`cli_io`]: config files, run directories, and the `train`/`verify`/`compare` commands.

pub mod advantage;
pub mod cli_io;
pub mod error;
pub mod gradients;
pub mod objectives;
pub mod policy;
pub mod propcheck;
pub mod rollouts;
pub mod schedule;
pub mod scores;
pub mod tasks;
pub mod trainer;

pub use error::{Error, Result};
pub use objectives::Algorithm;
pub use policy::{LogitGrad, TabularPolicy, Token};
pub use tasks::{Task, TaskKind};
