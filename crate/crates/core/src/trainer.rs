//! Seeded training loop.
//!
//! Each step snapshots the sampling policy, collects one group per query
//! with an rng stream derived from `(seed, step, query index)`, drops
//! invalid groups, and takes a single gradient-ascent step on the batch
//! objective. Group collection fans out over a thread pool; everything
//! after it runs in fixed order, so results do not depend on thread count.

use rayon::prelude::*;
use rayon::ThreadPool;

use crate::error::{Error, Result};
use crate::gradients::objective_param_grad;
use crate::objectives::{batch_objective, Algorithm, ContrastConfig, ObjectiveConfig};
use crate::policy::TabularPolicy;
use crate::rollouts::{collect_group, filter_valid, query_rng, Group};
use crate::schedule::MarginSchedule;
use crate::scores::ClipConfig;
use crate::tasks::{Task, TaskKind};

/// Full configuration of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    pub task: TaskKind,
    pub modulus: usize,
    /// Target of each query class; empty means one class per residue.
    pub targets: Vec<usize>,
    pub vocab_size: usize,
    pub max_len: usize,
    pub context_order: usize,
    pub group_size: usize,
    pub queries_per_step: usize,
    pub total_steps: u64,
    /// Step size of plain gradient ascent.
    pub learning_rate: f64,
    pub epsilon_clip: f64,
    pub tau: f64,
    pub margin_target: f64,
    pub margin_warmup_ratio: f64,
    pub beta_kl: f64,
    pub seed: u64,
    pub eval_interval: u64,
    /// Worker threads for rollout collection.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Conspo,
            task: TaskKind::SumMod,
            modulus: 4,
            targets: Vec::new(),
            vocab_size: 4,
            max_len: 4,
            context_order: 1,
            group_size: 8,
            queries_per_step: 64,
            total_steps: 400,
            learning_rate: 0.05,
            epsilon_clip: 0.2,
            tau: 10.0,
            margin_target: 0.01,
            margin_warmup_ratio: 0.3,
            beta_kl: 0.0,
            seed: 0,
            eval_interval: 20,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn build_task(&self) -> Result<Task> {
        let targets = if self.targets.is_empty() {
            (0..self.modulus).collect()
        } else {
            self.targets.clone()
        };
        Task::new(self.task, self.modulus, targets)
    }

    pub fn schedule(&self) -> Result<MarginSchedule> {
        MarginSchedule::new(self.margin_target, self.margin_warmup_ratio, self.total_steps)
    }

    pub fn objective_config(&self, margin: f64) -> Result<ObjectiveConfig> {
        Ok(ObjectiveConfig {
            algorithm: self.algorithm,
            clip: ClipConfig::new(self.epsilon_clip)?,
            contrast: ContrastConfig::new(self.tau, margin)?,
            beta: self.beta_kl,
        })
    }

    /// Check every field for consistency.
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| Err(Error::config(key, msg));
        if self.group_size < 2 {
            return bad("group_size", "must be at least 2");
        }
        if self.queries_per_step == 0 {
            return bad("queries_per_step", "must be positive");
        }
        if self.vocab_size == 0 {
            return bad("vocab_size", "must be positive");
        }
        if self.max_len == 0 {
            return bad("max_len", "must be positive");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", "must be a nonnegative number");
        }
        if !(self.beta_kl >= 0.0 && self.beta_kl.is_finite()) {
            return bad("beta_kl", "must be a nonnegative number");
        }
        if self.eval_interval == 0 {
            return bad("eval_interval", "must be positive");
        }
        if self.threads == 0 {
            return bad("threads", "must be positive");
        }
        ClipConfig::new(self.epsilon_clip).map_err(|e| Error::config("epsilon_clip", e.to_string()))?;
        ContrastConfig::new(self.tau, 0.0).map_err(|e| Error::config("tau", e.to_string()))?;
        self.schedule()
            .map_err(|e| Error::config("margin_target", e.to_string()))?;
        let task = self.build_task().map_err(|e| Error::config("targets", e.to_string()))?;
        if self.task == TaskKind::ConstantTarget {
            if let Some(t) = task.targets.iter().find(|&&t| t >= self.vocab_size) {
                return bad("targets", &format!("target {t} is not a token"));
            }
        }
        let probe = TabularPolicy::uniform(self.vocab_size, self.context_order, self.max_len, 1)?;
        if probe.sequence_count() > crate::policy::DEFAULT_ENUMERATION_CAP as u128 {
            return bad("max_len", "sequence space too large for exact evaluation");
        }
        Ok(())
    }
}

/// Mutable training state.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub policy: TabularPolicy,
    /// Frozen at initialization.
    pub reference: TabularPolicy,
    /// Completed optimizer steps.
    pub step: u64,
}

/// One record per training step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    pub margin: f64,
    /// `None` when every group was skipped.
    pub objective: Option<f64>,
    pub grad_norm: f64,
    /// Mean reward over every sampled rollout.
    pub pass_rate: f64,
    pub valid_fraction: f64,
    pub skipped: usize,
}

/// Exact expected reward per query class after `step` updates.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub step: u64,
    pub per_class: Vec<f64>,
    pub mean: f64,
}

/// Mean over query classes of the exact expected reward.
pub fn evaluate_policy(policy: &TabularPolicy, task: &Task) -> Result<(Vec<f64>, f64)> {
    let per_class = (0..task.num_classes())
        .map(|c| task.exact_pass_rate(policy, c))
        .collect::<Result<Vec<_>>>()?;
    let mean = per_class.iter().sum::<f64>() / per_class.len() as f64;
    Ok((per_class, mean))
}

pub struct Trainer {
    config: TrainConfig,
    task: Task,
    schedule: MarginSchedule,
    pool: ThreadPool,
    state: TrainState,
}

impl Trainer {
    /// Start from the uniform policy, which also serves as the reference.
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let task = config.build_task()?;
        let policy = TabularPolicy::uniform(
            config.vocab_size,
            config.context_order,
            config.max_len,
            task.num_classes(),
        )?;
        Self::with_policy(config, policy)
    }

    pub fn with_policy(config: TrainConfig, policy: TabularPolicy) -> Result<Self> {
        config.validate()?;
        let task = config.build_task()?;
        if policy.num_classes() != task.num_classes() || policy.vocab_size() != config.vocab_size {
            return Err(Error::domain("initial policy does not match the task"));
        }
        let schedule = config.schedule()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| Error::domain(format!("thread pool: {e}")))?;
        Ok(Self {
            state: TrainState {
                reference: policy.clone(),
                policy,
                step: 0,
            },
            config,
            task,
            schedule,
            pool,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn task(&self) -> &Task {
        &self.task
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn policy(&self) -> &TabularPolicy {
        &self.state.policy
    }

    pub fn is_finished(&self) -> bool {
        self.state.step >= self.config.total_steps
    }

    /// Collect one group per query from `old`, in query order.
    fn collect(&self, old: &TabularPolicy) -> Result<Vec<Group>> {
        let cfg = &self.config;
        let step = self.state.step;
        let classes = self.task.num_classes();
        let reference = &self.state.reference;
        let task = &self.task;
        self.pool.install(|| {
            (0..cfg.queries_per_step)
                .into_par_iter()
                .map(|i| {
                    let mut rng = query_rng(cfg.seed, step, i as u64);
                    collect_group(old, reference, task, i % classes, cfg.group_size, &mut rng)
                })
                .collect()
        })
    }

    pub fn train_step(&mut self) -> Result<StepRecord> {
        let step = self.state.step;
        if step >= self.config.total_steps {
            return Err(Error::domain("training already finished"));
        }
        let old = self.state.policy.clone();
        let groups = self.collect(&old)?;
        let total_rollouts: usize = groups.iter().map(Group::size).sum();
        let pass_rate = groups
            .iter()
            .flat_map(|g| g.rollouts.iter().map(|r| r.reward))
            .sum::<f64>()
            / total_rollouts as f64;
        let n_groups = groups.len();
        let (valid, skipped) = filter_valid(groups);
        let margin = self.schedule.margin_at(step)?;
        let mut record = StepRecord {
            step,
            margin,
            objective: None,
            grad_norm: 0.0,
            pass_rate,
            valid_fraction: valid.len() as f64 / n_groups as f64,
            skipped,
        };
        if !valid.is_empty() {
            let cfg = self.config.objective_config(margin)?;
            let policy = &self.state.policy;
            let objective = batch_objective(policy, &valid, &cfg, &self.state.reference)?;
            let grad = objective_param_grad(policy, &valid, &cfg, &self.state.reference)?;
            if !grad.is_finite() || !objective.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite objective {objective} or gradient (norm {}) at step {step}",
                    grad.norm()
                )));
            }
            record.objective = Some(objective);
            record.grad_norm = grad.norm();
            self.state.policy.apply_gradient(&grad, self.config.learning_rate);
        }
        self.state.step += 1;
        Ok(record)
    }

    pub fn evaluate(&self) -> Result<EvalRecord> {
        let (per_class, mean) = evaluate_policy(&self.state.policy, &self.task)?;
        Ok(EvalRecord {
            step: self.state.step,
            per_class,
            mean,
        })
    }

    /// Whether an evaluation is due at the current step.
    pub fn eval_due(&self) -> bool {
        self.state.step % self.config.eval_interval == 0 || self.is_finished()
    }

    /// Run to completion, reporting each step and each evaluation (at step 0,
    /// every `eval_interval` steps, and at the final step).
    pub fn run(
        &mut self,
        mut on_step: impl FnMut(&StepRecord) -> Result<()>,
        mut on_eval: impl FnMut(&EvalRecord) -> Result<()>,
    ) -> Result<EvalRecord> {
        let mut last = self.evaluate()?;
        on_eval(&last)?;
        while !self.is_finished() {
            let record = self.train_step()?;
            on_step(&record)?;
            if self.eval_due() {
                last = self.evaluate()?;
                on_eval(&last)?;
            }
        }
        Ok(last)
    }
}
