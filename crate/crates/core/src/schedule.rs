//! Cosine warmup of the contrastive margin.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Margin curriculum rising from 0 to `target` over the first
/// `warmup_ratio` of `total_steps`, then held.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginSchedule {
    pub target: f64,
    pub warmup_ratio: f64,
    pub total_steps: u64,
}

impl MarginSchedule {
    pub fn new(target: f64, warmup_ratio: f64, total_steps: u64) -> Result<Self> {
        if !(target >= 0.0 && target.is_finite()) {
            return Err(Error::domain(format!("margin target {target} must be nonnegative")));
        }
        if !(warmup_ratio > 0.0 && warmup_ratio <= 1.0) {
            return Err(Error::domain(format!("warmup ratio {warmup_ratio} not in (0, 1]")));
        }
        Ok(Self {
            target,
            warmup_ratio,
            total_steps,
        })
    }

    /// Warmup progress `min((t / T) / alpha, 1)`.
    pub fn progress(&self, step: u64) -> Result<f64> {
        if step > self.total_steps {
            return Err(Error::domain(format!(
                "step {step} beyond total steps {}",
                self.total_steps
            )));
        }
        if self.total_steps == 0 {
            return Ok(1.0);
        }
        let lambda = step as f64 / self.total_steps as f64;
        Ok((lambda / self.warmup_ratio).min(1.0))
    }

    /// `m_t = (M / 2)(1 - cos(pi * progress))`, exactly `M` once warmup ends.
    pub fn margin_at(&self, step: u64) -> Result<f64> {
        let progress = self.progress(step)?;
        if progress >= 1.0 {
            return Ok(self.target);
        }
        Ok(0.5 * self.target * (1.0 - (PI * progress).cos()))
    }
}

impl Default for MarginSchedule {
    fn default() -> Self {
        Self {
            target: 0.01,
            warmup_ratio: 0.3,
            total_steps: 1000,
        }
    }
}
