//! Sequence-level rollout scores.
//!
//! `s_plus` and `s_minus` average upper- and lower-clipped token importance
//! ratios; `s_like` is the length-normalized log-likelihood under the
//! current policy.

use crate::error::{Error, Result};
use crate::rollouts::Rollout;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipConfig {
    pub epsilon: f64,
}

impl ClipConfig {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::domain(format!("clip epsilon {epsilon} not in (0, 1)")));
        }
        Ok(Self { epsilon })
    }

    pub fn upper(&self) -> f64 {
        1.0 + self.epsilon
    }

    pub fn lower(&self) -> f64 {
        1.0 - self.epsilon
    }
}

impl Default for ClipConfig {
    fn default() -> Self {
        Self { epsilon: 0.2 }
    }
}

/// The three scores of one rollout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreBundle {
    pub s_plus: f64,
    pub s_minus: f64,
    pub s_like: f64,
}

impl ScoreBundle {
    pub fn of(rollout: &Rollout, clip: ClipConfig) -> Result<Self> {
        Ok(Self {
            s_plus: clipped_pos_score(rollout, clip)?,
            s_minus: clipped_neg_score(rollout, clip)?,
            s_like: likelihood_score(rollout)?,
        })
    }
}

/// Which of the three scores an operation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreKind {
    Plus,
    Minus,
    Like,
}

impl std::str::FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s_plus" => Ok(ScoreKind::Plus),
            "s_minus" => Ok(ScoreKind::Minus),
            "s_like" => Ok(ScoreKind::Like),
            other => Err(Error::domain(format!("unknown score kind `{other}`"))),
        }
    }
}

/// `rho_t = exp(logp_cur_t - logp_old_t)`.
pub fn token_ratios(rollout: &Rollout) -> Result<Vec<f64>> {
    if rollout.logp_cur.len() != rollout.logp_old.len() {
        return Err(Error::domain("logp_cur and logp_old are not aligned"));
    }
    rollout
        .logp_cur
        .iter()
        .zip(&rollout.logp_old)
        .map(|(c, o)| {
            if c.is_finite() && o.is_finite() {
                Ok((c - o).exp())
            } else {
                Err(Error::Numeric(format!("non-finite log-prob ({c}, {o})")))
            }
        })
        .collect()
}

fn nonempty(rollout: &Rollout) -> Result<()> {
    if rollout.is_empty() {
        Err(Error::domain("rollout has no scored steps"))
    } else {
        Ok(())
    }
}

pub fn clipped_pos_score(rollout: &Rollout, clip: ClipConfig) -> Result<f64> {
    nonempty(rollout)?;
    let ratios = token_ratios(rollout)?;
    Ok(ratios.iter().map(|r| r.min(clip.upper())).sum::<f64>() / ratios.len() as f64)
}

pub fn clipped_neg_score(rollout: &Rollout, clip: ClipConfig) -> Result<f64> {
    nonempty(rollout)?;
    let ratios = token_ratios(rollout)?;
    Ok(ratios.iter().map(|r| r.max(clip.lower())).sum::<f64>() / ratios.len() as f64)
}

pub fn likelihood_score(rollout: &Rollout) -> Result<f64> {
    nonempty(rollout)?;
    Ok(rollout.logp_cur.iter().sum::<f64>() / rollout.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_ratios(ratios: &[f64]) -> Rollout {
        let old = vec![-1.0; ratios.len()];
        let cur = ratios.iter().map(|r| r.ln() - 1.0).collect();
        Rollout::from_logprobs(vec![], 0.0, cur, old.clone(), old).unwrap()
    }

    #[test]
    fn ratios() {
        let r = with_ratios(&[1.0, 2.0]);
        let rho = token_ratios(&r).unwrap();
        assert_eq!(rho[0], 1.0);
        assert!((rho[1] - 2.0).abs() < 1e-15);
        let bad = Rollout::from_logprobs(vec![], 0.0, vec![f64::NAN], vec![-1.0], vec![-1.0]).unwrap();
        assert!(matches!(token_ratios(&bad), Err(Error::Numeric(_))));
    }

    #[test]
    fn clipped_scores_hand_values() {
        let clip = ClipConfig::default();
        let r = with_ratios(&[1.0, 1.5, 0.5]);
        assert!((clipped_pos_score(&r, clip).unwrap() - 0.9).abs() < 1e-12);
        assert!((clipped_neg_score(&r, clip).unwrap() - 1.1).abs() < 1e-12);
    }

    #[test]
    fn on_policy_scores_are_one() {
        let clip = ClipConfig::default();
        let r = Rollout::from_logprobs(vec![1], 1.0, vec![-0.3, -2.0], vec![-0.3, -2.0], vec![-1.0, -1.0]).unwrap();
        assert_eq!(clipped_pos_score(&r, clip).unwrap(), 1.0);
        assert_eq!(clipped_neg_score(&r, clip).unwrap(), 1.0);
    }

    #[test]
    fn saturation() {
        let clip = ClipConfig::new(0.2).unwrap();
        let high = with_ratios(&[1.3, 5.0, 1.2]);
        assert_eq!(clipped_pos_score(&high, clip).unwrap(), clip.upper());
        let low = with_ratios(&[0.1, 0.8, 0.01]);
        assert!((clipped_neg_score(&low, clip).unwrap() - clip.lower()).abs() < 1e-15);
    }

    #[test]
    fn likelihood_scores() {
        let lp = 0.2f64.ln();
        let short = Rollout::from_logprobs(vec![], 0.0, vec![lp; 2], vec![lp; 2], vec![lp; 2]).unwrap();
        let long = Rollout::from_logprobs(vec![], 0.0, vec![lp; 4], vec![lp; 4], vec![lp; 4]).unwrap();
        assert!((likelihood_score(&short).unwrap() + 1.60944).abs() < 1e-5);
        assert!((likelihood_score(&short).unwrap() - likelihood_score(&long).unwrap()).abs() < 1e-15);
        let sure = Rollout::from_logprobs(vec![], 0.0, vec![0.0, -1e-13], vec![0.0; 2], vec![0.0; 2]).unwrap();
        assert!(likelihood_score(&sure).unwrap().abs() < 1e-9);
    }

    #[test]
    fn invalid_epsilon() {
        assert!(ClipConfig::new(0.0).is_err());
        assert!(ClipConfig::new(1.0).is_err());
        assert!("s_other".parse::<ScoreKind>().is_err());
    }
}
