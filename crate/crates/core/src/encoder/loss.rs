use serde::{Deserialize, Serialize};

use super::model::RelationScores;
use super::tape::log_sum_exp;
use super::EncoderError;
use crate::relations::{RelationChannel, RelationMatrix};

pub const SCORE_CLIP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub tau: f64,
    pub negatives: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { tau: 0.07, negatives: 1 }
    }
}

impl LossConfig {
    pub fn check(&self) -> Result<(), EncoderError> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(EncoderError::InvalidConfig(format!("tau must be positive, got {}", self.tau)));
        }
        if self.negatives == 0 {
            return Err(EncoderError::InvalidConfig("at least one negative is required".into()));
        }
        Ok(())
    }
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, EncoderError> {
    if a.len() != b.len() {
        return Err(EncoderError::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(EncoderError::ZeroNorm);
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb))
}

/// `−log[exp(sim(a,p)/τ) / Σₙ exp(sim(a,n)/τ)]`. The positive is not part of
/// the denominator, so the value can be negative.
pub fn simcse_loss(anchor: &[f64], positive: &[f64], negatives: &[Vec<f64>], cfg: &LossConfig) -> Result<f64, EncoderError> {
    LossConfig {
        negatives: negatives.len(),
        ..*cfg
    }
    .check()?;
    let sp = cosine_similarity(anchor, positive)?;
    let sn = negatives
        .iter()
        .map(|n| cosine_similarity(anchor, n).map(|s| s / cfg.tau))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(-sp / cfg.tau + log_sum_exp(&sn))
}

/// Mean binary cross-entropy over off-diagonal entries of all four channels.
pub fn relation_decode_loss(scores: &RelationScores, target: &RelationMatrix) -> Result<f64, EncoderError> {
    let n = scores.len();
    if target.len() != n {
        return Err(EncoderError::DimensionMismatch {
            expected: n,
            found: target.len(),
        });
    }
    if n < 2 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for c in RelationChannel::ALL {
        let s = scores.get(c);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let p = s[[i, j]].clamp(SCORE_CLIP, 1.0 - SCORE_CLIP);
                total -= if target.get(c, i, j) { p.ln() } else { (1.0 - p).ln() };
            }
        }
    }
    Ok(total / (4 * n * (n - 1)) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn equal_similarities_cancel() {
        let a = [1.0, 0.0];
        let l = simcse_loss(&a, &[0.6, 0.8], &[vec![0.6, -0.8]], &LossConfig { tau: 0.3, negatives: 1 }).unwrap();
        assert!(l.abs() < 1e-12);
    }

    #[test]
    fn as_written_loss_can_be_negative() {
        let cfg = LossConfig { tau: 1.0, negatives: 1 };
        let l = simcse_loss(&[1.0, 0.0], &[2.0, 0.0], &[vec![0.0, 3.0]], &cfg).unwrap();
        assert!((l + 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_norm_is_an_error() {
        let cfg = LossConfig::default();
        assert_eq!(simcse_loss(&[0.0, 0.0], &[1.0, 0.0], &[vec![0.0, 1.0]], &cfg), Err(EncoderError::ZeroNorm));
        assert!(simcse_loss(&[1.0, 0.0], &[1.0, 0.0], &[], &cfg).is_err());
    }

    #[test]
    fn half_scores_give_ln2() {
        let n = 5;
        let scores = RelationScores {
            channels: std::array::from_fn(|_| Array2::from_elem((n, n), 0.5)),
        };
        let l = relation_decode_loss(&scores, &RelationMatrix::zeros(n)).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-9);
    }
}
