//! Layout evaluation: relation error, matched IoU, overlap and a Fréchet
//! distance over features from a small clean-vs-corrupt classifier.

mod classifier;
mod fid;
mod iou;
mod overlap;
mod report;

pub use classifier::{
    corrupt_layout, handcrafted_vector, train_corruption_classifier, ClassifierConfig, CorruptionClassifier,
    HANDCRAFTED_DIM,
};
pub use fid::{fid, COVARIANCE_SHRINK};
pub use iou::{max_assignment, max_iou};
pub use overlap::overlap;
pub use report::{evaluate, DifficultyBreakdown, EvalSample, MetricReport, MetricRow};

use thiserror::Error;

use crate::relations::{RelationChannel, RelationMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("need at least {needed} layouts, got {got}")]
    TooFewLayouts { needed: usize, got: usize },
    #[error("feature sets must not be empty")]
    EmptyFeatureSet,
    #[error("classifier reached {accuracy:.3} held-out accuracy, below {target:.2}")]
    ClassifierUnderfit {
        accuracy: f64,
        target: f64,
        /// Training loss every 100 steps.
        trace: Vec<f64>,
    },
    #[error("classifier checkpoint: {0}")]
    Checkpoint(String),
    #[error("csv: {0}")]
    Csv(String),
}

/// Mean squared difference over the `4·n·(n−1)` off-diagonal entries.
pub fn relation_error(a: &RelationMatrix, b: &RelationMatrix) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Ok(0.0);
    }
    let mut diff = 0usize;
    for c in RelationChannel::ALL {
        for i in 0..n {
            for j in 0..n {
                if i != j && a.get(c, i, j) != b.get(c, i, j) {
                    diff += 1;
                }
            }
        }
    }
    Ok(diff as f64 / (4 * n * (n - 1)) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_flipped_entry_of_two_nodes() {
        let a = RelationMatrix::zeros(2);
        let mut b = RelationMatrix::zeros(2);
        b.set(RelationChannel::Left, 1, 0, true, false);
        assert_eq!(relation_error(&a, &b).unwrap(), 0.125);
        assert_eq!(relation_error(&b, &a).unwrap(), 0.125);
        assert_eq!(relation_error(&b, &b).unwrap(), 0.0);
        assert!(relation_error(&a, &RelationMatrix::zeros(3)).is_err());
    }
}
