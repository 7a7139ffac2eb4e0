use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::MetricsError;

/// Added to both covariance diagonals before the square root.
pub const COVARIANCE_SHRINK: f64 = 1e-6;

fn moments(set: &[Vec<f64>], dim: usize) -> Result<(DVector<f64>, DMatrix<f64>), MetricsError> {
    let n = set.len();
    let mut mean = DVector::zeros(dim);
    for v in set {
        if v.len() != dim {
            return Err(MetricsError::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
        mean += DVector::from_column_slice(v);
    }
    mean /= n as f64;
    let mut cov = DMatrix::zeros(dim, dim);
    for v in set {
        let d = DVector::from_column_slice(v) - &mean;
        cov += &d * d.transpose();
    }
    if n > 1 {
        cov /= (n - 1) as f64;
    }
    cov += DMatrix::identity(dim, dim) * COVARIANCE_SHRINK;
    Ok((mean, cov))
}

/// Square root of a symmetric positive semi-definite matrix.
fn sqrt_psd(m: DMatrix<f64>) -> DMatrix<f64> {
    let sym = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Fréchet distance between Gaussians fitted to two feature sets:
/// `‖μa − μb‖² + Tr(Σa + Σb − 2(Σa Σb)^½)`. The trace of the cross term is
/// taken from the symmetric `Σa^½ Σb Σa^½`, which has the same eigenvalues.
pub fn fid(set_a: &[Vec<f64>], set_b: &[Vec<f64>]) -> Result<f64, MetricsError> {
    if set_a.is_empty() || set_b.is_empty() {
        return Err(MetricsError::EmptyFeatureSet);
    }
    let dim = set_a[0].len();
    let (mu_a, cov_a) = moments(set_a, dim)?;
    let (mu_b, cov_b) = moments(set_b, dim)?;
    let root_a = sqrt_psd(cov_a.clone());
    let cross = sqrt_psd(&root_a * &cov_b * &root_a);
    let d = (mu_a - mu_b).norm_squared() + cov_a.trace() + cov_b.trace() - 2.0 * cross.trace();
    Ok(d.max(0.0))
}
