//! Log-determinant of a possibly rectangular matrix, taken as the sum of the
//! logs of its singular values, and its gradient `u · diag(1/σ) · vᵀ`.

use crate::error::{Error, Result};
use crate::linalg::{svd, Matrix, SvdResult};

/// Singular values at or below this are treated as a rank loss.
pub const SIGMA_FLOOR: f64 = 1e-12;

fn check_rank(s: &SvdResult) -> Result<()> {
    let sigma_min = s.sigma_min();
    if s.sigma.is_empty() || sigma_min <= SIGMA_FLOOR {
        return Err(Error::RankDeficient {
            what: "matrix".into(),
            sigma_min,
        });
    }
    Ok(())
}

/// `Σ log σ_i`. Fails with [`Error::RankDeficient`] instead of returning `-inf`.
pub fn logdet_rect(m: &Matrix) -> Result<f64> {
    let s = svd(m)?;
    check_rank(&s)?;
    Ok(s.sigma.iter().map(|x| x.ln()).sum())
}

/// Gradient of [`logdet_rect`]: the transposed pseudo-inverse.
pub fn logdet_grad(m: &Matrix) -> Result<Matrix> {
    Ok(logdet_with_grad(m)?.1)
}

/// Value and gradient from a single decomposition.
pub fn logdet_with_grad(m: &Matrix) -> Result<(f64, Matrix)> {
    let s = svd(m)?;
    check_rank(&s)?;
    let value = s.sigma.iter().map(|x| x.ln()).sum();
    let mut scaled_u = s.u.clone();
    for i in 0..scaled_u.rows() {
        for (j, sig) in s.sigma.iter().enumerate() {
            scaled_u[(i, j)] /= sig;
        }
    }
    let grad = scaled_u.matmul(&s.v.transpose())?;
    Ok((value, grad))
}

/// Smallest singular value.
pub fn sigma_min(m: &Matrix) -> Result<f64> {
    Ok(svd(m)?.sigma_min())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_zero() {
        for n in 1..6 {
            assert_eq!(logdet_rect(&Matrix::identity(n)).unwrap(), 0.0);
            let g = logdet_grad(&Matrix::identity(n)).unwrap();
            assert!(g.sub(&Matrix::identity(n)).unwrap().max_abs() < 1e-15);
        }
    }

    #[test]
    fn diagonal_values() {
        let d = Matrix::from_diag(2, 2, &[2.0, 3.0]);
        assert!((logdet_rect(&d).unwrap() - 6f64.ln()).abs() < 1e-15);
        let g = logdet_grad(&d).unwrap();
        let expected = Matrix::from_diag(2, 2, &[0.5, 1.0 / 3.0]);
        assert!(g.sub(&expected).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn scaled_identity() {
        for n in 1..8 {
            let c = 0.3 + n as f64;
            let v = logdet_rect(&Matrix::identity(n).scaled(c)).unwrap();
            assert!((v - n as f64 * c.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_deficiency_is_an_error() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(logdet_rect(&m), Err(Error::RankDeficient { .. })));
        assert!(matches!(logdet_grad(&Matrix::zeros(3, 2)), Err(Error::RankDeficient { .. })));
    }
}
