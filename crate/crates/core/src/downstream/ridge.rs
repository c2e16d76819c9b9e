use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, Matrix};

/// Multi-output ridge regression: one weight column per target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    /// `F × outputs`
    pub weights: Matrix,
    pub intercepts: Vec<f64>,
    pub alpha: f64,
}

fn column_means(m: &Matrix) -> Vec<f64> {
    let mut means = vec![0.0; m.cols()];
    for i in 0..m.rows() {
        for (s, v) in means.iter_mut().zip(m.row(i)) {
            *s += v;
        }
    }
    let n = m.rows() as f64;
    means.iter_mut().for_each(|s| *s /= n);
    means
}

fn center(m: &Matrix, means: &[f64]) -> Matrix {
    Matrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)] - means[j])
}

/// Solves `(ZcᵀZc + αI) W = ZcᵀYc` on column-centered data by Cholesky;
/// intercepts restore the means.
pub fn ridge_fit(z: &Matrix, y: &Matrix, alpha: f64) -> Result<RidgeModel> {
    if z.rows() == 0 || z.rows() != y.rows() {
        return Err(Error::dim(format!(
            "ridge fit with {} feature rows and {} target rows",
            z.rows(),
            y.rows()
        )));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Config(format!("ridge alpha must be positive, got {alpha}")));
    }
    let z_mean = column_means(z);
    let y_mean = column_means(y);
    let zc = center(z, &z_mean);
    let yc = center(y, &y_mean);
    let zt = zc.transpose();
    let mut gram = zt.matmul(&zc)?;
    for i in 0..gram.rows() {
        gram[(i, i)] += alpha;
    }
    let weights = cholesky_solve(&gram, &zt.matmul(&yc)?)?;
    let intercepts = (0..y.cols())
        .map(|j| y_mean[j] - (0..z.cols()).map(|i| z_mean[i] * weights[(i, j)]).sum::<f64>())
        .collect();
    Ok(RidgeModel {
        weights,
        intercepts,
        alpha,
    })
}

pub fn ridge_predict(model: &RidgeModel, z: &Matrix) -> Result<Matrix> {
    let mut out = z.matmul(&model.weights)?;
    for i in 0..out.rows() {
        for (v, b) in out.row_mut(i).iter_mut().zip(&model.intercepts) {
            *v += b;
        }
    }
    Ok(out)
}

/// Mean absolute error per column.
pub fn mae(pred: &Matrix, truth: &Matrix) -> Result<Vec<f64>> {
    if pred.shape() != truth.shape() || pred.rows() == 0 {
        return Err(Error::dim(format!(
            "mae of {:?} against {:?}",
            pred.shape(),
            truth.shape()
        )));
    }
    let mut acc = vec![0.0; pred.cols()];
    for i in 0..pred.rows() {
        for ((a, p), t) in acc.iter_mut().zip(pred.row(i)).zip(truth.row(i)) {
            *a += (p - t).abs();
        }
    }
    let n = pred.rows() as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_linear_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let z = Matrix::random_uniform(40, 6, 1.0, &mut rng);
        let w = Matrix::random_uniform(6, 5, 2.0, &mut rng);
        let mut y = z.matmul(&w).unwrap();
        for i in 0..40 {
            for j in 0..5 {
                y[(i, j)] += j as f64;
            }
        }
        let model = ridge_fit(&z, &y, 1e-8).unwrap();
        assert!(model.weights.sub(&w).unwrap().max_abs() < 1e-6);
        for (j, b) in model.intercepts.iter().enumerate() {
            assert!((b - j as f64).abs() < 1e-6);
        }
        let pred = ridge_predict(&model, &z).unwrap();
        assert!(mae(&pred, &y).unwrap().iter().all(|&e| e <= 1e-6));
    }

    #[test]
    fn orthonormal_design_halves_weights() {
        // centered columns with unit norm and zero inner product
        let z = Matrix::from_rows(&[
            vec![0.5, 0.5],
            vec![-0.5, 0.5],
            vec![0.5, -0.5],
            vec![-0.5, -0.5],
        ])
        .unwrap();
        let y = Matrix::column(&[3.0, -1.0, 2.0, 0.0]);
        let ls = z.transpose().matmul(&y).unwrap();
        let model = ridge_fit(&z, &y, 1.0).unwrap();
        for i in 0..2 {
            assert!((model.weights[(i, 0)] - 0.5 * ls[(i, 0)]).abs() < 1e-14);
        }
    }

    #[test]
    fn normal_equations_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = Matrix::random_uniform(30, 8, 1.0, &mut rng);
        let y = Matrix::random_uniform(30, 5, 1.0, &mut rng);
        let alpha = 0.7;
        let model = ridge_fit(&z, &y, alpha).unwrap();
        // plug back: (ZcᵀZc + αI)W − ZcᵀYc = 0
        let zm = column_means(&z);
        let ym = column_means(&y);
        let zc = center(&z, &zm);
        let yc = center(&y, &ym);
        let lhs = zc.transpose().matmul(&zc).unwrap().matmul(&model.weights).unwrap();
        let mut lhs = lhs;
        lhs.axpy(alpha, &model.weights).unwrap();
        let rhs = zc.transpose().matmul(&yc).unwrap();
        assert!(lhs.sub(&rhs).unwrap().max_abs() <= 1e-9);
    }

    #[test]
    fn mae_matches_scalar_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = Matrix::random_uniform(17, 5, 3.0, &mut rng);
        let b = Matrix::random_uniform(17, 5, 3.0, &mut rng);
        let got = mae(&a, &b).unwrap();
        for j in 0..5 {
            let mut s = 0.0;
            for i in 0..17 {
                s += (a[(i, j)] - b[(i, j)]).abs();
            }
            assert!((got[j] - s / 17.0).abs() <= 1e-12);
        }
        let c = Matrix::from_fn(4, 5, |_, _| 2.5);
        assert_eq!(mae(&c, &c).unwrap(), vec![0.0; 5]);
        assert!(mae(&a, &c).is_err());
    }

    #[test]
    fn bad_inputs() {
        let z = Matrix::zeros(3, 2);
        assert!(ridge_fit(&z, &Matrix::zeros(2, 1), 1.0).is_err());
        assert!(ridge_fit(&z, &Matrix::zeros(3, 1), 0.0).is_err());
        // all-zero features are still solvable
        assert!(ridge_fit(&z, &Matrix::zeros(3, 1), 1.0).is_ok());
    }
}
