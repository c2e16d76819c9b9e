//! Thin singular value decomposition.
//!
//! Tall inputs are first reduced with a Householder QR so the rotations run
//! on a square `n × n` factor; the square core is diagonalized with one-sided
//! (Hestenes) Jacobi rotations, which gives singular values to nearly full
//! relative precision.

use crate::error::{Error, Result};
use crate::linalg::matrix::dot;
use crate::linalg::Matrix;

const MAX_SWEEPS: usize = 80;
const ROTATION_TOL: f64 = 1e-15;

/// `m = u · diag(sigma) · vᵀ` with `k = min(rows, cols)` singular triplets.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// `rows × k`, orthonormal columns.
    pub u: Matrix,
    /// Non-increasing, non-negative.
    pub sigma: Vec<f64>,
    /// `cols × k`, orthonormal columns.
    pub v: Matrix,
}

impl SvdResult {
    pub fn sigma_min(&self) -> f64 {
        self.sigma.last().copied().unwrap_or(0.0)
    }

    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (j, s) in self.sigma.iter().enumerate() {
                us[(i, j)] *= s;
            }
        }
        us.matmul(&self.v.transpose()).expect("svd factors have matching shapes")
    }
}

pub fn svd(m: &Matrix) -> Result<SvdResult> {
    if !m.is_finite() {
        return Err(Error::NonFinite("svd input".into()));
    }
    if m.rows() < m.cols() {
        let t = svd(&m.transpose())?;
        return Ok(SvdResult {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        });
    }
    let (rows, cols) = m.shape();
    if cols == 0 {
        return Ok(SvdResult {
            u: Matrix::zeros(rows, 0),
            sigma: Vec::new(),
            v: Matrix::zeros(0, 0),
        });
    }

    if rows > cols {
        let (q, r) = householder_qr(m);
        let core = jacobi_square(columns_of(&r))?;
        let u = q.matmul(&core.u)?;
        return Ok(SvdResult {
            u,
            sigma: core.sigma,
            v: core.v,
        });
    }
    jacobi_square(columns_of(m))
}

fn columns_of(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.cols()).map(|j| m.col(j)).collect()
}

/// One-sided Jacobi on column storage. `cols.len() <= cols[i].len()`.
fn jacobi_square(mut w: Vec<Vec<f64>>) -> Result<SvdResult> {
    let n = w.len();
    let rows = w[0].len();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(&w[p], &w[p]);
                let beta = dot(&w[q], &w[q]);
                let gamma = dot(&w[p], &w[q]);
                if gamma == 0.0 || gamma.abs() <= ROTATION_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SvdNoConvergence { sweeps: MAX_SWEEPS });
    }

    let norms: Vec<f64> = w.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));

    let scale = norms[order[0]];
    let mut u = Matrix::zeros(rows, n);
    let mut vm = Matrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        let s = norms[j];
        sigma.push(s);
        vm.set_col(k, &v[j]);
        if s > scale * f64::EPSILON * rows as f64 && s > 0.0 {
            let col: Vec<f64> = w[j].iter().map(|x| x / s).collect();
            u.set_col(k, &col);
        } else {
            missing.push(k);
        }
    }
    if !missing.is_empty() {
        complete_orthonormal(&mut u, &missing);
    }
    Ok(SvdResult { u, sigma, v: vm })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    let (a, b) = (&mut left[p], &mut right[0]);
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Fills the listed columns of `u` with unit vectors orthogonal to all others.
fn complete_orthonormal(u: &mut Matrix, missing: &[usize]) {
    let rows = u.rows();
    let mut candidate = 0;
    for &k in missing {
        loop {
            let mut e = vec![0.0; rows];
            e[candidate % rows] = 1.0;
            candidate += 1;
            for j in 0..u.cols() {
                if j == k || (missing.contains(&j) && j > k) {
                    continue;
                }
                let col = u.col(j);
                let proj = dot(&col, &e);
                for (ei, ci) in e.iter_mut().zip(&col) {
                    *ei -= proj * ci;
                }
            }
            let norm = dot(&e, &e).sqrt();
            if norm > 1e-8 {
                let col: Vec<f64> = e.iter().map(|x| x / norm).collect();
                u.set_col(k, &col);
                break;
            }
            if candidate > 2 * rows {
                return;
            }
        }
    }
}

/// Thin QR of a tall matrix: `m = q · r`, `q` is `rows × cols`, `r` is upper
/// triangular `cols × cols`.
fn householder_qr(m: &Matrix) -> (Matrix, Matrix) {
    let (rows, cols) = m.shape();
    let mut a = columns_of(m);
    let mut reflectors: Vec<Option<(Vec<f64>, f64)>> = Vec::with_capacity(cols);

    for k in 0..cols {
        let x = &a[k][k..];
        let norm = dot(x, x).sqrt();
        if norm == 0.0 {
            reflectors.push(None);
            continue;
        }
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        let mut v = x.to_vec();
        v[0] -= alpha;
        let vnorm2 = dot(&v, &v);
        if vnorm2 == 0.0 {
            reflectors.push(None);
            continue;
        }
        for col in a.iter_mut().skip(k) {
            let tail = &mut col[k..];
            let proj = 2.0 * dot(&v, tail) / vnorm2;
            for (t, vi) in tail.iter_mut().zip(&v) {
                *t -= proj * vi;
            }
        }
        reflectors.push(Some((v, vnorm2)));
    }

    let r = Matrix::from_fn(cols, cols, |i, j| if i <= j { a[j][i] } else { 0.0 });

    let mut q_cols: Vec<Vec<f64>> = (0..cols)
        .map(|j| {
            let mut e = vec![0.0; rows];
            e[j] = 1.0;
            e
        })
        .collect();
    for (k, refl) in reflectors.iter().enumerate().rev() {
        let Some((v, vnorm2)) = refl else { continue };
        for q in q_cols.iter_mut() {
            let tail = &mut q[k..];
            let proj = 2.0 * dot(v, tail) / vnorm2;
            for (t, vi) in tail.iter_mut().zip(v) {
                *t -= proj * vi;
            }
        }
    }
    let mut q = Matrix::zeros(rows, cols);
    for (j, c) in q_cols.iter().enumerate() {
        q.set_col(j, c);
    }
    (q, r)
}
