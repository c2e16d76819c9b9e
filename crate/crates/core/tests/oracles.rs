use confuse_core::downstream::{annualized_return, auc_midrank};
use confuse_core::linalg::{logdet_rect, svd, Matrix};
use confuse_core::selfcheck::{auc_suite, conv_suite, logdet_gram_oracle, logdet_suite, prox_suite};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Cyclic Jacobi eigenvalues of a symmetric matrix.
fn sym_eigenvalues(a: &Matrix) -> Vec<f64> {
    let n = a.rows();
    let mut m = a.clone();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * m[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

#[test]
fn singular_values_match_gram_eigenvalues() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..30 {
        let rows = rng.random_range(1..=20usize);
        let cols = rng.random_range(1..=12usize);
        let m = Matrix::random_uniform(rows, cols, 1.0, &mut rng);
        let r = svd(&m).unwrap();
        let gram = if rows >= cols {
            m.transpose().matmul(&m).unwrap()
        } else {
            m.matmul(&m.transpose()).unwrap()
        };
        let ev = sym_eigenvalues(&gram);
        let mut sv = r.sigma.clone();
        sv.sort_by(|a, b| b.total_cmp(a));
        for (s, e) in sv.iter().zip(&ev) {
            assert!((s * s - e.max(0.0)).abs() <= 1e-10 * ev[0].max(1.0), "{s} {e}");
        }
        assert!(r.reconstruct().sub(&m).unwrap().max_abs() <= 1e-12);
    }
}

#[test]
fn logdet_against_gram_determinant() {
    let (value, grad) = logdet_suite(0, 50).unwrap();
    assert!(value.passed, "{value:?}");
    assert!(grad.passed, "{grad:?}");
}

#[test]
fn closed_form_features_beat_perturbations() {
    let s = prox_suite(0, 10, 1000).unwrap();
    assert!(s.passed, "{s:?}");
}

#[test]
fn convolution_against_dft() {
    let s = conv_suite(1, 300).unwrap();
    assert!(s.passed, "{s:?}");
}

#[test]
fn midrank_auc_against_pairs() {
    let s = auc_suite(2, 300).unwrap();
    assert!(s.passed, "{s:?}");
}

#[test]
fn random_scores_have_chance_auc() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut total = 0.0;
    let reps = 200;
    for _ in 0..reps {
        let labels: Vec<bool> = (0..400).map(|_| rng.random_bool(0.5)).collect();
        let scores: Vec<f64> = (0..400).map(|_| rng.random()).collect();
        total += auc_midrank(&scores, &labels).unwrap();
    }
    assert!((total / reps as f64 - 0.5).abs() < 0.01);
}

#[test]
fn compound_growth_oracle() {
    // BUY on even days; every BUY day is followed by a 1% rise
    let n = 252;
    let buy: Vec<bool> = (0..n).map(|t| t % 2 == 0).collect();
    let mut closes = vec![50.0];
    for t in 1..n {
        let prev: f64 = closes[t - 1];
        closes.push(if buy[t - 1] { prev * 1.01 } else { prev / 1.02 });
    }
    let expected = (1.01f64.powi(126) - 1.0) * 100.0;
    let got = annualized_return(&buy, &closes).unwrap();
    assert!((got - expected).abs() <= 1e-10 * expected);
}

proptest! {
    #[test]
    fn logdet_scales_with_matrix(seed in 0u64..1000, c in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = rng.random_range(2..=10usize);
        let cols = rng.random_range(1..=rows);
        let m = Matrix::random_uniform(rows, cols, 1.0, &mut rng);
        let base = logdet_rect(&m).unwrap();
        let scaled = logdet_rect(&m.scaled(c)).unwrap();
        prop_assert!((scaled - base - cols as f64 * c.ln()).abs() <= 1e-9 * (1.0 + base.abs()));
        prop_assert!((base - logdet_gram_oracle(&m).unwrap()).abs() <= 1e-9 * (1.0 + base.abs()));
    }

    #[test]
    fn logdet_is_transpose_invariant(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = Matrix::random_uniform(rng.random_range(1..=9), rng.random_range(1..=9), 1.0, &mut rng);
        let a = logdet_rect(&m).unwrap();
        let b = logdet_rect(&m.transpose()).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
    }

    #[test]
    fn return_ignores_price_scale(seed in 0u64..1000, scale in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..60usize);
        let closes: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..2.0)).collect();
        let buy: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        let a = annualized_return(&buy, &closes).unwrap();
        let scaled: Vec<f64> = closes.iter().map(|c| c * scale).collect();
        let b = annualized_return(&buy, &scaled).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
    }
}
