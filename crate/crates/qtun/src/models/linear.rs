//! Ridge regression and PLSR (NIPALS), both operating on z-scored features
//! with the standardization statistics stored in the model payload.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPayload {
    /// Coefficients in z-scored feature space.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub feature_means: Vec<f64>,
    pub feature_stds: Vec<f64>,
}

impl LinearPayload {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut acc = self.intercept;
        for j in 0..row.len() {
            acc += self.coefficients[j] * (row[j] - self.feature_means[j]) / self.feature_stds[j];
        }
        acc
    }
}

/// Column means and stds; a constant column gets std 1 so it z-scores to 0.
fn standardize(columns: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = columns[0].len() as f64;
    let means: Vec<f64> = columns.iter().map(|c| c.iter().sum::<f64>() / n).collect();
    let stds: Vec<f64> = columns
        .iter()
        .zip(&means)
        .map(|(c, &m)| {
            let var = c.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / n;
            let s = var.sqrt();
            if s > 0.0 { s } else { 1.0 }
        })
        .collect();
    (means, stds)
}

fn zscored_matrix(columns: &[Vec<f64>], means: &[f64], stds: &[f64]) -> DMatrix<f64> {
    let n = columns[0].len();
    let p = columns.len();
    DMatrix::from_fn(n, p, |i, j| (columns[j][i] - means[j]) / stds[j])
}

/// Closed-form ridge on z-scored features: (ZᵀZ + λI)β = Zᵀ(y − ȳ).
pub fn fit_ridge(columns: &[Vec<f64>], y: &[f64], lambda: f64) -> Result<LinearPayload> {
    if lambda < 0.0 {
        return Err(Error::Spec(format!("ridge lambda must be >= 0, got {lambda}")));
    }
    let (means, stds) = standardize(columns);
    let z = zscored_matrix(columns, &means, &stds);
    let y_mean = y.iter().sum::<f64>() / y.len() as f64;
    let yc = DVector::from_iterator(y.len(), y.iter().map(|&v| v - y_mean));
    let p = columns.len();
    let gram = z.transpose() * &z + DMatrix::identity(p, p) * lambda;
    let rhs = z.transpose() * yc;
    let beta = gram
        .cholesky()
        .map(|ch| ch.solve(&rhs))
        .or_else(|| {
            let svd = (z.transpose() * &z + DMatrix::identity(p, p) * lambda)
                .svd(true, true);
            svd.solve(&rhs, 1e-12).ok()
        })
        .ok_or_else(|| Error::Fitting("ridge normal equations are singular".into()))?;
    Ok(LinearPayload {
        coefficients: beta.iter().copied().collect(),
        intercept: y_mean,
        feature_means: means,
        feature_stds: stds,
    })
}

/// PLSR with `n_components` latent variables, NIPALS deflation. The final
/// coefficients B = W (PᵀW)⁻¹ q are folded back into a plain linear payload.
pub fn fit_plsr(columns: &[Vec<f64>], y: &[f64], n_components: usize) -> Result<LinearPayload> {
    let p = columns.len();
    if n_components == 0 || n_components > p {
        return Err(Error::Spec(format!(
            "plsr n_components must be in 1..={p}, got {n_components}"
        )));
    }
    let (means, stds) = standardize(columns);
    let mut x = zscored_matrix(columns, &means, &stds);
    let y_mean = y.iter().sum::<f64>() / y.len() as f64;
    let mut yc = DVector::from_iterator(y.len(), y.iter().map(|&v| v - y_mean));

    let mut w_mat = DMatrix::zeros(p, n_components);
    let mut p_mat = DMatrix::zeros(p, n_components);
    let mut q_vec = DVector::zeros(n_components);
    let mut used = 0usize;
    for k in 0..n_components {
        let mut w = x.transpose() * &yc;
        let norm = w.norm();
        if norm < 1e-14 {
            break; // y already fully deflated; fewer effective components
        }
        w /= norm;
        let t = &x * &w;
        let tt = t.dot(&t);
        if tt < 1e-14 {
            break;
        }
        let p_load = x.transpose() * &t / tt;
        let q = yc.dot(&t) / tt;
        x -= &t * p_load.transpose();
        yc -= &t * q;
        w_mat.set_column(k, &w);
        p_mat.set_column(k, &p_load);
        q_vec[k] = q;
        used = k + 1;
    }
    if used == 0 {
        return Err(Error::Fitting("plsr: zero covariance between X and y".into()));
    }
    let w_used = w_mat.columns(0, used).into_owned();
    let p_used = p_mat.columns(0, used).into_owned();
    let q_used = q_vec.rows(0, used).into_owned();
    let pw = p_used.transpose() * &w_used;
    let inv = pw
        .try_inverse()
        .ok_or_else(|| Error::Fitting("plsr: PᵀW is singular".into()))?;
    let beta = w_used * inv * q_used;
    Ok(LinearPayload {
        coefficients: beta.iter().copied().collect(),
        intercept: y_mean,
        feature_means: means,
        feature_stds: stds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(seed: u64, n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let columns: Vec<Vec<f64>> = (0..4)
            .map(|j| {
                (0..n)
                    .map(|_| rng.random_range(-1.0..1.0) * (j as f64 + 1.0))
                    .collect()
            })
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                2.0 * columns[0][i] - 1.5 * columns[1][i] + 0.3 * columns[2][i]
                    - 0.7 * columns[3][i]
                    + 5.0
            })
            .collect();
        (columns, y)
    }

    fn predict_all(m: &LinearPayload, columns: &[Vec<f64>]) -> Vec<f64> {
        (0..columns[0].len())
            .map(|i| {
                let row: Vec<f64> = columns.iter().map(|c| c[i]).collect();
                m.predict_row(&row)
            })
            .collect()
    }

    #[test]
    fn ridge_lambda_zero_recovers_exact_linear_data() {
        let (columns, y) = random_problem(3, 120);
        let m = fit_ridge(&columns, &y, 0.0).unwrap();
        for (pred, truth) in predict_all(&m, &columns).iter().zip(&y) {
            assert!((pred - truth).abs() < 1e-8, "{pred} vs {truth}");
        }
    }

    #[test]
    fn ridge_shrinks_with_lambda() {
        let (columns, y) = random_problem(4, 120);
        let m0 = fit_ridge(&columns, &y, 0.0).unwrap();
        let m1 = fit_ridge(&columns, &y, 100.0).unwrap();
        let norm = |m: &LinearPayload| m.coefficients.iter().map(|c| c * c).sum::<f64>();
        assert!(norm(&m1) < norm(&m0));
    }

    #[test]
    fn plsr_full_rank_matches_ols() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 150;
        let columns: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                columns[0][i].sin() + columns[1][i] * columns[2][i] - columns[3][i]
                    + rng.random_range(-0.1..0.1)
            })
            .collect();
        let ols = fit_ridge(&columns, &y, 0.0).unwrap();
        let pls = fit_plsr(&columns, &y, 4).unwrap();
        let po = predict_all(&ols, &columns);
        let pp = predict_all(&pls, &columns);
        for (a, b) in po.iter().zip(&pp) {
            let rel = (a - b).abs() / a.abs().max(1.0);
            assert!(rel < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn plsr_component_count_validated() {
        let (columns, y) = random_problem(5, 40);
        assert!(fit_plsr(&columns, &y, 0).is_err());
        assert!(fit_plsr(&columns, &y, 5).is_err());
        assert!(fit_plsr(&columns, &y, 1).is_ok());
    }

    #[test]
    fn constant_column_is_harmless() {
        let (mut columns, y) = random_problem(6, 80);
        columns[2] = vec![7.5; 80];
        let m = fit_ridge(&columns, &y, 0.1).unwrap();
        assert!(m.coefficients.iter().all(|c| c.is_finite()));
        assert_eq!(m.feature_stds[2], 1.0);
    }
}
