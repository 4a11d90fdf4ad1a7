//! Ordinary least squares with t-test inference, solved by Householder QR.

use std::collections::BTreeMap;

use crate::core_model::{CoefEntry, FittedModel};
use crate::stats::special::t_two_sided_p;
use crate::stats::StatsError;

/// Relative tolerance for rank detection, scaled by the largest column norm.
const RANK_TOL: f64 = 1e-10;

/// Dense design matrix with a leading intercept column of ones.
///
/// `column_keys` name the non-intercept columns; imputation metadata travels
/// with the matrix so a fit can be reused for poststratification.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub rows: usize,
    /// Number of columns including the intercept.
    pub cols: usize,
    /// Row-major, `rows * cols` values.
    pub values: Vec<f64>,
    /// (dimension, stratum) per non-intercept column, reference strata excluded.
    pub column_keys: Vec<(String, String)>,
    pub response: Vec<f64>,
    /// Column means used to fill dimensions unobserved for a poll.
    pub imputation_means: BTreeMap<String, BTreeMap<String, f64>>,
    /// Vote threshold applied when assembling the matrix.
    pub min_votes: u64,
    /// Dimensions whose strata form the columns, in order.
    pub dimension_set: Vec<String>,
}

impl DesignMatrix {
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    /// Builds a matrix from explicit predictor columns (intercept prepended).
    pub fn from_columns(
        columns: &[(String, String, Vec<f64>)],
        response: Vec<f64>,
    ) -> DesignMatrix {
        let rows = response.len();
        let cols = columns.len() + 1;
        let mut values = vec![0.0; rows * cols];
        for r in 0..rows {
            values[r * cols] = 1.0;
            for (c, (_, _, col)) in columns.iter().enumerate() {
                values[r * cols + c + 1] = col[r];
            }
        }
        DesignMatrix {
            rows,
            cols,
            values,
            column_keys: columns
                .iter()
                .map(|(d, g, _)| (d.clone(), g.clone()))
                .collect(),
            response,
            imputation_means: BTreeMap::new(),
            min_votes: 0,
            dimension_set: columns
                .iter()
                .map(|(d, _, _)| d.clone())
                .fold(Vec::new(), |mut acc, d| {
                    if !acc.contains(&d) {
                        acc.push(d);
                    }
                    acc
                }),
        }
    }
}

/// In-place Householder QR of a column-major copy of the design matrix.
/// Returns the R factor (upper triangular, n x n) and the response vector
/// transformed by the same reflections.
fn householder_qr(x: &DesignMatrix) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    let m = x.rows;
    let n = x.cols;
    // Column-major working copy.
    let mut a = vec![0.0; m * n];
    for r in 0..m {
        for c in 0..n {
            a[c * m + r] = x.at(r, c);
        }
    }
    let mut qty = x.response.clone();

    let max_col_norm = (0..n)
        .map(|c| (0..m).map(|r| a[c * m + r] * a[c * m + r]).sum::<f64>().sqrt())
        .fold(0.0_f64, f64::max);
    let tol = RANK_TOL * max_col_norm.max(1.0);

    let mut deficient = Vec::new();
    for k in 0..n.min(m) {
        // Householder vector for column k, rows k..m.
        let norm = (k..m).map(|r| a[k * m + r] * a[k * m + r]).sum::<f64>().sqrt();
        if norm <= tol {
            deficient.push(k);
            continue;
        }
        let alpha = if a[k * m + k] >= 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..m).map(|r| a[k * m + r]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|z| z * z).sum();
        if vnorm2 > 0.0 {
            for c in k..n {
                let dot: f64 = (k..m).map(|r| v[r - k] * a[c * m + r]).sum();
                let scale = 2.0 * dot / vnorm2;
                for r in k..m {
                    a[c * m + r] -= scale * v[r - k];
                }
            }
            let dot: f64 = (k..m).map(|r| v[r - k] * qty[r]).sum();
            let scale = 2.0 * dot / vnorm2;
            for r in k..m {
                qty[r] -= scale * v[r - k];
            }
        }
        a[k * m + k] = alpha;
        if alpha.abs() <= tol {
            deficient.push(k);
        }
    }

    // Extract R (n x n upper triangle, row-major).
    let mut r_mat = vec![0.0; n * n];
    for k in 0..n {
        for c in k..n {
            r_mat[k * n + c] = a[c * m + k];
        }
    }
    (r_mat, qty, deficient)
}

fn column_name(x: &DesignMatrix, col: usize) -> String {
    if col == 0 {
        "intercept".to_string()
    } else {
        let (d, g) = &x.column_keys[col - 1];
        format!("{d}.{g}")
    }
}

/// Fits `response ~ columns` by least squares and derives classical
/// inference statistics.
pub fn ols_fit(x: &DesignMatrix) -> Result<FittedModel, StatsError> {
    let n = x.rows;
    let k = x.cols; // includes intercept
    if n <= k {
        return Err(StatsError::InsufficientObservations {
            n_obs: n,
            n_params: k,
        });
    }
    debug_assert_eq!(x.column_keys.len(), k - 1);
    debug_assert!(x.values.iter().all(|v| v.is_finite()), "design has missing values");

    let (r_mat, qty, deficient) = householder_qr(x);
    if !deficient.is_empty() {
        return Err(StatsError::RankDeficient {
            columns: deficient.iter().map(|&c| column_name(x, c)).collect(),
        });
    }

    // Back-substitution: R beta = (Q^T y)[0..k]
    let mut beta = vec![0.0; k];
    for i in (0..k).rev() {
        let mut acc = qty[i];
        for j in (i + 1)..k {
            acc -= r_mat[i * k + j] * beta[j];
        }
        beta[i] = acc / r_mat[i * k + i];
    }

    // Residual sum of squares = || (Q^T y)[k..] ||^2 is algebraically exact,
    // but recompute from the data for robustness.
    let mut rss = 0.0;
    let mut fitted = vec![0.0; n];
    for r in 0..n {
        let mut yhat = 0.0;
        for c in 0..k {
            yhat += x.at(r, c) * beta[c];
        }
        fitted[r] = yhat;
        let e = x.response[r] - yhat;
        rss += e * e;
    }
    let df = (n - k) as f64;
    let sigma2 = rss / df;

    // diag of (X'X)^{-1} = diag of R^{-1} R^{-T}: solve R^T w = e_j forward.
    let mut se = vec![0.0; k];
    for j in 0..k {
        let mut w = vec![0.0; k];
        for i in j..k {
            let mut acc = if i == j { 1.0 } else { 0.0 };
            for l in j..i {
                acc -= r_mat[l * k + i] * w[l];
            }
            w[i] = acc / r_mat[i * k + i];
        }
        let diag: f64 = w.iter().map(|z| z * z).sum();
        se[j] = (sigma2 * diag).sqrt();
    }

    let y_mean = x.response.iter().sum::<f64>() / n as f64;
    let tss: f64 = x.response.iter().map(|y| (y - y_mean) * (y - y_mean)).sum();
    let r2 = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    let k_pred = (k - 1) as f64;
    let adj_r2 = 1.0 - (1.0 - r2) * (n as f64 - 1.0) / (n as f64 - k_pred - 1.0);

    let t_stats: Vec<f64> = beta
        .iter()
        .zip(&se)
        .map(|(b, s)| if *s > 0.0 { b / s } else { f64::INFINITY })
        .collect();
    let p_values: Vec<f64> = t_stats.iter().map(|t| t_two_sided_p(*t, df)).collect();

    let coefficients = x
        .column_keys
        .iter()
        .enumerate()
        .map(|(i, (d, g))| CoefEntry {
            dimension: d.clone(),
            stratum: g.clone(),
            coef: beta[i + 1],
            std_err: se[i + 1],
            t_stat: t_stats[i + 1],
            p_value: p_values[i + 1],
        })
        .collect();

    Ok(FittedModel {
        intercept: beta[0],
        intercept_std_err: se[0],
        intercept_t_stat: t_stats[0],
        intercept_p_value: p_values[0],
        coefficients,
        adj_r2,
        n_obs: n,
        imputation_means: x.imputation_means.clone(),
        min_votes: x.min_votes,
        dimension_set: x.dimension_set.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Normal-equations oracle: solves (X'X) b = X'y by Gaussian elimination
    /// with partial pivoting. Independent of the QR path above.
    pub fn normal_equations(x: &DesignMatrix) -> Vec<f64> {
        let n = x.rows;
        let k = x.cols;
        let mut xtx = vec![0.0; k * k];
        let mut xty = vec![0.0; k];
        for r in 0..n {
            for i in 0..k {
                xty[i] += x.at(r, i) * x.response[r];
                for j in 0..k {
                    xtx[i * k + j] += x.at(r, i) * x.at(r, j);
                }
            }
        }
        // Gaussian elimination with partial pivoting on [xtx | xty].
        for col in 0..k {
            let pivot = (col..k)
                .max_by(|&a, &b| {
                    xtx[a * k + col]
                        .abs()
                        .partial_cmp(&xtx[b * k + col].abs())
                        .unwrap()
                })
                .unwrap();
            if pivot != col {
                for j in 0..k {
                    xtx.swap(col * k + j, pivot * k + j);
                }
                xty.swap(col, pivot);
            }
            for row in (col + 1)..k {
                let f = xtx[row * k + col] / xtx[col * k + col];
                for j in col..k {
                    xtx[row * k + j] -= f * xtx[col * k + j];
                }
                xty[row] -= f * xty[col];
            }
        }
        let mut b = vec![0.0; k];
        for i in (0..k).rev() {
            let mut acc = xty[i];
            for j in (i + 1)..k {
                acc -= xtx[i * k + j] * b[j];
            }
            b[i] = acc / xtx[i * k + i];
        }
        b
    }

    fn design(cols: &[(&str, &str, Vec<f64>)], y: Vec<f64>) -> DesignMatrix {
        let cols: Vec<(String, String, Vec<f64>)> = cols
            .iter()
            .map(|(d, g, v)| (d.to_string(), g.to_string(), v.clone()))
            .collect();
        DesignMatrix::from_columns(&cols, y)
    }

    #[test]
    fn exact_linear_fit() {
        let x = design(&[("x", "x", vec![0.0, 1.0, 2.0])], vec![1.0, 3.0, 5.0]);
        let fit = ols_fit(&x).unwrap();
        assert!((fit.intercept - 1.0).abs() < 1e-12);
        assert!((fit.coefficients[0].coef - 2.0).abs() < 1e-12);
        assert!((fit.adj_r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_synthetic_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200;
        let mut rep = Vec::with_capacity(n);
        let mut dem = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let xr: f64 = rng.gen_range(0.0..1.0);
            let xd: f64 = rng.gen_range(0.0..1.0);
            let noise: f64 = {
                // Box-Muller
                let u1: f64 = rng.gen_range(1e-12..1.0);
                let u2: f64 = rng.gen_range(0.0..1.0);
                (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos() * 0.05
            };
            rep.push(xr);
            dem.push(xd);
            y.push(0.4 + 0.35 * xr - 0.1 * xd + noise);
        }
        let x = design(
            &[("ideology", "rep", rep), ("ideology", "dem", dem)],
            y,
        );
        let fit = ols_fit(&x).unwrap();
        let oracle = normal_equations(&x);
        assert!((fit.intercept - oracle[0]).abs() < 1e-10);
        assert!((fit.coefficients[0].coef - oracle[1]).abs() < 1e-10);
        assert!((fit.coefficients[1].coef - oracle[2]).abs() < 1e-10);
        assert!((fit.intercept - 0.4).abs() < 0.03);
        assert!((fit.coefficients[0].coef - 0.35).abs() < 0.03);
        assert!((fit.coefficients[1].coef - (-0.1)).abs() < 0.03);
    }

    #[test]
    fn constant_column_is_rank_deficient() {
        let x = design(
            &[("c", "const", vec![1.0, 1.0, 1.0, 1.0])],
            vec![1.0, 2.0, 3.0, 4.0],
        );
        let err = ols_fit(&x).unwrap_err();
        match err {
            StatsError::RankDeficient { columns } => {
                assert!(!columns.is_empty());
            }
            other => panic!("expected RankDeficient, got {other:?}"),
        }
    }

    #[test]
    fn too_few_observations() {
        let x = design(&[("x", "x", vec![1.0, 2.0])], vec![1.0, 2.0]);
        assert!(matches!(
            ols_fit(&x).unwrap_err(),
            StatsError::InsufficientObservations { .. }
        ));
    }

    #[test]
    fn residuals_sum_to_zero_with_intercept() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 60;
        let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y: Vec<f64> = xs.iter().map(|x| 0.3 * x + rng.gen_range(-0.5..0.5)).collect();
        let x = design(&[("x", "x", xs.clone())], y.clone());
        let fit = ols_fit(&x).unwrap();
        let resid_sum: f64 = xs
            .iter()
            .zip(&y)
            .map(|(xi, yi)| yi - fit.intercept - fit.coefficients[0].coef * xi)
            .sum();
        assert!(resid_sum.abs() < 1e-8 * n as f64);
    }

    #[test]
    fn shifting_response_shifts_only_intercept() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 40;
        let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let y: Vec<f64> = xs.iter().map(|x| 0.2 + 0.5 * x + rng.gen_range(-0.1..0.1)).collect();
        let shifted: Vec<f64> = y.iter().map(|v| v + 2.5).collect();
        let fit = ols_fit(&design(&[("x", "x", xs.clone())], y)).unwrap();
        let fit2 = ols_fit(&design(&[("x", "x", xs)], shifted)).unwrap();
        assert!((fit2.intercept - fit.intercept - 2.5).abs() < 1e-10);
        assert!((fit2.coefficients[0].coef - fit.coefficients[0].coef).abs() < 1e-10);
    }

    #[test]
    fn matches_normal_equations_on_random_designs() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            let n = rng.gen_range(30..120);
            let p = rng.gen_range(1..6);
            let cols: Vec<(String, String, Vec<f64>)> = (0..p)
                .map(|j| {
                    (
                        "d".to_string(),
                        format!("g{j}"),
                        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    )
                })
                .collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = DesignMatrix::from_columns(&cols, y);
            let fit = ols_fit(&x).unwrap();
            let oracle = normal_equations(&x);
            assert!((fit.intercept - oracle[0]).abs() < 1e-10);
            for (i, c) in fit.coefficients.iter().enumerate() {
                assert!(
                    (c.coef - oracle[i + 1]).abs() < 1e-10,
                    "coef {i}: {} vs {}",
                    c.coef,
                    oracle[i + 1]
                );
            }
        }
    }
}
