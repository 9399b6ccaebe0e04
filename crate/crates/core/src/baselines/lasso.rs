//! Coordinate-descent lasso with an unpenalized intercept.
//!
//! Minimizes `(1 / 2W) * sum_k w_k (y_k - x_k . beta - b)^2 + lambda * |beta|_1`
//! where `w_k` are sample weights summing to `W`. Features and targets are
//! centered so the intercept drops out of the coordinate updates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LassoError {
    #[error("lasso did not converge after {sweeps} sweeps (last max update {max_update:e}, rmse {rmse})")]
    NonConvergence {
        sweeps: usize,
        max_update: f64,
        rmse: f64,
    },
    #[error("design has fewer than two distinct rows")]
    DegenerateDesign,
    #[error("design shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("lambda must be finite and non-negative, got {0}")]
    BadLambda(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoParams {
    pub lambda: f64,
    /// Convergence threshold on the largest coordinate update in a sweep.
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl LassoParams {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            tolerance: 1e-8,
            max_sweeps: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub sweeps: usize,
    /// Weighted root-mean-square training residual.
    pub rmse: f64,
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Fits the lasso on rows `x` (each of equal length) and targets `y`.
/// `sample_weights` defaults to all ones.
pub fn lasso(
    x: &[Vec<f64>],
    y: &[f64],
    sample_weights: Option<&[f64]>,
    params: LassoParams,
) -> Result<LassoFit, LassoError> {
    let m = x.len();
    if m != y.len() {
        return Err(LassoError::Shape(format!("{m} rows but {} targets", y.len())));
    }
    if !(params.lambda.is_finite() && params.lambda >= 0.0) {
        return Err(LassoError::BadLambda(params.lambda));
    }
    let ones;
    let sw = match sample_weights {
        Some(w) => {
            if w.len() != m {
                return Err(LassoError::Shape(format!("{m} rows but {} sample weights", w.len())));
            }
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(LassoError::NonFinite("sample weights"));
            }
            w
        }
        None => {
            ones = vec![1.0; m];
            &ones
        }
    };
    let p = x.first().map_or(0, Vec::len);
    if x.iter().any(|row| row.len() != p) {
        return Err(LassoError::Shape("rows differ in length".into()));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(LassoError::NonFinite("design or targets"));
    }
    let active: Vec<usize> = (0..m).filter(|&k| sw[k] > 0.0).collect();
    if active.iter().all(|&k| x[k] == x[active[0]]) {
        return Err(LassoError::DegenerateDesign);
    }

    let total: f64 = sw.iter().sum();
    let wmean = |f: &dyn Fn(usize) -> f64| (0..m).map(|k| sw[k] * f(k)).sum::<f64>() / total;
    let y_mean = wmean(&|k| y[k]);
    let x_mean: Vec<f64> = (0..p).map(|j| wmean(&|k| x[k][j])).collect();
    // Column-major centered design.
    let xc: Vec<Vec<f64>> = (0..p)
        .map(|j| (0..m).map(|k| x[k][j] - x_mean[j]).collect())
        .collect();
    let col_sq: Vec<f64> = xc
        .iter()
        .map(|col| (0..m).map(|k| sw[k] * col[k] * col[k]).sum::<f64>() / total)
        .collect();

    let mut beta = vec![0.0; p];
    let mut resid: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let mut sweeps = 0;
    let mut max_update = f64::INFINITY;
    while sweeps < params.max_sweeps {
        sweeps += 1;
        max_update = 0.0f64;
        for j in 0..p {
            if col_sq[j] == 0.0 {
                continue;
            }
            let col = &xc[j];
            let rho = (0..m).map(|k| sw[k] * col[k] * resid[k]).sum::<f64>() / total
                + col_sq[j] * beta[j];
            let updated = soft_threshold(rho, params.lambda) / col_sq[j];
            let delta = updated - beta[j];
            if delta != 0.0 {
                for k in 0..m {
                    resid[k] -= delta * col[k];
                }
                beta[j] = updated;
                max_update = max_update.max(delta.abs());
            }
        }
        if max_update < params.tolerance {
            break;
        }
    }
    let rmse = ((0..m).map(|k| sw[k] * resid[k] * resid[k]).sum::<f64>() / total).sqrt();
    if max_update >= params.tolerance {
        return Err(LassoError::NonConvergence {
            sweeps,
            max_update,
            rmse,
        });
    }
    let intercept = y_mean - x_mean.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>();
    Ok(LassoFit {
        weights: beta,
        intercept,
        lambda: params.lambda,
        sweeps,
        rmse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn full_enumeration(p: usize) -> Vec<Vec<f64>> {
        (0..1usize << p)
            .map(|bits| (0..p).map(|j| ((bits >> j) & 1) as f64).collect())
            .collect()
    }

    /// Normal-equation solve with an intercept column, by Gaussian elimination.
    fn least_squares(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let p = x[0].len() + 1;
        let rows: Vec<Vec<f64>> = x.iter().map(|r| std::iter::once(1.0).chain(r.clone()).collect()).collect();
        let mut a = vec![vec![0.0; p + 1]; p];
        for (r, &t) in rows.iter().zip(y) {
            for i in 0..p {
                for j in 0..p {
                    a[i][j] += r[i] * r[j];
                }
                a[i][p] += r[i] * t;
            }
        }
        for c in 0..p {
            let piv = (c..p).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
            a.swap(c, piv);
            for r in 0..p {
                if r != c {
                    let f = a[r][c] / a[c][c];
                    let pivot = a[c].clone();
                    for (dst, src) in a[r].iter_mut().zip(&pivot).skip(c) {
                        *dst -= f * src;
                    }
                }
            }
        }
        (0..p).map(|i| a[i][p] / a[i][i]).collect()
    }

    #[test]
    fn recovers_additive_weights_without_penalty() {
        let x = full_enumeration(3);
        let y: Vec<f64> = x.iter().map(|r| -5.0 + r[0] + 2.0 * r[2]).collect();
        let fit = lasso(&x, &y, None, LassoParams::new(0.0)).unwrap();
        let oracle = least_squares(&x, &y);
        assert_abs_diff_eq!(oracle[1], 1.0, epsilon = 1e-9);
        for (w, o) in fit.weights.iter().zip(&oracle[1..]) {
            assert_abs_diff_eq!(*w, *o, epsilon = 1e-6);
        }
        assert_abs_diff_eq!(fit.intercept, oracle[0], epsilon = 1e-6);
        assert!(fit.rmse < 1e-9);
    }

    #[test]
    fn matches_least_squares_on_noisy_unbalanced_design() {
        let x = vec![
            vec![1.0, 0.0, 1.0],
            vec![1.0, 1.0, 0.0],
            vec![0.0, 1.0, 1.0],
            vec![1.0, 1.0, 1.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ];
        let y = [0.3, -1.2, 2.5, 0.7, 1.1, -0.4];
        let fit = lasso(&x, &y, None, LassoParams::new(0.0)).unwrap();
        let oracle = least_squares(&x, &y);
        for (w, o) in fit.weights.iter().zip(&oracle[1..]) {
            assert_abs_diff_eq!(*w, *o, epsilon = 1e-6);
        }
    }

    #[test]
    fn huge_lambda_zeroes_weights() {
        let x = full_enumeration(3);
        let y: Vec<f64> = x.iter().map(|r| r[0] + 2.0 * r[2]).collect();
        let fit = lasso(&x, &y, None, LassoParams::new(1e6)).unwrap();
        assert!(fit.weights.iter().all(|&w| w == 0.0));
        assert_abs_diff_eq!(fit.intercept, y.iter().sum::<f64>() / y.len() as f64, epsilon = 1e-12);
    }

    #[test]
    fn duplicated_rows_equal_weighted_rows() {
        let x = vec![
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
            vec![0.0, 0.0],
        ];
        let y = [1.0, -0.5, 0.9, 0.1];
        let counts = [3.0, 1.0, 2.0, 1.0];
        let mut dx = Vec::new();
        let mut dy = Vec::new();
        for k in 0..4 {
            for _ in 0..counts[k] as usize {
                dx.push(x[k].clone());
                dy.push(y[k]);
            }
        }
        let params = LassoParams::new(0.05);
        let dup = lasso(&dx, &dy, None, params).unwrap();
        let weighted = lasso(&x, &y, Some(&counts), params).unwrap();
        for (a, b) in dup.weights.iter().zip(&weighted.weights) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(dup.intercept, weighted.intercept, epsilon = 1e-9);
    }

    #[test]
    fn degenerate_and_invalid_inputs() {
        let x = vec![vec![1.0, 0.0]; 4];
        assert_eq!(
            lasso(&x, &[1.0, 2.0, 3.0, 4.0], None, LassoParams::new(0.1)),
            Err(LassoError::DegenerateDesign)
        );
        let x = full_enumeration(2);
        assert!(matches!(lasso(&x, &[1.0], None, LassoParams::new(0.1)), Err(LassoError::Shape(_))));
        assert!(matches!(
            lasso(&x, &[1.0, f64::NAN, 0.0, 0.0], None, LassoParams::new(0.1)),
            Err(LassoError::NonFinite(_))
        ));
        assert_eq!(
            lasso(&x, &[0.0; 4], None, LassoParams::new(-1.0)),
            Err(LassoError::BadLambda(-1.0))
        );
    }

    #[test]
    fn reports_non_convergence() {
        // Correlated columns with a one-sweep budget cannot settle.
        let x = vec![
            vec![1.0, 1.0],
            vec![1.0, 0.0],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
        ];
        let y = [2.0, 0.5, 0.0, 2.1, 1.4];
        let params = LassoParams {
            max_sweeps: 1,
            ..LassoParams::new(0.0)
        };
        assert!(matches!(lasso(&x, &y, None, params), Err(LassoError::NonConvergence { sweeps: 1, .. })));
    }

    #[test]
    fn constant_column_gets_zero_weight() {
        let x: Vec<Vec<f64>> = full_enumeration(2).into_iter().map(|mut r| { r.push(1.0); r }).collect();
        let y: Vec<f64> = x.iter().map(|r| 3.0 * r[0]).collect();
        let fit = lasso(&x, &y, None, LassoParams::new(0.0)).unwrap();
        assert_eq!(fit.weights[2], 0.0);
        assert_abs_diff_eq!(fit.weights[0], 3.0, epsilon = 1e-9);
    }
}
