//! Linear regressors: non-negative least squares and L1-regularized
//! least squares (LASSO), both written against `ndarray` views.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A fitted linear predictor `ŷ = Xw + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Array1<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn predict(&self, x: ArrayView2<f64>) -> Array1<f64> {
        x.dot(&self.weights) + self.intercept
    }
}

/// Failures of the linear solvers.
#[derive(Debug, Error, PartialEq)]
pub enum LinearError {
    #[error("design matrix has {x_rows} rows but the response has {y_len}")]
    DimensionMismatch { x_rows: usize, y_len: usize },
    #[error("design matrix is empty")]
    EmptyDesign,
    #[error("design matrix or response contains a non-finite value")]
    NonFiniteInput,
    #[error("normal equations are singular on the active set")]
    Singular,
    #[error("active-set iteration limit exceeded")]
    IterationLimit,
    #[error("{name} must be finite and non-negative, got {value}")]
    BadParameter { name: &'static str, value: f64 },
}

fn check_inputs(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<(), LinearError> {
    if x.nrows() != y.len() {
        return Err(LinearError::DimensionMismatch {
            x_rows: x.nrows(),
            y_len: y.len(),
        });
    }
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(LinearError::EmptyDesign);
    }
    if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(LinearError::NonFiniteInput);
    }
    Ok(())
}

/// Solves `A z = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when a pivot is negligible relative to the matrix scale.
fn solve_dense(mut a: Array2<f64>, mut b: Array1<f64>) -> Option<Array1<f64>> {
    let n = a.nrows();
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[[row, col]].abs() > a[[pivot, col]].abs() {
                pivot = row;
            }
        }
        if a[[pivot, col]].abs() < 1e-12 * scale {
            return None;
        }
        if pivot != col {
            for c in 0..n {
                a.swap([pivot, c], [col, c]);
            }
            b.swap(pivot, col);
        }
        for row in col + 1..n {
            let f = a[[row, col]] / a[[col, col]];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[[row, c]] -= f * a[[col, c]];
            }
            b[row] -= f * b[col];
        }
    }
    let mut z = Array1::zeros(n);
    for row in (0..n).rev() {
        let mut acc = b[row];
        for c in row + 1..n {
            acc -= a[[row, c]] * z[c];
        }
        z[row] = acc / a[[row, row]];
    }
    Some(z)
}

/// Unconstrained least squares restricted to the given columns, via the
/// normal equations.
fn least_squares_on(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    cols: &[usize],
) -> Result<Array1<f64>, LinearError> {
    let k = cols.len();
    let mut a = Array2::zeros((k, k));
    let mut b = Array1::zeros(k);
    for (i, &ci) in cols.iter().enumerate() {
        b[i] = x.column(ci).dot(&y);
        for (j, &cj) in cols.iter().enumerate() {
            a[[i, j]] = x.column(ci).dot(&x.column(cj));
        }
    }
    solve_dense(a, b).ok_or(LinearError::Singular)
}

/// Non-negative least squares via the Lawson–Hanson active-set method:
/// `min ‖Xw − y‖²` subject to `w ≥ 0`, no intercept.
///
/// Terminates when every inactive coordinate has dual value
/// `[Xᵀ(y − Xw)]_j ≤ 1e-10` relative to the problem scale.
pub fn nnls(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<Array1<f64>, LinearError> {
    check_inputs(x, y)?;
    let f = x.ncols();
    let mut w: Array1<f64> = Array1::zeros(f);
    let mut passive = vec![false; f];
    // Dual feasibility tolerance, relative to the gradient magnitude at zero.
    let g0 = x.t().dot(&y);
    let tol = 1e-10 * g0.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let max_outer = 10 * f + 50;
    for _ in 0..max_outer {
        let residual = &y.to_owned() - &x.dot(&w);
        let gradient = x.t().dot(&residual);
        let mut entering = None;
        let mut best = tol;
        for j in 0..f {
            if !passive[j] && gradient[j] > best {
                best = gradient[j];
                entering = Some(j);
            }
        }
        let Some(j) = entering else {
            return Ok(w);
        };
        passive[j] = true;
        // Inner loop: keep the passive-set least-squares solution feasible.
        for _ in 0..f + 10 {
            let cols: Vec<usize> = (0..f).filter(|&c| passive[c]).collect();
            let z = least_squares_on(x, y, &cols)?;
            if z.iter().all(|&v| v > 0.0) {
                w.fill(0.0);
                for (&c, &v) in cols.iter().zip(z.iter()) {
                    w[c] = v;
                }
                break;
            }
            // Step toward z only as far as feasibility allows, then drop the
            // coordinates that hit zero.
            let mut alpha = f64::INFINITY;
            for (&c, &v) in cols.iter().zip(z.iter()) {
                if v <= 0.0 {
                    let denom = w[c] - v;
                    if denom > 0.0 {
                        alpha = alpha.min(w[c] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            for (&c, &v) in cols.iter().zip(z.iter()) {
                w[c] += alpha * (v - w[c]);
            }
            for c in &cols {
                if w[*c] <= tol.max(1e-14) {
                    w[*c] = 0.0;
                    passive[*c] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    Err(LinearError::IterationLimit)
}

/// LASSO hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoParams {
    pub alpha: f64,
    pub fit_intercept: bool,
    #[serde(default = "default_max_sweeps")]
    pub max_sweeps: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_max_sweeps() -> usize {
    10_000
}

fn default_tol() -> f64 {
    1e-7
}

impl LassoParams {
    pub fn new(alpha: f64, fit_intercept: bool) -> LassoParams {
        LassoParams {
            alpha,
            fit_intercept,
            max_sweeps: default_max_sweeps(),
            tol: default_tol(),
        }
    }
}

fn soft_threshold(v: f64, amount: f64) -> f64 {
    if v > amount {
        v - amount
    } else if v < -amount {
        v + amount
    } else {
        0.0
    }
}

/// L1-regularized least squares by cyclic coordinate descent:
///
/// `min (1/2N)·‖y − Xw − b‖² + α‖w‖₁`
///
/// Sweeps stop when the largest coordinate (or intercept) update drops below
/// `tol`; reaching `max_sweeps` without that is an accepted stopping point,
/// not an error.
pub fn lasso(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    params: &LassoParams,
) -> Result<LinearModel, LinearError> {
    check_inputs(x, y)?;
    if !(params.alpha.is_finite() && params.alpha >= 0.0) {
        return Err(LinearError::BadParameter {
            name: "alpha",
            value: params.alpha,
        });
    }
    let (n_rows, n_cols) = x.dim();
    let n = n_rows as f64;
    // Per-coordinate curvature (1/N)·Σ x_ij².
    let curvature: Vec<f64> = (0..n_cols)
        .map(|j| x.column(j).dot(&x.column(j)) / n)
        .collect();
    let mut w: Array1<f64> = Array1::zeros(n_cols);
    let mut b = 0.0;
    let mut residual = y.to_owned();
    if params.fit_intercept {
        b = residual.sum() / n;
        residual -= b;
    }
    for _ in 0..params.max_sweeps {
        let mut max_update = 0.0f64;
        for j in 0..n_cols {
            if curvature[j] == 0.0 {
                continue;
            }
            let old = w[j];
            let rho = x.column(j).dot(&residual) / n + curvature[j] * old;
            let new = soft_threshold(rho, params.alpha) / curvature[j];
            if new != old {
                let delta = new - old;
                residual.scaled_add(-delta, &x.column(j));
                w[j] = new;
                max_update = max_update.max(delta.abs());
            }
        }
        if params.fit_intercept {
            let shift = residual.sum() / n;
            if shift != 0.0 {
                b += shift;
                residual -= shift;
                max_update = max_update.max(shift.abs());
            }
        }
        if max_update < params.tol {
            break;
        }
    }
    Ok(LinearModel {
        weights: w,
        intercept: b,
    })
}
