//! Parametric propensity score: a logit with linear index over `(1, X)`,
//! fitted by damped Newton iteration.

use crate::data::ObservationTable;
use crate::error::{Error, Result};

const MAX_ITER: usize = 100;
const GRAD_TOL: f64 = 1e-8;
/// Index magnitude at which the fit is declared divergent (separation).
const DIVERGENCE_NORM: f64 = 1e3;

/// A fitted logit propensity model `p(x; theta) = sigmoid(theta_0 + x' theta_1..)`.
#[derive(Debug, Clone)]
pub struct PropensityModel {
    theta: Vec<f64>,
    fitted: bool,
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(t)) without overflow.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

impl PropensityModel {
    /// Wraps explicit coefficients (intercept first); useful for imposing a
    /// known propensity in tests or configurations.
    pub fn from_theta(theta: Vec<f64>) -> Self {
        Self { theta, fitted: true }
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn is_fitted(&self) -> bool {
        self.fitted
    }

    /// Fitted propensity at a covariate row.
    pub fn predict(&self, x_row: &[f64]) -> f64 {
        let mut t = self.theta[0];
        for (j, &x) in x_row.iter().enumerate() {
            t += self.theta[j + 1] * x;
        }
        sigmoid(t)
    }
}

/// Solves the symmetric positive-definite system `a s = b` in place by
/// Cholesky factorization; `a` is row-major `p x p`.
fn solve_spd(mut a: Vec<f64>, mut b: Vec<f64>, p: usize) -> Option<Vec<f64>> {
    // Ridge keeps the factorization alive when weights collapse.
    let trace: f64 = (0..p).map(|i| a[i * p + i]).sum();
    let ridge = 1e-12 * trace.max(1.0);
    for i in 0..p {
        a[i * p + i] += ridge;
    }
    // Cholesky a = L L^t.
    for i in 0..p {
        for j in 0..=i {
            let mut s = a[i * p + j];
            for k in 0..j {
                s -= a[i * p + k] * a[j * p + k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                a[i * p + j] = s.sqrt();
            } else {
                a[i * p + j] = s / a[j * p + j];
            }
        }
    }
    // Forward then backward substitution.
    for i in 0..p {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * p + k] * b[k];
        }
        b[i] = s / a[i * p + i];
    }
    for i in (0..p).rev() {
        let mut s = b[i];
        for k in (i + 1)..p {
            s -= a[k * p + i] * b[k];
        }
        b[i] = s / a[i * p + i];
    }
    Some(b)
}

/// Maximum-likelihood logit fit of `Pr(D = 1 | X)` with a linear index over
/// `(1, X)`. Converges when the gradient sup-norm falls below `1e-8`;
/// divergence of the index is reported as perfect separation.
pub fn fit_propensity(table: &ObservationTable) -> Result<PropensityModel> {
    let n = table.n();
    let p = table.d_x() + 1;
    if !table.d().contains(&1) {
        return Err(Error::MissingArm(1));
    }
    if !table.d().contains(&0) {
        return Err(Error::MissingArm(0));
    }

    let design_row = |i: usize, buf: &mut Vec<f64>| {
        buf.clear();
        buf.push(1.0);
        buf.extend_from_slice(table.x_row(i));
    };

    let loglik = |theta: &[f64]| -> f64 {
        let mut ll = 0.0;
        for i in 0..n {
            let mut t = theta[0];
            for (j, &x) in table.x_row(i).iter().enumerate() {
                t += theta[j + 1] * x;
            }
            ll += table.d()[i] as f64 * t - softplus(t);
        }
        ll
    };

    let mut theta = vec![0.0; p];
    let mut ll = loglik(&theta);
    let mut row = Vec::with_capacity(p);

    for _iter in 0..MAX_ITER {
        let mut grad = vec![0.0; p];
        let mut hess = vec![0.0; p * p];
        for i in 0..n {
            design_row(i, &mut row);
            let mut t = 0.0;
            for j in 0..p {
                t += theta[j] * row[j];
            }
            let pi = sigmoid(t);
            let resid = table.d()[i] as f64 - pi;
            let w = pi * (1.0 - pi);
            for j in 0..p {
                grad[j] += resid * row[j];
                for k in 0..=j {
                    hess[j * p + k] += w * row[j] * row[k];
                }
            }
        }
        for j in 0..p {
            for k in (j + 1)..p {
                hess[j * p + k] = hess[k * p + j];
            }
        }

        let gnorm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gnorm < GRAD_TOL {
            return finish(table, theta);
        }

        let step = solve_spd(hess, grad, p).ok_or(Error::Separation)?;

        // Damped update: halve until the likelihood does not decrease. The
        // tolerance scales with |ll| so roundoff in the n-term sum cannot
        // stall full Newton steps near the optimum.
        let accept_tol = 1e-10 * (1.0 + ll.abs());
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand: Vec<f64> = theta
                .iter()
                .zip(step.iter())
                .map(|(t, s)| t + lambda * s)
                .collect();
            let cand_ll = loglik(&cand);
            if cand_ll >= ll - accept_tol {
                theta = cand;
                ll = cand_ll;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return finish(table, theta);
        }
        if theta.iter().any(|t| t.abs() > DIVERGENCE_NORM) {
            return Err(Error::Separation);
        }
    }
    Err(Error::NoConvergence(MAX_ITER))
}

fn finish(table: &ObservationTable, theta: Vec<f64>) -> Result<PropensityModel> {
    let model = PropensityModel {
        theta,
        fitted: true,
    };
    for i in 0..table.n() {
        let pi = model.predict(table.x_row(i));
        if !(pi > 0.0 && pi < 1.0) {
            return Err(Error::Separation);
        }
    }
    Ok(model)
}
