//! Maximum-likelihood logistic regression for a priori propensity scores.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // float math is not inherent in core on older toolchains
use num_traits::Float;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Default clip for predicted propensities.
pub const DEFAULT_CLIP: f64 = 0.01;

// Standardized coefficients beyond this norm mean the MLE does not exist.
const DIVERGENCE_NORM: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    /// Intercept first, then one slope per covariate, on the original scale.
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl LogisticFit {
    pub fn linear_predictor(&self, row: &[f64]) -> f64 {
        self.coefficients[0] + row.iter().zip(&self.coefficients[1..]).map(|(x, b)| x * b).sum::<f64>()
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Log-likelihood of `beta` on the (intercept-augmented) design `z`.
fn log_likelihood(z: &Matrix, a: &[bool], beta: &[f64]) -> f64 {
    z.iter_rows()
        .zip(a)
        .map(|(row, &ai)| {
            let eta: f64 = row.iter().zip(beta).map(|(x, b)| x * b).sum();
            if ai {
                -softplus(-eta)
            } else {
                -softplus(eta)
            }
        })
        .sum()
}

/// Solves `h x = g` for symmetric positive definite `h` (row-major, k×k).
fn cholesky_solve(h: &[f64], g: &[f64], k: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..=i {
            let mut s = h[i * k + j];
            for p in 0..j {
                s -= l[i * k + p] * l[j * k + p];
            }
            if i == j {
                if !(s > 1e-12 * h[i * k + i].abs().max(1e-300)) {
                    return Err(Error::Singular);
                }
                l[i * k + i] = s.sqrt();
            } else {
                l[i * k + j] = s / l[j * k + j];
            }
        }
    }
    let mut y = vec![0.0; k];
    for i in 0..k {
        let s: f64 = (0..i).map(|p| l[i * k + p] * y[p]).sum();
        y[i] = (g[i] - s) / l[i * k + i];
    }
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|p| l[p * k + i] * x[p]).sum();
        x[i] = (y[i] - s) / l[i * k + i];
    }
    Ok(x)
}

/// Newton–Raphson (IRLS) fit of `P(A = 1 | x) = logistic(β₀ + xᵀβ)`, run on
/// internally standardized covariates until the score's max-norm is below
/// `tol`.
pub fn fit_logistic(x: &Matrix, a: &[bool], tol: f64, max_iter: usize) -> Result<LogisticFit> {
    let (n, p) = (x.rows(), x.cols());
    if a.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: a.len() });
    }
    if n <= p + 1 {
        return Err(Error::Data(alloc::format!("logistic regression needs more than {} units, got {n}", p + 1)));
    }
    let ones = a.iter().filter(|&&v| v).count();
    if ones == 0 || ones == n {
        return Err(Error::Data("both treatment classes must be present".into()));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("covariates"));
    }
    let mut center = vec![0.0; p];
    let mut scale = vec![0.0; p];
    for j in 0..p {
        let col = x.column(j);
        center[j] = crate::special::mean(&col);
        scale[j] = crate::special::sample_sd(&col);
        if !(scale[j] > 0.0) {
            return Err(Error::Singular);
        }
    }
    let k = p + 1;
    let mut zdata = Vec::with_capacity(n * k);
    for row in x.iter_rows() {
        zdata.push(1.0);
        zdata.extend(row.iter().enumerate().map(|(j, v)| (v - center[j]) / scale[j]));
    }
    let z = Matrix::new(n, k, zdata)?;

    let mut beta = vec![0.0; k];
    let rate = ones as f64 / n as f64;
    beta[0] = (rate / (1.0 - rate)).ln();
    let mut ll = log_likelihood(&z, a, &beta);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        let mut g = vec![0.0; k];
        let mut h = vec![0.0; k * k];
        for (row, &ai) in z.iter_rows().zip(a) {
            let eta: f64 = row.iter().zip(&beta).map(|(x, b)| x * b).sum();
            let pr = sigmoid(eta);
            let w = pr * (1.0 - pr);
            let r = f64::from(u8::from(ai)) - pr;
            for i in 0..k {
                g[i] += row[i] * r;
                for j in 0..=i {
                    h[i * k + j] += w * row[i] * row[j];
                }
            }
        }
        if g.iter().fold(0.0f64, |m, v| m.max(v.abs())) < tol {
            converged = true;
            break;
        }
        for i in 0..k {
            for j in 0..i {
                h[j * k + i] = h[i * k + j];
            }
        }
        let step = cholesky_solve(&h, &g, k).map_err(|e| {
            if beta.iter().map(|b| b * b).sum::<f64>().sqrt() > DIVERGENCE_NORM {
                Error::Separation
            } else {
                e
            }
        })?;
        iterations += 1;
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + t * s).collect();
            let cand_ll = log_likelihood(&z, a, &cand);
            if cand_ll >= ll - 1e-12 * ll.abs() || t < 1e-10 {
                beta = cand;
                ll = cand_ll;
                break;
            }
            t *= 0.5;
        }
        if beta.iter().map(|b| b * b).sum::<f64>().sqrt() > DIVERGENCE_NORM {
            return Err(Error::Separation);
        }
    }
    let saturated = z.iter_rows().zip(a).all(|(row, &ai)| {
        let eta: f64 = row.iter().zip(&beta).map(|(x, b)| x * b).sum();
        (f64::from(u8::from(ai)) - sigmoid(eta)).abs() < 1e-6
    });
    if saturated {
        return Err(Error::Separation);
    }
    if !converged {
        log::warn!("logistic regression did not converge in {max_iter} iterations");
    }
    let mut coefficients = vec![0.0; k];
    coefficients[0] = beta[0];
    for j in 0..p {
        coefficients[j + 1] = beta[j + 1] / scale[j];
        coefficients[0] -= beta[j + 1] * center[j] / scale[j];
    }
    Ok(LogisticFit {
        coefficients,
        converged,
        iterations,
    })
}

/// Inverse-logit of the linear predictor, clipped to `[clip, 1 − clip]`.
pub fn predict_propensity(fit: &LogisticFit, x: &Matrix, clip: f64) -> Result<Vec<f64>> {
    if !(clip > 0.0 && clip < 0.5) {
        return Err(Error::Config(alloc::format!("clip must lie in (0, 0.5), got {clip}")));
    }
    if fit.coefficients.len() != x.cols() + 1 {
        return Err(Error::DimensionMismatch {
            expected: fit.coefficients.len() - 1,
            found: x.cols(),
        });
    }
    Ok(x
        .iter_rows()
        .map(|r| sigmoid(fit.linear_predictor(r)).clamp(clip, 1.0 - clip))
        .collect())
}
