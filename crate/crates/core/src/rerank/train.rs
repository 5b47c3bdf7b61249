//! Ridge-penalized logistic regression fitted by Newton's method (IRLS) with
//! step halving.
//!
//! The maximized objective is
//!
//! ```text
//! sum_i [ y_i z_i - ln(1 + e^{z_i}) ] - (l2 / 2) * |beta|^2
//! ```
//!
//! over the coefficients active in the chosen feature set. The intercept is
//! penalized too, so one-class data has a finite optimum whenever `l2 > 0`.

use thiserror::Error;

use super::model::{FeatureSet, ModelCoefficients, ModelSource};
use super::{sigmoid, TrainingInstance};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub l2: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            l2: 1e-6,
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub coefficients: ModelCoefficients,
    pub iterations: usize,
    pub grad_norm: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error("no training instances")]
    Empty,
    #[error("degenerate training data: every label is {class}; set l2 > 0 to fit anyway")]
    Degenerate { class: u8 },
    #[error("invalid training option: {0}")]
    InvalidOptions(String),
    #[error("singular Hessian at iteration {iteration}")]
    Singular { iteration: usize },
    #[error(
        "no convergence after {iterations} iterations (gradient norm {grad_norm:.3e}, last iterate {coefficients:?})"
    )]
    NotConverged {
        iterations: usize,
        coefficients: [f64; 4],
        grad_norm: f64,
    },
}

fn masked_dot(beta: &[f64; 4], x: &[f64; 4], mask: &[bool; 4]) -> f64 {
    (0..4).filter(|&j| mask[j]).map(|j| beta[j] * x[j]).sum()
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Penalized log-likelihood at `beta`. Inactive coefficients are ignored.
pub fn objective(data: &[TrainingInstance], fs: FeatureSet, l2: f64, beta: &[f64; 4]) -> f64 {
    let mask = fs.active();
    let ll: f64 = data
        .iter()
        .map(|inst| {
            let z = masked_dot(beta, &inst.features.design_row(), &mask);
            f64::from(inst.label) * z - softplus(z)
        })
        .sum();
    let penalty: f64 = (0..4).filter(|&j| mask[j]).map(|j| beta[j] * beta[j]).sum();
    ll - 0.5 * l2 * penalty
}

/// Analytic gradient of [`objective`]; inactive entries are 0.
pub fn gradient(data: &[TrainingInstance], fs: FeatureSet, l2: f64, beta: &[f64; 4]) -> [f64; 4] {
    let mask = fs.active();
    let mut g = [0.0; 4];
    for inst in data {
        let x = inst.features.design_row();
        let resid = f64::from(inst.label) - sigmoid(masked_dot(beta, &x, &mask));
        for j in 0..4 {
            g[j] += resid * x[j];
        }
    }
    for j in 0..4 {
        g[j] = if mask[j] { g[j] - l2 * beta[j] } else { 0.0 };
    }
    g
}

/// Negative Hessian restricted to the active coordinates `idx`.
#[allow(clippy::needless_range_loop)]
fn information(
    data: &[TrainingInstance],
    idx: &[usize],
    l2: f64,
    beta: &[f64; 4],
    mask: &[bool; 4],
) -> Vec<Vec<f64>> {
    let d = idx.len();
    let mut h = vec![vec![0.0; d]; d];
    for inst in data {
        let x = inst.features.design_row();
        let p = sigmoid(masked_dot(beta, &x, mask));
        let w = p * (1.0 - p);
        for a in 0..d {
            for b in 0..=a {
                h[a][b] += w * x[idx[a]] * x[idx[b]];
            }
        }
    }
    for a in 0..d {
        h[a][a] += l2;
        for b in 0..a {
            h[b][a] = h[a][b];
        }
    }
    h
}

/// Solves `h x = rhs` for symmetric positive definite `h` by Cholesky.
fn cholesky_solve(h: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let d = rhs.len();
    let mut l = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let v = h[i][i] - s;
                if v <= f64::EPSILON * h[i][i].abs().max(1.0) {
                    return None;
                }
                l[i][j] = v.sqrt();
            } else {
                l[i][j] = (h[i][j] - s) / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; d];
    for i in 0..d {
        let s: f64 = (0..i).map(|k| l[i][k] * y[k]).sum();
        y[i] = (rhs[i] - s) / l[i][i];
    }
    let mut x = vec![0.0; d];
    for i in (0..d).rev() {
        let s: f64 = (i + 1..d).map(|k| l[k][i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i][i];
    }
    Some(x)
}

fn norm(v: &[f64; 4]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Fits a model on `data`. Deterministic.
pub fn train(
    data: &[TrainingInstance],
    feature_set: FeatureSet,
    opts: &TrainOptions,
) -> Result<TrainedModel, TrainError> {
    if !(opts.l2.is_finite() && opts.l2 >= 0.0) {
        return Err(TrainError::InvalidOptions(format!(
            "l2 must be >= 0, got {}",
            opts.l2
        )));
    }
    if !(opts.tol.is_finite() && opts.tol > 0.0) {
        return Err(TrainError::InvalidOptions(format!(
            "tol must be > 0, got {}",
            opts.tol
        )));
    }
    if opts.max_iter == 0 {
        return Err(TrainError::InvalidOptions("max_iter must be >= 1".into()));
    }
    if data.is_empty() {
        return Err(TrainError::Empty);
    }
    let positives = data.iter().filter(|i| i.label == 1).count();
    if opts.l2 == 0.0 && (positives == 0 || positives == data.len()) {
        return Err(TrainError::Degenerate {
            class: u8::from(positives > 0),
        });
    }

    let mask = feature_set.active();
    let idx: Vec<usize> = (0..4).filter(|&j| mask[j]).collect();
    let mut beta = [0.0; 4];
    let mut grad_norm = f64::INFINITY;

    let finish = |beta: [f64; 4], iterations: usize, grad_norm: f64| {
        let coefficients = ModelCoefficients::new(beta, feature_set, ModelSource::Trained)
            .map_err(|_| TrainError::NotConverged {
                iterations,
                coefficients: beta,
                grad_norm,
            })?;
        Ok(TrainedModel {
            coefficients,
            iterations,
            grad_norm,
        })
    };

    for iteration in 1..=opts.max_iter {
        let g = gradient(data, feature_set, opts.l2, &beta);
        grad_norm = norm(&g);
        if grad_norm < opts.tol {
            return finish(beta, iteration - 1, grad_norm);
        }
        let h = information(data, &idx, opts.l2, &beta, &mask);
        let rhs: Vec<f64> = idx.iter().map(|&j| g[j]).collect();
        let step = cholesky_solve(&h, &rhs).ok_or(TrainError::Singular { iteration })?;

        let current = objective(data, feature_set, opts.l2, &beta);
        let mut t = 1.0;
        let mut next = beta;
        for _ in 0..60 {
            next = beta;
            for (k, &j) in idx.iter().enumerate() {
                next[j] += t * step[k];
            }
            if objective(data, feature_set, opts.l2, &next) >= current {
                break;
            }
            t *= 0.5;
        }
        let max_change = idx
            .iter()
            .map(|&j| (next[j] - beta[j]).abs())
            .fold(0.0, f64::max);
        beta = next;
        if max_change < opts.tol {
            grad_norm = norm(&gradient(data, feature_set, opts.l2, &beta));
            return finish(beta, iteration, grad_norm);
        }
    }

    Err(TrainError::NotConverged {
        iterations: opts.max_iter,
        coefficients: beta,
        grad_norm,
    })
}
