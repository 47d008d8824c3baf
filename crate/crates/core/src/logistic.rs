//! Weighted, optionally ridge-penalized logistic regression solved by damped
//! Newton iterations with step halving.
//!
//! Maximizes `Σ_r w_r (y_r η_r − ln(1 + e^{η_r})) − ½ λ ‖β_{1..}‖²` where
//! `η_r = x_rᵀβ` and the intercept (column 0) is not penalized.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::distributions::{sigmoid, softplus};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    pub max_iterations: usize,
    /// Stop once the gradient's ∞-norm falls below this.
    pub gradient_tolerance: f64,
    pub ridge: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            gradient_tolerance: 1e-6,
            ridge: 1e-8,
        }
    }
}

/// Rows of a (possibly expanded) design with outcomes and case weights.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightedDesign {
    n_cols: usize,
    rows: Vec<f64>,
    outcomes: Vec<u8>,
    weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub beta: Vec<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
}

impl WeightedDesign {
    pub fn new(n_cols: usize) -> Self {
        Self {
            n_cols,
            ..Self::default()
        }
    }

    pub fn push(&mut self, row: &[f64], outcome: u8, weight: f64) {
        debug_assert_eq!(row.len(), self.n_cols);
        self.rows.extend_from_slice(row);
        self.outcomes.push(outcome);
        self.weights.push(weight);
    }

    pub fn n_rows(&self) -> usize {
        self.outcomes.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    fn row(&self, r: usize) -> &[f64] {
        &self.rows[r * self.n_cols..(r + 1) * self.n_cols]
    }

    fn eta(&self, r: usize, beta: &[f64]) -> f64 {
        self.row(r).iter().zip(beta).map(|(x, b)| x * b).sum()
    }

    pub fn objective(&self, beta: &[f64], ridge: f64) -> f64 {
        let ll: f64 = (0..self.n_rows())
            .filter(|&r| self.weights[r] != 0.0)
            .map(|r| {
                let eta = self.eta(r, beta);
                self.weights[r] * (f64::from(self.outcomes[r]) * eta - softplus(eta))
            })
            .sum();
        ll - 0.5 * ridge * beta[1..].iter().map(|b| b * b).sum::<f64>()
    }

    pub fn gradient(&self, beta: &[f64], ridge: f64) -> Vec<f64> {
        let mut g = vec![0.0; self.n_cols];
        for r in 0..self.n_rows() {
            let w = self.weights[r];
            if w == 0.0 {
                continue;
            }
            let resid = w * (f64::from(self.outcomes[r]) - sigmoid(self.eta(r, beta)));
            for (gj, x) in g.iter_mut().zip(self.row(r)) {
                *gj += resid * x;
            }
        }
        for (gj, b) in g.iter_mut().zip(beta).skip(1) {
            *gj -= ridge * b;
        }
        g
    }

    /// Negative Hessian `Σ w σ(1−σ) x xᵀ + λ I'`.
    fn information(&self, beta: &[f64], ridge: f64) -> DMatrix<f64> {
        let p = self.n_cols;
        let mut info = DMatrix::zeros(p, p);
        for r in 0..self.n_rows() {
            let w = self.weights[r];
            if w == 0.0 {
                continue;
            }
            let s = sigmoid(self.eta(r, beta));
            let c = w * s * (1.0 - s);
            if c == 0.0 {
                continue;
            }
            let x = self.row(r);
            for a in 0..p {
                let ca = c * x[a];
                for b in 0..=a {
                    info[(a, b)] += ca * x[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                info[(b, a)] = info[(a, b)];
            }
        }
        for a in 1..p {
            info[(a, a)] += ridge;
        }
        info
    }

    /// Damped Newton ascent from `start`.
    pub fn maximize(&self, start: &[f64], cfg: &NewtonConfig) -> Result<NewtonOutcome> {
        if start.len() != self.n_cols {
            return Err(Error::Dimension(format!(
                "start has {} entries, design has {} columns",
                start.len(),
                self.n_cols
            )));
        }
        let mut beta = start.to_vec();
        let mut obj = self.objective(&beta, cfg.ridge);
        if !obj.is_finite() {
            return Err(Error::NonConvergence("objective is not finite at the start".into()));
        }
        let mut grad = self.gradient(&beta, cfg.ridge);
        let mut iterations = 0;
        while inf_norm(&grad) >= cfg.gradient_tolerance && iterations < cfg.max_iterations {
            iterations += 1;
            let step = self.newton_direction(&beta, &grad, cfg.ridge);
            let predicted: f64 = grad.iter().zip(&step).map(|(g, s)| g * s).sum();
            if predicted.abs() <= 1e-12 * obj.abs().max(1.0) {
                // the gain is below the objective's rounding error, so the
                // line search cannot judge it; the Newton step is exact here
                for (b, s) in beta.iter_mut().zip(&step) {
                    *b += s;
                }
                grad = self.gradient(&beta, cfg.ridge);
                break;
            }
            let mut scale = 1.0;
            let mut improved = false;
            for _ in 0..40 {
                let trial: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
                let trial_obj = self.objective(&trial, cfg.ridge);
                if trial_obj.is_finite() && trial_obj >= obj {
                    beta = trial;
                    obj = trial_obj;
                    improved = true;
                    break;
                }
                scale *= 0.5;
            }
            grad = self.gradient(&beta, cfg.ridge);
            if !improved {
                break;
            }
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonConvergence("coefficients diverged".into()));
        }
        let gradient_norm = inf_norm(&grad);
        Ok(NewtonOutcome {
            converged: gradient_norm < cfg.gradient_tolerance,
            beta,
            iterations,
            gradient_norm,
        })
    }

    fn newton_direction(&self, beta: &[f64], grad: &[f64], ridge: f64) -> Vec<f64> {
        let info = self.information(beta, ridge);
        let g = DVector::from_column_slice(grad);
        let mut jitter = 0.0;
        let scale = info.diagonal().amax().max(1.0);
        loop {
            let m = if jitter > 0.0 {
                &info + DMatrix::identity(info.nrows(), info.ncols()) * jitter
            } else {
                info.clone()
            };
            if let Some(chol) = Cholesky::<f64, Dyn>::new(m) {
                return chol.solve(&g).iter().copied().collect();
            }
            jitter = if jitter == 0.0 { 1e-10 * scale } else { jitter * 100.0 };
            if jitter > scale {
                // fall back to a scaled gradient step
                return grad.iter().map(|v| v / scale).collect();
            }
        }
    }
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
