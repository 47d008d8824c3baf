//! Probability kernels: logistic link, multivariate Gaussian (joint,
//! conditional, sampling) and categorical distributions.
//!
//! Everything that can underflow is computed in the log domain.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Stand-in for `ln 0` so zero-probability levels stay finite in sums.
pub const LOG_ZERO: f64 = -1.0e300;

pub fn is_log_zero(v: f64) -> bool {
    v <= LOG_ZERO
}

/// `ln(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln p(y | logit z)` for a Bernoulli outcome.
pub fn bernoulli_logpmf(y: u8, z: f64) -> f64 {
    if y == 1 {
        -softplus(-z)
    } else {
        -softplus(z)
    }
}

/// `p(y | logit z)`; the two outcomes sum to exactly one.
pub fn bernoulli_prob(y: u8, z: f64) -> f64 {
    let p1 = sigmoid(z);
    if y == 1 {
        p1
    } else {
        1.0 - p1
    }
}

/// `βᵀ[1, xᵀ]ᵀ`.
pub fn logit(beta: &[f64], x: &[f64]) -> Result<f64> {
    if beta.len() != x.len() + 1 {
        return Err(Error::Dimension(format!(
            "beta has {} entries, expected 1 + {}",
            beta.len(),
            x.len()
        )));
    }
    Ok(beta[0] + beta[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>())
}

/// `p(y = 1 | x; β)` with the intercept prepended to `x`.
pub fn sigmoid_logodds(beta: &[f64], x: &[f64]) -> Result<f64> {
    logit(beta, x).map(sigmoid)
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    log_sum_exp_iter(values.iter().copied())
}

/// Single-pass `ln Σ exp(v)` with a running maximum.
pub fn log_sum_exp_iter(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for v in values {
        if v <= max {
            sum += (v - max).exp();
        } else if max == f64::NEG_INFINITY {
            max = v;
            sum = 1.0;
        } else {
            sum = sum * (max - v).exp() + 1.0;
            max = v;
        }
    }
    if !max.is_finite() {
        return max;
    }
    max + sum.ln()
}

/// Lower Cholesky factor with its log-determinant.
#[derive(Debug, Clone, PartialEq)]
struct Factor {
    lower: DMatrix<f64>,
    log_det: f64,
}

impl Factor {
    fn new(m: &DMatrix<f64>) -> Option<Self> {
        let chol = Cholesky::<f64, Dyn>::new(m.clone())?;
        let lower = chol.l();
        let log_det = 2.0 * lower.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        log_det.is_finite().then_some(Self { lower, log_det })
    }

    /// `(x − μ)ᵀ Σ⁻¹ (x − μ)` given the centered vector.
    fn quadratic_form(&self, centered: &DVector<f64>) -> f64 {
        self.quadratic_form_with(|i| centered[i])
    }

    /// Forward substitution on `L z = c` without allocating for small
    /// dimensions, returning `‖z‖²`.
    fn quadratic_form_with(&self, centered: impl Fn(usize) -> f64) -> f64 {
        let h = self.lower.nrows();
        let mut stack = [0.0; STACK_DIM];
        let mut heap = Vec::new();
        let z: &mut [f64] = if h <= STACK_DIM {
            &mut stack[..h]
        } else {
            heap.resize(h, 0.0);
            &mut heap
        };
        let mut total = 0.0;
        for i in 0..h {
            let mut v = centered(i);
            for k in 0..i {
                v -= self.lower[(i, k)] * z[k];
            }
            v /= self.lower[(i, i)];
            z[i] = v;
            total += v * v;
        }
        total
    }

    fn logpdf_centered(&self, centered: &DVector<f64>) -> f64 {
        let h = centered.len() as f64;
        -0.5 * (h * LN_2PI + self.log_det + self.quadratic_form(centered))
    }

    fn draw<R: Rng + ?Sized>(&self, mean: &DVector<f64>, rng: &mut R) -> Vec<f64> {
        let h = mean.len();
        let mut stack = [0.0; STACK_DIM];
        let mut heap = Vec::new();
        let z: &mut [f64] = if h <= STACK_DIM {
            &mut stack[..h]
        } else {
            heap.resize(h, 0.0);
            &mut heap
        };
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        (0..h)
            .map(|i| mean[i] + (0..=i).map(|k| self.lower[(i, k)] * z[k]).sum::<f64>())
            .collect()
    }
}

const STACK_DIM: usize = 16;

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Factor `m` after symmetrization, adding a single ridge of
/// `1e-8·trace/h` (or `1e-8` when the trace is not positive) on failure.
fn factor_with_repair(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, Factor)> {
    let sym = symmetrize(m);
    if let Some(f) = Factor::new(&sym) {
        return Ok((sym, f));
    }
    let h = sym.nrows().max(1) as f64;
    let scale = sym.trace() / h;
    let ridge = 1e-8 * if scale > 0.0 && scale.is_finite() { scale } else { 1.0 };
    let repaired = &sym + DMatrix::identity(sym.nrows(), sym.ncols()) * ridge;
    match Factor::new(&repaired) {
        Some(f) => Ok((repaired, f)),
        None => Err(Error::NotPositiveDefinite(format!(
            "Cholesky failed after adding a ridge of {ridge:e}"
        ))),
    }
}

/// Mean and SPD covariance of the continuous covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GaussianRepr", into = "GaussianRepr")]
pub struct GaussianParams {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    factor: Factor,
}

#[derive(Serialize, Deserialize)]
struct GaussianRepr {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

impl TryFrom<GaussianRepr> for GaussianParams {
    type Error = Error;

    fn try_from(r: GaussianRepr) -> Result<Self> {
        let h = r.mean.len();
        if r.cov.len() != h || r.cov.iter().any(|row| row.len() != h) {
            return Err(Error::Dimension(format!("covariance is not {h}×{h}")));
        }
        let cov = DMatrix::from_fn(h, h, |i, j| r.cov[i][j]);
        GaussianParams::new(r.mean, cov)
    }
}

impl From<GaussianParams> for GaussianRepr {
    fn from(g: GaussianParams) -> Self {
        let h = g.dim();
        Self {
            mean: g.mean.iter().copied().collect(),
            cov: (0..h).map(|i| (0..h).map(|j| g.cov[(i, j)]).collect()).collect(),
        }
    }
}

impl GaussianParams {
    /// Strict constructor: `cov` must be symmetric (relative 1e-10) and
    /// admit a Cholesky factorization.
    pub fn new(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let h = mean.len();
        if cov.nrows() != h || cov.ncols() != h {
            return Err(Error::Dimension(format!(
                "mean has {h} entries, covariance is {}×{}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        let scale = cov.amax().max(f64::MIN_POSITIVE);
        if (&cov - cov.transpose()).amax() > 1e-10 * scale {
            return Err(Error::NotPositiveDefinite("covariance is not symmetric".into()));
        }
        let cov = symmetrize(&cov);
        let factor = Factor::new(&cov)
            .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization failed".into()))?;
        Ok(Self {
            mean: DVector::from_vec(mean),
            cov,
            factor,
        })
    }

    /// Constructor that symmetrizes and, if needed, adds one small ridge.
    pub fn repaired(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let h = mean.len();
        if cov.nrows() != h || cov.ncols() != h {
            return Err(Error::Dimension(format!("covariance is not {h}×{h}")));
        }
        let (cov, factor) = factor_with_repair(&cov)?;
        Ok(Self {
            mean: DVector::from_vec(mean),
            cov,
            factor,
        })
    }

    pub fn standard(h: usize) -> Self {
        Self::new(vec![0.0; h], DMatrix::identity(h, h)).expect("identity is SPD")
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn log_det(&self) -> f64 {
        self.factor.log_det
    }

    pub fn logpdf(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "point has {} coordinates, Gaussian has {}",
                x.len(),
                self.dim()
            )));
        }
        let centered = DVector::from_column_slice(x) - &self.mean;
        Ok(self.factor.logpdf_centered(&centered))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.factor.draw(&self.mean, rng)
    }

    /// Precompute the conditioning of the `mis` block on the `obs` block.
    pub fn plan(&self, obs_idx: &[usize], mis_idx: &[usize]) -> Result<ConditionalPlan> {
        ConditionalPlan::new(self, obs_idx, mis_idx)
    }

    /// Distribution of `x[mis_idx]` given `x[obs_idx] = obs_vals`.
    pub fn conditional(
        &self,
        obs_idx: &[usize],
        obs_vals: &[f64],
        mis_idx: &[usize],
    ) -> Result<ConditionalGaussian> {
        self.plan(obs_idx, mis_idx)?.condition(obs_vals)
    }
}

/// The value-independent part of conditioning a Gaussian on an observed
/// block: regression matrix `Σ_mo Σ_oo⁻¹`, the Schur complement, and the
/// factor of the observed marginal. Shared by every sample with the same
/// missingness pattern.
#[derive(Debug, Clone)]
pub struct ConditionalPlan {
    obs_idx: Vec<usize>,
    mis_idx: Vec<usize>,
    mean_obs: DVector<f64>,
    mean_mis: DVector<f64>,
    gain: DMatrix<f64>,
    cov: DMatrix<f64>,
    factor: Factor,
    obs_factor: Option<Factor>,
}

impl ConditionalPlan {
    fn new(g: &GaussianParams, obs_idx: &[usize], mis_idx: &[usize]) -> Result<Self> {
        let h = g.dim();
        let mut seen = vec![false; h];
        for &k in obs_idx.iter().chain(mis_idx) {
            if k >= h || std::mem::replace(&mut seen[k], true) {
                return Err(Error::Dimension(format!(
                    "observed/missing indices do not partition 0..{h}"
                )));
            }
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::Dimension(format!(
                "observed/missing indices do not partition 0..{h}"
            )));
        }
        let sub = |rows: &[usize], cols: &[usize]| {
            DMatrix::from_fn(rows.len(), cols.len(), |a, b| g.cov[(rows[a], cols[b])])
        };
        let pick = |idx: &[usize]| DVector::from_iterator(idx.len(), idx.iter().map(|&k| g.mean[k]));
        let s_mm = sub(mis_idx, mis_idx);
        let (gain, cov, obs_factor) = if obs_idx.is_empty() {
            (DMatrix::zeros(mis_idx.len(), 0), s_mm, None)
        } else {
            let s_oo = sub(obs_idx, obs_idx);
            let s_mo = sub(mis_idx, obs_idx);
            let chol = Cholesky::<f64, Dyn>::new(s_oo.clone()).ok_or_else(|| {
                Error::NotPositiveDefinite("observed covariance block is singular".into())
            })?;
            // Σ_mo Σ_oo⁻¹ = (Σ_oo⁻¹ Σ_om)ᵀ
            let gain = chol.solve(&s_mo.transpose()).transpose();
            let cov = &s_mm - &gain * s_mo.transpose();
            let obs_factor = Factor::new(&s_oo);
            (gain, cov, obs_factor)
        };
        let (cov, factor) = if mis_idx.is_empty() {
            (cov, Factor::new(&DMatrix::zeros(0, 0)).expect("empty factor"))
        } else {
            factor_with_repair(&cov)?
        };
        Ok(Self {
            obs_idx: obs_idx.to_vec(),
            mis_idx: mis_idx.to_vec(),
            mean_obs: pick(obs_idx),
            mean_mis: pick(mis_idx),
            gain,
            cov,
            factor,
            obs_factor,
        })
    }

    pub fn n_missing(&self) -> usize {
        self.mis_idx.len()
    }

    pub fn condition(&self, obs_vals: &[f64]) -> Result<ConditionalGaussian> {
        if obs_vals.len() != self.obs_idx.len() {
            return Err(Error::Dimension(format!(
                "{} observed values for {} observed indices",
                obs_vals.len(),
                self.obs_idx.len()
            )));
        }
        let mut mean = self.mean_mis.clone();
        if !self.obs_idx.is_empty() {
            let resid = DVector::from_column_slice(obs_vals) - &self.mean_obs;
            mean += &self.gain * resid;
        }
        Ok(ConditionalGaussian {
            mean,
            cov: self.cov.clone(),
            factor: self.factor.clone(),
            obs_idx: self.obs_idx.clone(),
            mis_idx: self.mis_idx.clone(),
        })
    }

    /// Log-density of the observed block under its marginal.
    pub fn observed_logpdf(&self, obs_vals: &[f64]) -> f64 {
        match &self.obs_factor {
            None => 0.0,
            Some(f) => f.logpdf_centered(&(DVector::from_column_slice(obs_vals) - &self.mean_obs)),
        }
    }
}

/// `x_mis | x_obs ~ N(μ_i, Σ_i)`.
#[derive(Debug, Clone)]
pub struct ConditionalGaussian {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    factor: Factor,
    obs_idx: Vec<usize>,
    mis_idx: Vec<usize>,
}

impl ConditionalGaussian {
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn missing_indices(&self) -> &[usize] {
        &self.mis_idx
    }

    pub fn observed_indices(&self) -> &[usize] {
        &self.obs_idx
    }

    pub fn dim(&self) -> usize {
        self.mis_idx.len()
    }

    pub fn logpdf(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        let h = x.len() as f64;
        let q = self.factor.quadratic_form_with(|i| x[i] - self.mean[i]);
        -0.5 * (h * LN_2PI + self.factor.log_det + q)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.factor.draw(&self.mean, rng)
    }
}

/// `−½(h ln 2π + ln|Σ| + (x−μ)ᵀΣ⁻¹(x−μ))`.
pub fn gaussian_logpdf(g: &GaussianParams, x: &[f64]) -> Result<f64> {
    g.logpdf(x)
}

pub fn gaussian_conditional(
    g: &GaussianParams,
    obs_idx: &[usize],
    obs_vals: &[f64],
    mis_idx: &[usize],
) -> Result<ConditionalGaussian> {
    g.conditional(obs_idx, obs_vals, mis_idx)
}

pub fn gaussian_sample<R: Rng + ?Sized>(g: &GaussianParams, rng: &mut R) -> Vec<f64> {
    g.sample(rng)
}

/// Probability vector over levels `1..=M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CategoricalParams {
    probs: Vec<f64>,
}

impl TryFrom<Vec<f64>> for CategoricalParams {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        Self::new(probs)
    }
}

impl From<CategoricalParams> for Vec<f64> {
    fn from(c: CategoricalParams) -> Self {
        c.probs
    }
}

impl CategoricalParams {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "categorical needs at least 2 levels, got {}",
                probs.len()
            )));
        }
        if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidParameter(format!("negative or non-finite probability in {probs:?}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self { probs })
    }

    pub fn uniform(m: usize) -> Self {
        Self::new(vec![1.0 / m as f64; m]).expect("uniform simplex")
    }

    pub fn n_levels(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Probability of `level` (1-based).
    pub fn prob(&self, level: usize) -> f64 {
        self.probs[level - 1]
    }

    /// `ln θ(level)`, or [`LOG_ZERO`] when the level has probability 0.
    pub fn logpmf(&self, level: usize) -> Result<f64> {
        if level == 0 || level > self.probs.len() {
            return Err(Error::InvalidParameter(format!(
                "level {level} outside 1..={}",
                self.probs.len()
            )));
        }
        let p = self.probs[level - 1];
        Ok(if p > 0.0 { p.ln() } else { LOG_ZERO })
    }

    /// Inverse-CDF draw of a level in `1..=M`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut cum = 0.0;
        for (m, &p) in self.probs.iter().enumerate() {
            cum += p;
            if u < cum {
                return m + 1;
            }
        }
        // rounding left u above the final cumulative sum
        self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0) + 1
    }
}

pub fn categorical_logpmf(c: &CategoricalParams, level: usize) -> Result<f64> {
    c.logpmf(level)
}

pub fn categorical_sample<R: Rng + ?Sized>(c: &CategoricalParams, rng: &mut R) -> usize {
    c.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn mat(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
    }

    #[test]
    fn sigmoid_examples() {
        assert_eq!(sigmoid_logodds(&[0.0; 4], &[1.0, -2.0, 3.0]).unwrap(), 0.5);
        assert_eq!(sigmoid_logodds(&[0.0, 1.0], &[0.0]).unwrap(), 0.5);
        let beta = [0.0, -0.9, 0.01, 0.1, -0.6, 0.3, 0.01, 0.8];
        assert_eq!(sigmoid_logodds(&beta, &[0.0; 7]).unwrap(), 0.5);
        assert!(sigmoid_logodds(&beta, &[0.0; 6]).is_err());
    }

    #[test]
    fn link_is_stable_at_extremes() {
        for z in [-700.0, -50.0, 50.0, 700.0, 1e4, -1e4] {
            let p = sigmoid(z);
            assert!((0.0..=1.0).contains(&p));
            assert!(softplus(z).is_finite());
            assert!(bernoulli_logpmf(1, z).is_finite());
            assert!(bernoulli_logpmf(0, z).is_finite());
        }
        assert_abs_diff_eq!(softplus(700.0), 700.0, epsilon = 1e-12);
        assert_abs_diff_eq!(bernoulli_logpmf(1, -700.0), -700.0, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_logpdf_examples() {
        let g = GaussianParams::standard(1);
        assert_abs_diff_eq!(gaussian_logpdf(&g, &[0.0]).unwrap(), -0.918_938_533_204_672_7, epsilon = 1e-12);

        let cov = mat(&[&[2.0, 0.3], &[0.3, 1.5]]);
        let g = GaussianParams::new(vec![1.0, -1.0], cov.clone()).unwrap();
        let expect = -0.5 * (2.0 * LN_2PI + cov.determinant().ln());
        assert_abs_diff_eq!(gaussian_logpdf(&g, &[1.0, -1.0]).unwrap(), expect, epsilon = 1e-12);

        let g = GaussianParams::new(vec![0.5, 0.5], DMatrix::identity(2, 2)).unwrap();
        assert_abs_diff_eq!(gaussian_logpdf(&g, &[1.5, 1.5]).unwrap(), -(LN_2PI + 1.0), epsilon = 1e-12);
    }

    #[test]
    fn gaussian_rejects_bad_covariance() {
        assert!(GaussianParams::new(vec![0.0], mat(&[&[0.0]])).is_err());
        assert!(GaussianParams::new(vec![0.0, 0.0], mat(&[&[1.0, 0.5], &[0.2, 1.0]])).is_err());
        assert!(GaussianParams::new(vec![0.0, 0.0], mat(&[&[1.0, 2.0], &[2.0, 1.0]])).is_err());
        // zero matrix is repaired with the fallback ridge
        let g = GaussianParams::repaired(vec![0.0, 0.0], DMatrix::zeros(2, 2)).unwrap();
        assert_abs_diff_eq!(g.cov()[(0, 0)], 1e-8, epsilon = 1e-20);
        // indefinite matrix is beyond a single small ridge
        assert!(GaussianParams::repaired(vec![0.0, 0.0], mat(&[&[1.0, 2.0], &[2.0, 1.0]])).is_err());
    }

    #[test]
    fn conditional_examples() {
        let g = GaussianParams::new(vec![0.0, 0.0], mat(&[&[1.0, 0.5], &[0.5, 1.0]])).unwrap();
        let c = gaussian_conditional(&g, &[1], &[2.0], &[0]).unwrap();
        assert_abs_diff_eq!(c.mean()[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(c.cov()[(0, 0)], 0.75, epsilon = 1e-14);

        let diag = GaussianParams::new(
            vec![1.0, 2.0, 3.0],
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0])),
        )
        .unwrap();
        for z in [-5.0, 0.0, 7.0] {
            let c = diag.conditional(&[0, 2], &[z, -z], &[1]).unwrap();
            assert_abs_diff_eq!(c.mean()[0], 2.0, epsilon = 1e-14);
            assert_abs_diff_eq!(c.cov()[(0, 0)], 2.0, epsilon = 1e-14);
        }

        let c = diag.conditional(&[], &[], &[0, 1, 2]).unwrap();
        assert_eq!(c.mean(), diag.mean());
        assert_eq!(c.cov(), diag.cov());

        assert!(diag.conditional(&[0], &[1.0], &[0, 1]).is_err());
        assert!(diag.conditional(&[0], &[1.0], &[1]).is_err());
    }

    #[test]
    fn conditional_rejects_singular_observed_block() {
        let g = GaussianParams::repaired(vec![0.0; 3], mat(&[&[1.0, 1.0, 0.0], &[1.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]))
            .unwrap();
        // repaired Σ is barely SPD, so conditioning works; a truly singular
        // observed block is caught at the plan level
        assert!(g.conditional(&[0, 1], &[0.0, 0.0], &[2]).is_ok());
        let g = GaussianParams {
            mean: DVector::zeros(2),
            cov: DMatrix::zeros(2, 2),
            factor: Factor::new(&DMatrix::identity(2, 2)).unwrap(),
        };
        assert!(matches!(g.conditional(&[0], &[0.0], &[1]), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn gaussian_sample_mean_within_clt_band() {
        let g = GaussianParams::standard(3);
        let mut rng = rng::stream(11, &[1]);
        let n = 100_000;
        let mut sum = [0.0; 3];
        for _ in 0..n {
            for (s, v) in sum.iter_mut().zip(gaussian_sample(&g, &mut rng)) {
                *s += v;
            }
        }
        for s in sum {
            assert!((s / n as f64).abs() < 0.02);
        }
    }

    #[test]
    fn categorical_examples() {
        let u = CategoricalParams::uniform(5);
        for level in 1..=5 {
            assert_abs_diff_eq!(categorical_logpmf(&u, level).unwrap(), 0.2f64.ln(), epsilon = 1e-15);
        }
        let c = CategoricalParams::new(vec![0.1, 0.2, 0.3, 0.25, 0.15]).unwrap();
        assert_eq!(categorical_logpmf(&c, 3).unwrap(), 0.3f64.ln());
        assert!(categorical_logpmf(&c, 0).is_err());
        assert!(categorical_logpmf(&c, 6).is_err());

        let degenerate = CategoricalParams::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert!(is_log_zero(degenerate.logpmf(2).unwrap()));
        let mut rng = rng::stream(3, &[]);
        for _ in 0..1000 {
            assert_eq!(categorical_sample(&degenerate, &mut rng), 1);
        }
        assert!(CategoricalParams::new(vec![0.5, 0.6]).is_err());
        assert!(CategoricalParams::new(vec![-0.1, 1.1]).is_err());
    }

    #[test]
    fn categorical_sampling_frequencies() {
        let c = CategoricalParams::new(vec![0.1, 0.2, 0.3, 0.25, 0.15]).unwrap();
        let mut rng = rng::stream(5, &[]);
        let n = 100_000;
        let mut counts = [0usize; 5];
        for _ in 0..n {
            counts[c.sample(&mut rng) - 1] += 1;
        }
        for (k, &p) in c.probs().iter().enumerate() {
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((counts[k] as f64 / n as f64 - p).abs() < 4.0 * sd);
        }
    }

    #[test]
    fn conditional_then_marginal_reproduces_joint_moments() {
        let cov = mat(&[&[2.0, 0.6, -0.4], &[0.6, 1.0, 0.3], &[-0.4, 0.3, 1.5]]);
        let g = GaussianParams::new(vec![1.0, -1.0, 0.5], cov.clone()).unwrap();
        let marginal = GaussianParams::new(vec![0.5], mat(&[&[1.5]])).unwrap();
        let plan = g.plan(&[2], &[0, 1]).unwrap();
        let mut rng = rng::stream(21, &[]);
        let n = 100_000;
        let mut draws = Vec::with_capacity(n);
        for _ in 0..n {
            let xo = marginal.sample(&mut rng);
            let xm = plan.condition(&xo).unwrap().sample(&mut rng);
            draws.push([xm[0], xm[1], xo[0]]);
        }
        let nf = n as f64;
        for a in 0..3 {
            let mean = draws.iter().map(|d| d[a]).sum::<f64>() / nf;
            let se = (cov[(a, a)] / nf).sqrt();
            assert!((mean - g.mean()[a]).abs() < 3.0 * se, "mean {a}");
            for b in a..3 {
                let c = draws
                    .iter()
                    .map(|d| (d[a] - g.mean()[a]) * (d[b] - g.mean()[b]))
                    .sum::<f64>()
                    / nf;
                // Var of a product of jointly Gaussian coordinates
                let var = cov[(a, a)] * cov[(b, b)] + cov[(a, b)].powi(2);
                assert!((c - cov[(a, b)]).abs() < 3.0 * (var / nf).sqrt(), "cov {a}{b}");
            }
        }
    }

    #[test]
    fn observed_marginal_logpdf() {
        let cov = mat(&[&[2.0, 0.6], &[0.6, 1.0]]);
        let g = GaussianParams::new(vec![1.0, -1.0], cov).unwrap();
        let plan = g.plan(&[1], &[0]).unwrap();
        let m = GaussianParams::new(vec![-1.0], mat(&[&[1.0]])).unwrap();
        assert_abs_diff_eq!(plan.observed_logpdf(&[0.3]), m.logpdf(&[0.3]).unwrap(), epsilon = 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn logpdf_integrates_to_one(mu in -3.0f64..3.0, var in 0.05f64..4.0) {
            let g = GaussianParams::new(vec![mu], mat(&[&[var]])).unwrap();
            let sd = var.sqrt();
            let (lo, hi) = (mu - 12.0 * sd, mu + 12.0 * sd);
            let steps = 4000;
            let dx = (hi - lo) / steps as f64;
            // composite Simpson
            let f = |x: f64| g.logpdf(&[x]).unwrap().exp();
            let mut s = f(lo) + f(hi);
            for k in 1..steps {
                let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                s += w * f(lo + k as f64 * dx);
            }
            prop_assert!((s * dx / 3.0 - 1.0).abs() < 1e-3);
        }

        #[test]
        fn bernoulli_complement_sums_to_one(beta in prop::collection::vec(-50.0f64..50.0, 4),
                                            x in prop::collection::vec(-20.0f64..20.0, 3)) {
            let z = logit(&beta, &x).unwrap();
            prop_assert_eq!(sigmoid_logodds(&beta, &x).unwrap(), bernoulli_prob(1, z));
            prop_assert_eq!(bernoulli_prob(1, z) + bernoulli_prob(0, z), 1.0);
        }

        #[test]
        fn categorical_pmf_sums_to_one(raw in prop::collection::vec(0.0f64..1.0, 2..8)) {
            let total: f64 = raw.iter().sum();
            prop_assume!(total > 1e-6);
            let mut probs: Vec<f64> = raw.iter().map(|r| r / total).collect();
            let drift: f64 = probs.iter().sum::<f64>() - 1.0;
            probs[0] = (probs[0] - drift).max(0.0);
            let c = CategoricalParams::new(probs).unwrap();
            let s: f64 = (1..=c.n_levels())
                .map(|m| c.logpmf(m).unwrap())
                .filter(|v| !is_log_zero(*v))
                .map(f64::exp)
                .sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
