//! Stochastic approximation EM for logistic regression with missing discrete
//! and continuous covariates.
//!
//! Each iteration `t`:
//!
//! 1. **S-step**: per sample, draw the missing continuous coordinates with
//!    independence Metropolis–Hastings under `θ^(t−1)`, then compute the
//!    posterior `w̃_i` over the sample's missing discrete combinations.
//! 2. **SA-step**: smooth the Gaussian sufficient statistics `T₁, T₂` and the
//!    weight tables `w_i` with step `δ_t`.
//! 3. **M-step**: `β` by weighted logistic regression over the expanded
//!    design, `μ, Σ` in closed form from `T₁, T₂`, and `θ^d` as observed
//!    counts plus smoothed soft counts.

use std::collections::{BTreeMap, VecDeque};
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{HybridDataset, SampleView};
use crate::distributions::{
    bernoulli_logpmf, log_sum_exp, CategoricalParams, ConditionalPlan, GaussianParams,
};
use crate::error::{Error, Result};
use crate::logistic::{NewtonConfig, WeightedDesign};
use crate::mh::{run_target, MhConfig, MhDiagnostics, MhTarget};
use crate::model::{
    complete_levels, complete_loglik, observed_discrete_logit, ComboTable, Design,
    DiscreteEncoding, ModelParams,
};
use crate::rng;

/// Step-size sequence after the burn-in.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSchedule {
    /// `δ_t = (t − t₁)^{−τ}`.
    #[default]
    Standard,
    /// `δ_t = (t + t₁)^{−τ}`.
    Shifted,
}

/// Which smoothed objective the `β` M-step maximizes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BetaObjective {
    /// Smoothed weights `w^(t)` for samples whose continuous covariates are
    /// all observed; samples with imputed continuous coordinates use the
    /// fresh weights computed at the current imputation. The maximizer is
    /// then smoothed as `β^(t) = β^(t−1) + δ_t(β̃ − β^(t−1))`.
    #[default]
    SmoothedWeights,
    /// Smoothed weights `w^(t)` for every sample, paired with the current
    /// imputations even though they were accumulated at earlier ones.
    SmoothedUnpaired,
    /// Stochastic-approximation mixture of the last `window` per-iteration
    /// objectives, each with its own imputations and fresh weights.
    Replay { window: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaemConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub tau: f64,
    pub schedule: StepSchedule,
    pub mh: MhConfig,
    pub beta_optimizer: NewtonConfig,
    pub beta_objective: BetaObjective,
    pub encoding: DiscreteEncoding,
    pub seed: u64,
    /// Monte-Carlo draws for predictions made with the fitted model.
    pub prediction_samples: usize,
    /// Draws per sample for the trajectory's observed log-likelihood
    /// estimate; 0 records `NaN` instead.
    pub loglik_samples: usize,
}

impl Default for SaemConfig {
    fn default() -> Self {
        Self {
            iterations: 500,
            burn_in: 50,
            tau: 1.0,
            schedule: StepSchedule::Standard,
            mh: MhConfig::default(),
            beta_optimizer: NewtonConfig::default(),
            beta_objective: BetaObjective::SmoothedWeights,
            encoding: DiscreteEncoding::Numeric,
            seed: 0,
            prediction_samples: 200,
            loglik_samples: 0,
        }
    }
}

impl SaemConfig {
    /// `δ_t` for 1-based iteration `t`.
    pub fn step_size(&self, t: usize) -> f64 {
        if t <= self.burn_in {
            return 1.0;
        }
        let base = match self.schedule {
            StepSchedule::Standard => (t - self.burn_in) as f64,
            StepSchedule::Shifted => (t + self.burn_in) as f64,
        };
        base.powf(-self.tau).min(1.0)
    }

    fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("SAEM needs at least one iteration".into()));
        }
        if self.mh.chain_length == 0 {
            return Err(Error::InvalidParameter("MH chain length must be at least 1".into()));
        }
        if !(self.tau > 0.0) {
            return Err(Error::InvalidParameter(format!("decay exponent {} must be positive", self.tau)));
        }
        if let BetaObjective::Replay { window: 0 } = self.beta_objective {
            return Err(Error::InvalidParameter("replay window must be at least 1".into()));
        }
        Ok(())
    }
}

/// Smoothed Gaussian sufficient statistics: `T₁` (mean) and `T₂`
/// (sum of outer products).
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    pub t1: DVector<f64>,
    pub t2: DMatrix<f64>,
}

impl SufficientStats {
    /// `T̃₁ = n⁻¹ Σ x_i`, `T̃₂ = Σ x_i x_iᵀ`.
    pub fn from_imputations(imputed: &[Vec<f64>], h: usize) -> Self {
        let n = imputed.len().max(1) as f64;
        let mut t1 = DVector::zeros(h);
        let mut t2 = DMatrix::zeros(h, h);
        for x in imputed {
            for a in 0..h {
                t1[a] += x[a];
                for b in 0..=a {
                    t2[(a, b)] += x[a] * x[b];
                }
            }
        }
        for a in 0..h {
            for b in 0..a {
                t2[(b, a)] = t2[(a, b)];
            }
        }
        Self { t1: t1 / n, t2 }
    }
}

/// SA update of the sufficient statistics; `prev = None` starts from `T̃`.
pub fn sa_update_stats(prev: Option<&SufficientStats>, imputed: &[Vec<f64>], h: usize, delta: f64) -> SufficientStats {
    let fresh = SufficientStats::from_imputations(imputed, h);
    match prev {
        None => fresh,
        Some(p) => SufficientStats {
            t1: &p.t1 + (fresh.t1 - &p.t1) * delta,
            t2: &p.t2 + (fresh.t2 - &p.t2) * delta,
        },
    }
}

/// Normalized weights over one sample's missing discrete combinations.
/// A sample with no missing discretes carries the single weight `[1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePosterior {
    pub missing: Vec<usize>,
    pub radices: Vec<usize>,
    pub weights: Vec<f64>,
}

impl DiscretePosterior {
    pub fn certain() -> Self {
        Self {
            missing: Vec::new(),
            radices: Vec::new(),
            weights: vec![1.0],
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.missing.is_empty()
    }

    /// Marginal over the levels of the `pos`-th missing coordinate.
    pub fn marginal(&self, pos: usize) -> Vec<f64> {
        let m = self.radices[pos];
        let stride: usize = self.radices[pos + 1..].iter().product();
        let mut out = vec![0.0; m];
        for (c, w) in self.weights.iter().enumerate() {
            out[(c / stride) % m] += w;
        }
        out
    }

    pub fn levels(&self, index: usize) -> Vec<usize> {
        let mut out = vec![0; self.radices.len()];
        crate::model::decode_combo(index, &self.radices, &mut out);
        out
    }
}

/// Posterior weights given fully specified continuous coordinates, using a
/// prepared combination table.
pub fn discrete_posterior_with(
    table: &ComboTable,
    sample: &SampleView,
    continuous: &[f64],
    params: &ModelParams,
) -> DiscretePosterior {
    if table.missing.is_empty() {
        return DiscretePosterior::certain();
    }
    let z = observed_discrete_logit(sample, params) + params.design.continuous_term(&params.beta, continuous);
    let logw: Vec<f64> = table
        .logit_shift
        .iter()
        .zip(&table.log_prior)
        .map(|(s, p)| bernoulli_logpmf(sample.outcome, z + s) + p)
        .collect();
    let norm = log_sum_exp(&logw);
    let mut weights: Vec<f64> = logw.iter().map(|v| (v - norm).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    DiscretePosterior {
        missing: table.missing.clone(),
        radices: table.radices.clone(),
        weights,
    }
}

/// `p(x^d_mis | x^d_obs, x^c, y; θ)` over the enumerated combinations.
pub fn discrete_posterior(
    sample: &SampleView,
    continuous: &[f64],
    params: &ModelParams,
) -> Result<DiscretePosterior> {
    if continuous.len() != params.n_continuous() {
        return Err(Error::Dimension(format!(
            "{} continuous values, model has {}",
            continuous.len(),
            params.n_continuous()
        )));
    }
    let table = ComboTable::new(sample, params)?;
    Ok(discrete_posterior_with(&table, sample, continuous, params))
}

/// Element-wise `w + δ(w̃ − w)` per sample.
pub fn sa_update_weights(
    prev: &[DiscretePosterior],
    fresh: &[DiscretePosterior],
    delta: f64,
) -> Result<Vec<DiscretePosterior>> {
    if prev.len() != fresh.len() {
        return Err(Error::Dimension(format!(
            "{} previous weight tables, {} fresh",
            prev.len(),
            fresh.len()
        )));
    }
    prev.iter()
        .zip(fresh)
        .enumerate()
        .map(|(i, (p, f))| {
            if p.missing != f.missing || p.radices != f.radices {
                return Err(Error::Dimension(format!("weight supports differ for sample {i}")));
            }
            let weights = p
                .weights
                .iter()
                .zip(&f.weights)
                .map(|(a, b)| a + delta * (b - a))
                .collect();
            Ok(DiscretePosterior {
                missing: p.missing.clone(),
                radices: p.radices.clone(),
                weights,
            })
        })
        .collect()
}

/// Expanded design: each sample replicated once per discrete combination
/// with case weight `scale · w_i(combo)`.
pub fn expand_design(
    design: &Design,
    samples: &[SampleView],
    imputations: &[Vec<f64>],
    weights: &[DiscretePosterior],
    scale: f64,
    into: &mut WeightedDesign,
) {
    let l = design.n_discrete();
    let mut row = vec![0.0; design.n_coefficients()];
    let mut combo = Vec::new();
    for ((s, x), w) in samples.iter().zip(imputations).zip(weights) {
        let mut levels = complete_levels(s, l, &[]);
        combo.resize(w.radices.len(), 0);
        for (c, &wc) in w.weights.iter().enumerate() {
            if wc == 0.0 {
                continue;
            }
            crate::model::decode_combo(c, &w.radices, &mut combo);
            for (&j, &m) in w.missing.iter().zip(&combo) {
                levels[j] = m;
            }
            design.write_row(&levels, x, &mut row);
            into.push(&row, s.outcome, scale * wc);
        }
    }
}

/// M-step for `β`: maximize `Σ_i Σ_combo w_i(combo) ln p(y_i | x_i(combo); β)`.
pub fn mstep_beta(
    dataset: &HybridDataset,
    design: &Design,
    imputations: &[Vec<f64>],
    weights: &[DiscretePosterior],
    warm_start: &[f64],
    cfg: &NewtonConfig,
) -> Result<Vec<f64>> {
    let samples = dataset.sample_views();
    let mut wd = WeightedDesign::new(design.n_coefficients());
    expand_design(design, &samples, imputations, weights, 1.0, &mut wd);
    Ok(wd.maximize(warm_start, cfg)?.beta)
}

/// `μ̂ = T₁`, `Σ̂ = T₂/n − T₁T₁ᵀ`, SPD-repaired if needed.
pub fn mstep_gaussian(stats: &SufficientStats, n: usize) -> Result<GaussianParams> {
    let cov = &stats.t2 / n as f64 - &stats.t1 * stats.t1.transpose();
    GaussianParams::repaired(stats.t1.iter().copied().collect(), cov)
}

/// `θ^d_j(m) = n⁻¹(#{observed = m} + Σ_{missing i} w^j_i(m))`.
pub fn mstep_discrete(dataset: &HybridDataset, weights: &[DiscretePosterior]) -> Result<Vec<CategoricalParams>> {
    let n = dataset.n_rows();
    let levels = dataset.schema().discrete_levels();
    let mut counts: Vec<Vec<f64>> = levels.iter().map(|&m| vec![0.0; m]).collect();
    for i in 0..n {
        for (j, c) in counts.iter_mut().enumerate() {
            if dataset.is_observed(i, j) {
                c[dataset.value(i, j) as usize - 1] += 1.0;
            }
        }
        let w = &weights[i];
        for (pos, &j) in w.missing.iter().enumerate() {
            for (m, v) in w.marginal(pos).into_iter().enumerate() {
                counts[j][m] += v;
            }
        }
    }
    counts
        .into_iter()
        .map(|c| {
            let total: f64 = c.iter().sum();
            CategoricalParams::new(c.into_iter().map(|v| v / total).collect())
        })
        .collect()
}

/// Starting point: `β = 0`, available-case Gaussian moments, add-one
/// smoothed level frequencies.
pub fn initial_params(dataset: &HybridDataset, design: Design) -> Result<ModelParams> {
    let l = dataset.n_discrete();
    let h = dataset.n_continuous();
    let n = dataset.n_rows();
    let mut discretes = Vec::with_capacity(l);
    for (j, &m) in dataset.schema().discrete_levels().iter().enumerate() {
        let mut counts = vec![1.0; m];
        for v in dataset.observed_column(j) {
            counts[v as usize - 1] += 1.0;
        }
        let total: f64 = counts.iter().sum();
        discretes.push(CategoricalParams::new(counts.into_iter().map(|c| c / total).collect())?);
    }

    let mut mean = vec![0.0; h];
    for (k, mk) in mean.iter_mut().enumerate() {
        let col = dataset.observed_column(l + k);
        if col.is_empty() {
            return Err(Error::Dataset(format!(
                "column `{}` has no observed values",
                dataset.schema().variables[l + k].name
            )));
        }
        *mk = col.iter().sum::<f64>() / col.len() as f64;
    }
    let mut cov = DMatrix::zeros(h, h);
    for a in 0..h {
        for b in 0..=a {
            let pairs: Vec<(f64, f64)> = (0..n)
                .filter(|&i| dataset.is_observed(i, l + a) && dataset.is_observed(i, l + b))
                .map(|i| (dataset.value(i, l + a), dataset.value(i, l + b)))
                .collect();
            let c = if pairs.len() < 2 {
                if a == b { 1.0 } else { 0.0 }
            } else {
                let k = pairs.len() as f64;
                let ma = pairs.iter().map(|p| p.0).sum::<f64>() / k;
                let mb = pairs.iter().map(|p| p.1).sum::<f64>() / k;
                pairs.iter().map(|p| (p.0 - ma) * (p.1 - mb)).sum::<f64>() / k
            };
            cov[(a, b)] = c;
            cov[(b, a)] = c;
        }
    }
    let gaussian = match GaussianParams::repaired(mean.clone(), cov.clone()) {
        Ok(g) => g,
        // pairwise-complete covariances need not be PSD
        Err(_) => GaussianParams::repaired(
            mean,
            DMatrix::from_diagonal(&cov.diagonal().map(|v| v.max(1e-8))),
        )?,
    };
    ModelParams::new(vec![0.0; design.n_coefficients()], gaussian, discretes, design)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub iteration: usize,
    pub step_size: f64,
    pub beta: Vec<f64>,
    pub loglik: f64,
    pub acceptance_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub mh: MhDiagnostics,
    pub acceptance_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: ModelParams,
    pub trajectory: Vec<TrajectoryPoint>,
    pub diagnostics: FitDiagnostics,
}

impl FitResult {
    /// CSV with columns `iteration, step_size, beta_0..beta_p, loglik, acceptance_rate`.
    pub fn write_trajectory_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let p = self.params.beta.len();
        let mut header = vec!["iteration".to_string(), "step_size".to_string()];
        header.extend((0..p).map(|j| format!("beta_{j}")));
        header.push("loglik".into());
        header.push("acceptance_rate".into());
        writeln!(out, "{}", header.join(",")).map_err(|e| Error::io(path, e))?;
        for pt in &self.trajectory {
            let mut cells = vec![pt.iteration.to_string(), pt.step_size.to_string()];
            cells.extend(pt.beta.iter().map(f64::to_string));
            cells.push(pt.loglik.to_string());
            cells.push(pt.acceptance_rate.to_string());
            writeln!(out, "{}", cells.join(",")).map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

struct SampleDraw {
    continuous: Vec<f64>,
    posterior: DiscretePosterior,
    mh: MhDiagnostics,
}

fn build_plans(
    samples: &[SampleView],
    gaussian: &GaussianParams,
) -> Result<BTreeMap<Vec<usize>, ConditionalPlan>> {
    let mut plans = BTreeMap::new();
    for s in samples {
        if s.continuous_missing.is_empty() || plans.contains_key(&s.continuous_missing) {
            continue;
        }
        let plan = gaussian.plan(&s.continuous_observed_indices(), &s.continuous_missing)?;
        plans.insert(s.continuous_missing.clone(), plan);
    }
    Ok(plans)
}

fn s_step(
    samples: &[SampleView],
    params: &ModelParams,
    cfg: &SaemConfig,
    t: usize,
) -> Result<Vec<SampleDraw>> {
    let h = params.n_continuous();
    let plans = build_plans(samples, &params.gaussian)?;
    samples
        .par_iter()
        .map(|s| {
            if s.continuous_missing.is_empty() {
                let continuous = s.continuous_with(h, &[]);
                let posterior = if s.discrete_missing.is_empty() {
                    DiscretePosterior::certain()
                } else {
                    let table = ComboTable::new(s, params)?;
                    discrete_posterior_with(&table, s, &continuous, params)
                };
                return Ok(SampleDraw {
                    continuous,
                    posterior,
                    mh: MhDiagnostics::default(),
                });
            }
            let target = MhTarget::with_plan(s, params, &plans[&s.continuous_missing])?;
            let mut r = rng::stream(cfg.seed, &[rng::stage::MH, t as u64, s.index as u64]);
            let (x_mis, mh) = run_target(&target, &cfg.mh, &mut r);
            let continuous = s.continuous_with(h, &x_mis);
            let posterior = discrete_posterior_with(target.combos(), s, &continuous, params);
            Ok(SampleDraw {
                continuous,
                posterior,
                mh,
            })
        })
        .collect()
}

/// Weights of the last `len` per-iteration objectives inside the SA-smoothed
/// objective at the current iteration, renormalized after truncation.
fn replay_coefficients(deltas: &[f64]) -> Vec<f64> {
    let mut coef = vec![0.0; deltas.len()];
    let mut carry = 1.0;
    for (c, &d) in coef.iter_mut().zip(deltas).rev() {
        *c = d * carry;
        carry *= 1.0 - d;
    }
    let total: f64 = coef.iter().sum();
    coef.iter().map(|c| c / total).collect()
}

/// Fit `θ̂` by SAEM. Non-convergence is not an error; inspect the trajectory.
pub fn fit_saem(train: &HybridDataset, cfg: &SaemConfig) -> Result<FitResult> {
    cfg.validate()?;
    let n = train.n_rows();
    let (l, h) = (train.n_discrete(), train.n_continuous());
    if n < h + l + 2 {
        return Err(Error::Dataset(format!("{n} samples are too few for {} covariates", h + l)));
    }
    let positives = train.outcomes().iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == n {
        return Err(Error::Dataset("both outcome classes must be present".into()));
    }
    let design = Design::from_schema(train.schema(), cfg.encoding);
    let mut params = initial_params(train, design.clone())?;
    let samples = train.sample_views();

    let mut stats: Option<SufficientStats> = None;
    let mut weights: Vec<DiscretePosterior> = Vec::new();
    let mut history: VecDeque<(Vec<Vec<f64>>, Vec<DiscretePosterior>, f64)> = VecDeque::new();
    let mut trajectory = Vec::with_capacity(cfg.iterations);
    let mut mh_total = MhDiagnostics::default();

    for t in 1..=cfg.iterations {
        let delta = cfg.step_size(t);
        let draws = s_step(&samples, &params, cfg, t)?;
        let mut mh_iter = MhDiagnostics::default();
        let mut imputed = Vec::with_capacity(n);
        let mut fresh = Vec::with_capacity(n);
        for d in draws {
            mh_iter.merge(d.mh);
            imputed.push(d.continuous);
            fresh.push(d.posterior);
        }
        mh_total.merge(mh_iter);

        let new_stats = sa_update_stats(stats.as_ref(), &imputed, h, delta);
        weights = if t == 1 {
            fresh.clone()
        } else {
            sa_update_weights(&weights, &fresh, delta)?
        };

        let mut wd = WeightedDesign::new(design.n_coefficients());
        match cfg.beta_objective {
            BetaObjective::SmoothedWeights => {
                let paired: Vec<DiscretePosterior> = samples
                    .iter()
                    .zip(weights.iter().zip(&fresh))
                    .map(|(s, (w, f))| if s.continuous_missing.is_empty() { w.clone() } else { f.clone() })
                    .collect();
                expand_design(&design, &samples, &imputed, &paired, 1.0, &mut wd);
            }
            BetaObjective::SmoothedUnpaired => {
                expand_design(&design, &samples, &imputed, &weights, 1.0, &mut wd);
            }
            BetaObjective::Replay { window } => {
                history.push_back((imputed.clone(), fresh, delta));
                while history.len() > window {
                    history.pop_front();
                }
                let deltas: Vec<f64> = history.iter().map(|e| e.2).collect();
                for ((x, w, _), c) in history.iter().zip(replay_coefficients(&deltas)) {
                    if c > 0.0 {
                        expand_design(&design, &samples, x, w, c, &mut wd);
                    }
                }
            }
        }
        let argmax = wd.maximize(&params.beta, &cfg.beta_optimizer)?.beta;
        let beta = match cfg.beta_objective {
            // objectives built from the current imputation alone are smoothed
            // through their maximizers with the same step size
            BetaObjective::SmoothedWeights => params
                .beta
                .iter()
                .zip(&argmax)
                .map(|(old, new)| old + delta * (new - old))
                .collect(),
            _ => argmax,
        };
        let gaussian = mstep_gaussian(&new_stats, n)?;
        let discretes = mstep_discrete(train, &weights)?;
        params = ModelParams::new(beta, gaussian, discretes, design.clone())?;
        stats = Some(new_stats);

        let loglik = if cfg.loglik_samples > 0 {
            observed_loglik_estimate(&params, train, cfg.loglik_samples, cfg.seed)?
        } else {
            f64::NAN
        };
        trajectory.push(TrajectoryPoint {
            iteration: t,
            step_size: delta,
            beta: params.beta.clone(),
            loglik,
            acceptance_rate: mh_iter.acceptance_rate(),
        });
    }

    Ok(FitResult {
        params,
        trajectory,
        diagnostics: FitDiagnostics {
            iterations: cfg.iterations,
            acceptance_rate: mh_total.acceptance_rate(),
            mh: mh_total,
        },
    })
}

/// Monte-Carlo estimate of `Σ_i ln p(y_i, x_{i,obs}; θ)`.
///
/// Missing discretes are summed exactly; missing continuous coordinates are
/// integrated by averaging over `n_mc` draws from their conditional Gaussian.
/// Fully observed samples contribute their exact complete log-likelihood.
pub fn observed_loglik_estimate(
    params: &ModelParams,
    dataset: &HybridDataset,
    n_mc: usize,
    seed: u64,
) -> Result<f64> {
    if n_mc == 0 {
        return Err(Error::InvalidParameter("n_mc must be at least 1".into()));
    }
    let samples = dataset.sample_views();
    let plans = build_plans(&samples, &params.gaussian)?;
    let l = params.n_discrete();
    let h = params.n_continuous();
    let per_sample: Vec<f64> = samples
        .par_iter()
        .map(|s| -> Result<f64> {
            if s.is_complete() {
                let levels = complete_levels(s, l, &[]);
                return complete_loglik(params, s.outcome, &levels, &s.continuous_with(h, &[]));
            }
            let observed_discrete: f64 = s
                .discrete_observed
                .iter()
                .map(|&(j, m)| params.discretes[j].logpmf(m))
                .sum::<Result<f64>>()?;
            if s.continuous_missing.is_empty() {
                let cont = s.continuous_with(h, &[]);
                let observed_cont = params.gaussian.logpdf(&cont)?;
                let table = ComboTable::new(s, params)?;
                let z = observed_discrete_logit(s, params) + params.design.continuous_term(&params.beta, &cont);
                let terms: Vec<f64> = table
                    .logit_shift
                    .iter()
                    .zip(&table.log_prior)
                    .map(|(sh, p)| bernoulli_logpmf(s.outcome, z + sh) + p)
                    .collect();
                return Ok(observed_discrete + observed_cont + log_sum_exp(&terms));
            }
            let plan = &plans[&s.continuous_missing];
            let observed_cont = plan.observed_logpdf(&s.continuous_observed_values());
            let target = MhTarget::with_plan(s, params, plan)?;
            let mut r = rng::stream(seed, &[rng::stage::LOGLIK, s.index as u64]);
            let draws: Vec<f64> = (0..n_mc)
                .map(|_| target.log_marginal_likelihood(&target.proposal().sample(&mut r)))
                .collect();
            Ok(observed_discrete + observed_cont + log_sum_exp(&draws) - (n_mc as f64).ln())
        })
        .collect::<Result<_>>()?;
    Ok(per_sample.iter().sum())
}
