//! Independence Metropolis–Hastings for the missing continuous covariates of
//! one sample.
//!
//! The target is `p(x^c_mis | y, x_obs; θ) ∝ f(x^c_mis)` with
//!
//! ```text
//! f(x) = Σ_{x^d_mis} p(y | x, x^d_mis, x_obs; β) · p(x^d_mis; θ^d) · p(x | x^c_obs; μ, Σ)
//! ```
//!
//! and the proposal `g` is the conditional Gaussian `p(x | x^c_obs; μ, Σ)`,
//! drawn afresh at every step.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::SampleView;
use crate::distributions::{bernoulli_logpmf, log_sum_exp_iter, ConditionalGaussian, ConditionalPlan};
use crate::error::{Error, Result};
use crate::model::{observed_discrete_logit, ComboTable, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MhConfig {
    /// Number of proposals `S` after the initial draw.
    pub chain_length: usize,
}

impl Default for MhConfig {
    fn default() -> Self {
        Self { chain_length: 20 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MhDiagnostics {
    pub accepted: usize,
    pub proposed: usize,
}

impl MhDiagnostics {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            1.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn merge(&mut self, other: MhDiagnostics) {
        self.accepted += other.accepted;
        self.proposed += other.proposed;
    }
}

/// Unnormalized posterior of one sample's missing continuous coordinates.
#[derive(Debug, Clone)]
pub struct MhTarget {
    outcome: u8,
    base_logit: f64,
    missing_coef: Vec<f64>,
    combos: ComboTable,
    proposal: ConditionalGaussian,
}

impl MhTarget {
    pub fn new(sample: &SampleView, params: &ModelParams) -> Result<Self> {
        let plan = params
            .gaussian
            .plan(&sample.continuous_observed_indices(), &sample.continuous_missing)?;
        Self::with_plan(sample, params, &plan)
    }

    /// Build with a conditioning plan shared across samples with the same
    /// missing-continuous pattern.
    pub fn with_plan(sample: &SampleView, params: &ModelParams, plan: &ConditionalPlan) -> Result<Self> {
        let combos = ComboTable::new(sample, params)?;
        let proposal = plan.condition(&sample.continuous_observed_values())?;
        let off = params.design.continuous_offset();
        let beta = &params.beta;
        let base_logit = observed_discrete_logit(sample, params)
            + sample
                .continuous_observed
                .iter()
                .map(|&(k, v)| beta[off + k] * v)
                .sum::<f64>();
        let missing_coef = sample.continuous_missing.iter().map(|&k| beta[off + k]).collect();
        Ok(Self {
            outcome: sample.outcome,
            base_logit,
            missing_coef,
            combos,
            proposal,
        })
    }

    pub fn dim(&self) -> usize {
        self.missing_coef.len()
    }

    pub fn proposal(&self) -> &ConditionalGaussian {
        &self.proposal
    }

    pub fn combos(&self) -> &ComboTable {
        &self.combos
    }

    /// Logit at the given imputation, before adding any discrete-combination shift.
    pub fn logit_without_missing_discrete(&self, x_mis: &[f64]) -> f64 {
        self.base_logit
            + self
                .missing_coef
                .iter()
                .zip(x_mis)
                .map(|(b, x)| b * x)
                .sum::<f64>()
    }

    /// `ln Σ_combo p(y | x, combo; β) p(combo; θ^d)`: the outcome likelihood
    /// with the missing discretes marginalized.
    pub fn log_marginal_likelihood(&self, x_mis: &[f64]) -> f64 {
        let z = self.logit_without_missing_discrete(x_mis);
        log_sum_exp_iter(
            self.combos
                .logit_shift
                .iter()
                .zip(&self.combos.log_prior)
                .map(|(s, p)| bernoulli_logpmf(self.outcome, z + s) + p),
        )
    }

    pub fn log_proposal(&self, x_mis: &[f64]) -> f64 {
        self.proposal.logpdf(x_mis)
    }

    /// `ln f(x)`.
    pub fn log_density(&self, x_mis: &[f64]) -> f64 {
        self.log_marginal_likelihood(x_mis) + self.log_proposal(x_mis)
    }

    /// `(ln f(x), ln g(x))` sharing the proposal evaluation.
    fn log_density_and_proposal(&self, x_mis: &[f64]) -> (f64, f64) {
        let g = self.log_proposal(x_mis);
        (self.log_marginal_likelihood(x_mis) + g, g)
    }
}

/// `ln f` at a point, for a sample and parameters.
pub fn target_unnormalized_logdensity(
    x_mis_c: &[f64],
    sample: &SampleView,
    params: &ModelParams,
) -> Result<f64> {
    if x_mis_c.len() != sample.continuous_missing.len() {
        return Err(Error::Dimension(format!(
            "{} values for {} missing continuous coordinates",
            x_mis_c.len(),
            sample.continuous_missing.len()
        )));
    }
    Ok(MhTarget::new(sample, params)?.log_density(x_mis_c))
}

/// `ln r = ln f(x') + ln g(x) − ln f(x) − ln g(x')`.
pub fn log_acceptance_ratio(log_f_new: f64, log_g_new: f64, log_f_old: f64, log_g_old: f64) -> f64 {
    (log_f_new + log_g_old) - (log_f_old + log_g_new)
}

/// Generic independence-sampler loop. `uniform` supplies the accept/reject
/// variates so tests can force a decision.
pub(crate) fn independence_chain<T, R>(
    init: T,
    steps: usize,
    rng: &mut R,
    mut propose: impl FnMut(&mut R) -> T,
    log_fg: impl Fn(&T) -> (f64, f64),
    mut uniform: impl FnMut(&mut R) -> f64,
) -> (T, MhDiagnostics)
where
    R: Rng + ?Sized,
{
    let mut current = init;
    let (mut current_f, mut current_g) = log_fg(&current);
    let mut diag = MhDiagnostics::default();
    for _ in 0..steps {
        let candidate = propose(rng);
        let u = uniform(rng);
        let (cand_f, cand_g) = log_fg(&candidate);
        let log_r = log_acceptance_ratio(cand_f, cand_g, current_f, current_g);
        // a ratio within the rounding error of its four terms counts as 1
        let resolution = 8.0 * f64::EPSILON * cand_f.abs().max(cand_g.abs()).max(current_f.abs()).max(current_g.abs());
        let ratio = if log_r >= -resolution { 1.0 } else { log_r.exp() };
        diag.proposed += 1;
        if u < ratio {
            diag.accepted += 1;
            current = candidate;
            current_f = cand_f;
            current_g = cand_g;
        }
    }
    (current, diag)
}

/// Run the chain for a prepared target: initialize from `g`, then
/// `chain_length` propose/accept steps. Returns the final state.
pub fn run_target<R: Rng + ?Sized>(
    target: &MhTarget,
    cfg: &MhConfig,
    rng: &mut R,
) -> (Vec<f64>, MhDiagnostics) {
    run_target_with(target, cfg, rng, |r| r.random::<f64>())
}

pub(crate) fn run_target_with<R: Rng + ?Sized>(
    target: &MhTarget,
    cfg: &MhConfig,
    rng: &mut R,
    uniform: impl FnMut(&mut R) -> f64,
) -> (Vec<f64>, MhDiagnostics) {
    let init = target.proposal.sample(rng);
    independence_chain(
        init,
        cfg.chain_length,
        rng,
        |r| target.proposal.sample(r),
        |x| target.log_density_and_proposal(x),
        uniform,
    )
}

/// Draw the missing continuous coordinates of `sample` from their posterior.
pub fn mh_sample<R: Rng + ?Sized>(
    sample: &SampleView,
    params: &ModelParams,
    cfg: &MhConfig,
    rng: &mut R,
) -> Result<(Vec<f64>, MhDiagnostics)> {
    if sample.continuous_missing.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "sample {} has no missing continuous coordinates",
            sample.index
        )));
    }
    if cfg.chain_length == 0 {
        return Err(Error::InvalidParameter("MH chain length must be at least 1".into()));
    }
    let target = MhTarget::new(sample, params)?;
    Ok(run_target(&target, cfg, rng))
}
