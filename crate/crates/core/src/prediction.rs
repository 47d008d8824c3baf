//! Class probabilities for samples with missing covariates.
//!
//! Missing discretes are summed out exactly under their prior `p(x^d; θ̂^d)`;
//! missing continuous coordinates are averaged over `S` draws from
//! `p(x^c_mis | x^c_obs; μ̂, Σ̂)`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{HybridDataset, SampleView};
use crate::distributions::{sigmoid, ConditionalGaussian, ConditionalPlan};
use crate::error::{Error, Result};
use crate::model::{complete_levels, observed_discrete_logit, ComboTable, ModelParams};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictConfig {
    pub samples: usize,
    pub seed: u64,
    pub threshold: f64,
}

impl Default for PredictConfig {
    fn default() -> Self {
        Self {
            samples: 200,
            seed: 0,
            threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionOutput {
    pub index: usize,
    pub probability: f64,
    pub class: u8,
    /// Monte-Carlo draws actually used; 0 when no continuous value is missing.
    pub samples: usize,
}

/// Tie at the threshold goes to class 1.
pub fn classify(probability: f64, threshold: f64) -> u8 {
    u8::from(probability >= threshold)
}

/// Argmax over unnormalized class scores `[s₀, s₁]`, ties to class 1.
pub fn argmax_class(scores: [f64; 2]) -> u8 {
    u8::from(scores[1] >= scores[0])
}

struct Marginalizer<'a> {
    params: &'a ModelParams,
    sample: &'a SampleView,
    combos: ComboTable,
    base: f64,
}

impl<'a> Marginalizer<'a> {
    fn new(sample: &'a SampleView, params: &'a ModelParams) -> Result<Self> {
        Ok(Self {
            combos: ComboTable::new(sample, params)?,
            base: observed_discrete_logit(sample, params),
            params,
            sample,
        })
    }

    /// `Σ_combo p(combo; θ̂^d) σ(η)` for fixed continuous coordinates.
    fn expected_sigmoid(&self, continuous: &[f64]) -> f64 {
        let z = self.base + self.params.design.continuous_term(&self.params.beta, continuous);
        self.combos
            .logit_shift
            .iter()
            .zip(&self.combos.log_prior)
            .map(|(s, lp)| lp.exp() * sigmoid(z + s))
            .sum()
    }
}

fn mc_probability<R: Rng + ?Sized>(
    m: &Marginalizer,
    proposal: &ConditionalGaussian,
    h: usize,
    s: usize,
    rng: &mut R,
) -> f64 {
    let total: f64 = (0..s)
        .map(|_| m.expected_sigmoid(&m.sample.continuous_with(h, &proposal.sample(rng))))
        .sum();
    total / s as f64
}

fn proba_with_plan<R: Rng + ?Sized>(
    sample: &SampleView,
    params: &ModelParams,
    plan: Option<&ConditionalPlan>,
    s: usize,
    rng: &mut R,
) -> Result<f64> {
    if s == 0 {
        return Err(Error::InvalidParameter("prediction needs at least one Monte-Carlo draw".into()));
    }
    let h = params.n_continuous();
    if sample.is_complete() {
        let levels = complete_levels(sample, params.n_discrete(), &[]);
        return Ok(sigmoid(params.logit(&levels, &sample.continuous_with(h, &[]))));
    }
    let m = Marginalizer::new(sample, params)?;
    if sample.continuous_missing.is_empty() {
        return Ok(m.expected_sigmoid(&sample.continuous_with(h, &[])).clamp(0.0, 1.0));
    }
    let owned;
    let plan = match plan {
        Some(p) => p,
        None => {
            owned = params
                .gaussian
                .plan(&sample.continuous_observed_indices(), &sample.continuous_missing)?;
            &owned
        }
    };
    let proposal = plan.condition(&sample.continuous_observed_values())?;
    Ok(mc_probability(&m, &proposal, h, s, rng).clamp(0.0, 1.0))
}

/// `p̂(y = 1 | x_obs; θ̂)` with `s` Monte-Carlo draws.
pub fn predict_proba<R: Rng + ?Sized>(sample: &SampleView, params: &ModelParams, s: usize, rng: &mut R) -> Result<f64> {
    proba_with_plan(sample, params, None, s, rng)
}

pub fn predict_class<R: Rng + ?Sized>(sample: &SampleView, params: &ModelParams, s: usize, rng: &mut R) -> Result<u8> {
    Ok(classify(predict_proba(sample, params, s, rng)?, 0.5))
}

/// Predictions for every row of `ds`; row `i` draws from its own stream.
pub fn predict_dataset(params: &ModelParams, ds: &HybridDataset, cfg: &PredictConfig) -> Result<Vec<PredictionOutput>> {
    if ds.n_discrete() != params.n_discrete() || ds.n_continuous() != params.n_continuous() {
        return Err(Error::Dimension(format!(
            "dataset has {} discrete + {} continuous columns, model expects {} + {}",
            ds.n_discrete(),
            ds.n_continuous(),
            params.n_discrete(),
            params.n_continuous()
        )));
    }
    let samples = ds.sample_views();
    let mut plans = BTreeMap::new();
    for s in &samples {
        if !s.continuous_missing.is_empty() && !plans.contains_key(&s.continuous_missing) {
            let plan = params.gaussian.plan(&s.continuous_observed_indices(), &s.continuous_missing)?;
            plans.insert(s.continuous_missing.clone(), plan);
        }
    }
    samples
        .par_iter()
        .map(|s| {
            let mut r = rng::stream(cfg.seed, &[rng::stage::PREDICT, s.index as u64]);
            let plan = plans.get(&s.continuous_missing);
            let probability = proba_with_plan(s, params, plan, cfg.samples, &mut r)?;
            Ok(PredictionOutput {
                index: s.index,
                probability,
                class: classify(probability, cfg.threshold),
                samples: if s.continuous_missing.is_empty() { 0 } else { cfg.samples },
            })
        })
        .collect()
}

/// CSV with columns `id, probability, class, mc_samples`.
pub fn write_predictions_csv(path: impl AsRef<Path>, outputs: &[PredictionOutput]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "id,probability,class,mc_samples")?;
        for p in outputs {
            writeln!(out, "{},{},{},{}", p.index, p.probability, p.class, p.samples)?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}
