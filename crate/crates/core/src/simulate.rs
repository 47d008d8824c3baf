//! The synthetic design: one binary and one five-level discrete covariate,
//! five correlated Gaussian covariates and a logistic outcome.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{HybridDataset, Schema, VariableSchema};
use crate::distributions::{sigmoid, CategoricalParams, GaussianParams};
use crate::error::{Error, Result};
use crate::missingness::{Mechanism, MissingnessSpec};
use crate::model::{Design, DiscreteEncoding, ModelParams};
use crate::rng;

pub const TRUE_BETA: [f64; 8] = [0.0, -0.9, 0.01, 0.1, -0.6, 0.3, 0.01, 0.8];
pub const LEVEL_PROBS: [f64; 5] = [0.1, 0.2, 0.3, 0.25, 0.15];
pub const COVARIANCE: [[f64; 5]; 5] = [
    [4.0, 0.5, 0.2, 0.1, 0.3],
    [0.5, 3.0, 0.1, 0.3, 0.2],
    [0.2, 0.1, 2.0, 0.4, 0.5],
    [0.1, 0.3, 0.4, 3.0, 0.2],
    [0.3, 0.2, 0.5, 0.2, 5.0],
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticDesign {
    pub n: usize,
    pub beta: Vec<f64>,
    /// `P(x¹ = 1)`.
    pub binary_prob: f64,
    pub level_probs: Vec<f64>,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
}

impl Default for SyntheticDesign {
    fn default() -> Self {
        Self {
            n: 1000,
            beta: TRUE_BETA.to_vec(),
            binary_prob: 0.5,
            level_probs: LEVEL_PROBS.to_vec(),
            mean: vec![0.0; 5],
            covariance: COVARIANCE.iter().map(|r| r.to_vec()).collect(),
        }
    }
}

/// `x1` is binary coded 0/1 in the design (levels 1, 2 with base 0), `x2`
/// enters with its level code 1..5, then `x3..x7` are continuous.
pub fn synthetic_schema(n_levels: usize, n_continuous: usize) -> Schema {
    let mut vars = vec![
        VariableSchema::discrete("x1", 2).with_design_base(0.0),
        VariableSchema::discrete("x2", n_levels),
    ];
    vars.extend((0..n_continuous).map(|k| VariableSchema::continuous(format!("x{}", k + 3))));
    Schema::new("y", vars).expect("synthetic schema is valid")
}

impl SyntheticDesign {
    pub fn schema(&self) -> Schema {
        synthetic_schema(self.level_probs.len(), self.mean.len())
    }

    /// Generating parameters as a model.
    pub fn truth(&self) -> Result<ModelParams> {
        let h = self.mean.len();
        if self.covariance.len() != h || self.covariance.iter().any(|r| r.len() != h) {
            return Err(Error::Dimension(format!("covariance must be {h}×{h}")));
        }
        if !(self.binary_prob > 0.0 && self.binary_prob < 1.0) {
            return Err(Error::InvalidParameter(format!("binary probability {} is outside (0, 1)", self.binary_prob)));
        }
        let cov = DMatrix::from_fn(h, h, |a, b| self.covariance[a][b]);
        let schema = self.schema();
        ModelParams::new(
            self.beta.clone(),
            GaussianParams::new(self.mean.clone(), cov)?,
            vec![
                CategoricalParams::new(vec![1.0 - self.binary_prob, self.binary_prob])?,
                CategoricalParams::new(self.level_probs.clone())?,
            ],
            Design::from_schema(&schema, DiscreteEncoding::Numeric),
        )
    }

    /// A fully observed dataset drawn from stream `(seed, SIMULATE)`.
    pub fn simulate(&self, seed: u64) -> Result<HybridDataset> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be positive".into()));
        }
        let truth = self.truth()?;
        let mut r = rng::stream(seed, &[rng::stage::SIMULATE]);
        let p = 2 + self.mean.len();
        let mut values = Vec::with_capacity(self.n * p);
        let mut outcomes = Vec::with_capacity(self.n);
        for _ in 0..self.n {
            let levels = [truth.discretes[0].sample(&mut r), truth.discretes[1].sample(&mut r)];
            let cont = truth.gaussian.sample(&mut r);
            let prob = sigmoid(truth.logit(&levels, &cont));
            outcomes.push(u8::from(r.random::<f64>() < prob));
            values.extend(levels.iter().map(|&l| l as f64));
            values.extend(cont);
        }
        HybridDataset::complete(self.schema(), outcomes, values)
    }
}

/// MAR on `x1, x2, x4, x6` driven by `x3, x5, x7`.
pub fn synthetic_mar_spec(rate: f64, seed: u64) -> MissingnessSpec {
    MissingnessSpec::mar(rate, &["x1", "x2", "x4", "x6"], &["x3", "x5", "x7"], seed)
}

/// The default spec for a mechanism on the synthetic design: MCAR hits every
/// covariate.
pub fn synthetic_spec(mechanism: Mechanism, rate: f64, seed: u64) -> MissingnessSpec {
    match mechanism {
        Mechanism::Mcar => MissingnessSpec::mcar(rate, seed),
        Mechanism::Mar => synthetic_mar_spec(rate, seed),
    }
}
