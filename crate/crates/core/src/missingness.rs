//! MCAR and MAR missingness injection for fully observed covariates.
//!
//! The mask draw for a target cell only ever reads the driver columns and a
//! uniform variate, never the target cell itself.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::HybridDataset;
use crate::distributions::sigmoid;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Mcar,
    Mar,
}

impl std::str::FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mcar" => Ok(Self::Mcar),
            "mar" => Ok(Self::Mar),
            other => Err(Error::Usage(format!("unknown mechanism `{other}` (expected mcar or mar)"))),
        }
    }
}

/// Columns are named as in the dataset schema. An empty target list means
/// every covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingnessSpec {
    pub mechanism: Mechanism,
    pub rate: f64,
    #[serde(default)]
    pub target_columns: Vec<String>,
    #[serde(default)]
    pub driver_columns: Vec<String>,
    /// One vector per target over the standardized drivers; defaults to all
    /// ones.
    #[serde(default)]
    pub driver_coefficients: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub seed: u64,
}

impl MissingnessSpec {
    pub fn mcar(rate: f64, seed: u64) -> Self {
        Self {
            mechanism: Mechanism::Mcar,
            rate,
            target_columns: Vec::new(),
            driver_columns: Vec::new(),
            driver_coefficients: None,
            seed,
        }
    }

    pub fn mar(rate: f64, targets: &[&str], drivers: &[&str], seed: u64) -> Self {
        Self {
            mechanism: Mechanism::Mar,
            rate,
            target_columns: targets.iter().map(|s| s.to_string()).collect(),
            driver_columns: drivers.iter().map(|s| s.to_string()).collect(),
            driver_coefficients: None,
            seed,
        }
    }

    pub fn with_coefficients(mut self, coefficients: Vec<Vec<f64>>) -> Self {
        self.driver_coefficients = Some(coefficients);
        self
    }
}

/// Apply `spec` with its own mechanism.
pub fn inject(ds: &HybridDataset, spec: &MissingnessSpec) -> Result<HybridDataset> {
    match spec.mechanism {
        Mechanism::Mcar => inject_mcar(ds, spec),
        Mechanism::Mar => inject_mar(ds, spec),
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if rate > 0.0 && rate < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("missingness rate {rate} is outside (0, 1)")))
    }
}

fn resolve(ds: &HybridDataset, names: &[String]) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|n| {
            ds.schema()
                .column_index(n)
                .ok_or_else(|| Error::Schema(format!("unknown column `{n}`")))
        })
        .collect()
}

fn targets(ds: &HybridDataset, spec: &MissingnessSpec) -> Result<Vec<usize>> {
    let cols = if spec.target_columns.is_empty() {
        (0..ds.n_columns()).collect()
    } else {
        resolve(ds, &spec.target_columns)?
    };
    for &j in &cols {
        if ds.observed_column(j).len() != ds.n_rows() {
            return Err(Error::Dataset(format!(
                "target column `{}` already has missing cells",
                ds.schema().variables[j].name
            )));
        }
    }
    Ok(cols)
}

/// Mask cells of `column` where a fresh uniform falls below `prob(i)`.
fn draw_mask(
    ds: &HybridDataset,
    mask: &mut [bool],
    column: usize,
    seed: u64,
    prob: impl Fn(usize) -> f64,
) {
    let p = ds.n_columns();
    let mut r = rng::stream(seed, &[rng::stage::INJECT, column as u64]);
    for i in 0..ds.n_rows() {
        let u: f64 = r.random();
        if u < prob(i) {
            mask[i * p + column] = false;
        }
    }
}

pub fn inject_mcar(ds: &HybridDataset, spec: &MissingnessSpec) -> Result<HybridDataset> {
    check_rate(spec.rate)?;
    let cols = targets(ds, spec)?;
    let mut mask = ds.mask().to_vec();
    for &j in &cols {
        draw_mask(ds, &mut mask, j, spec.seed, |_| spec.rate);
    }
    ds.with_mask(mask)
}

/// Intercept `α` with `mean_i sigmoid(α + s_i) = rate`, by 60 bisection
/// steps on `[−30, 30]`.
pub fn calibrate_intercept(scores: &[f64], rate: f64) -> Result<f64> {
    let mean_at = |a: f64| scores.iter().map(|s| sigmoid(a + s)).sum::<f64>() / scores.len() as f64;
    let (mut lo, mut hi) = (-30.0, 30.0);
    if mean_at(lo) > rate || mean_at(hi) < rate {
        return Err(Error::Calibration {
            column: String::new(),
            rate,
        });
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mean_at(mid) < rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn inject_mar(ds: &HybridDataset, spec: &MissingnessSpec) -> Result<HybridDataset> {
    check_rate(spec.rate)?;
    if spec.target_columns.is_empty() || spec.driver_columns.is_empty() {
        return Err(Error::InvalidParameter("MAR needs explicit target and driver columns".into()));
    }
    let cols = targets(ds, spec)?;
    let drivers = resolve(ds, &spec.driver_columns)?;
    if let Some(j) = drivers.iter().find(|j| cols.contains(j)) {
        return Err(Error::InvalidParameter(format!(
            "column `{}` is both a target and a driver",
            ds.schema().variables[*j].name
        )));
    }
    let n = ds.n_rows();
    let standardized: Vec<Vec<f64>> = drivers
        .iter()
        .map(|&d| {
            let col = ds.observed_column(d);
            if col.len() != n {
                return Err(Error::Dataset(format!(
                    "driver column `{}` has missing cells",
                    ds.schema().variables[d].name
                )));
            }
            let mean = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
            Ok(col.iter().map(|v| (v - mean) / sd).collect())
        })
        .collect::<Result<_>>()?;
    let gammas = match &spec.driver_coefficients {
        Some(g) => {
            if g.len() != cols.len() || g.iter().any(|v| v.len() != drivers.len()) {
                return Err(Error::Dimension(format!(
                    "driver coefficients must be {} vectors of length {}",
                    cols.len(),
                    drivers.len()
                )));
            }
            g.clone()
        }
        None => vec![vec![1.0; drivers.len()]; cols.len()],
    };

    let mut mask = ds.mask().to_vec();
    for (&j, gamma) in cols.iter().zip(&gammas) {
        let scores: Vec<f64> = (0..n)
            .map(|i| gamma.iter().zip(&standardized).map(|(g, z)| g * z[i]).sum())
            .collect();
        let alpha = calibrate_intercept(&scores, spec.rate).map_err(|_| Error::Calibration {
            column: ds.schema().variables[j].name.clone(),
            rate: spec.rate,
        })?;
        draw_mask(ds, &mut mask, j, spec.seed, |i| sigmoid(alpha + scores[i]));
    }
    ds.with_mask(mask)
}
