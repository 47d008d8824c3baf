//! Model parameters `θ = {β, (μ, Σ), θ^d}`, the regression design, and the
//! complete-data log-likelihood.

use serde::{Deserialize, Serialize};

use crate::data::{Schema, SampleView};
use crate::distributions::{bernoulli_logpmf, CategoricalParams, GaussianParams};
use crate::error::{Error, Result};

/// Largest number of missing-discrete combinations enumerated for one sample.
pub const ENUMERATION_CAP: usize = 4096;

/// How discrete covariates enter the linear predictor.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscreteEncoding {
    /// One coefficient per variable, multiplied by the level's numeric value.
    #[default]
    Numeric,
    /// `M_j − 1` indicator columns per variable, level 1 as reference.
    OneHot,
}

/// Layout of `[1, x^d, x^c]` in the coefficient vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "DesignRepr", into = "DesignRepr")]
pub struct Design {
    pub encoding: DiscreteEncoding,
    pub levels: Vec<usize>,
    pub bases: Vec<f64>,
    pub n_continuous: usize,
    offsets: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct DesignRepr {
    encoding: DiscreteEncoding,
    levels: Vec<usize>,
    bases: Vec<f64>,
    n_continuous: usize,
}

impl From<DesignRepr> for Design {
    fn from(r: DesignRepr) -> Self {
        Design::new(r.levels, r.bases, r.n_continuous, r.encoding)
    }
}

impl From<Design> for DesignRepr {
    fn from(d: Design) -> Self {
        Self {
            encoding: d.encoding,
            levels: d.levels,
            bases: d.bases,
            n_continuous: d.n_continuous,
        }
    }
}

impl Design {
    pub fn new(levels: Vec<usize>, bases: Vec<f64>, n_continuous: usize, encoding: DiscreteEncoding) -> Self {
        assert_eq!(levels.len(), bases.len(), "one design base per discrete variable");
        let mut d = Self {
            encoding,
            levels,
            bases,
            n_continuous,
            offsets: Vec::new(),
        };
        d.layout();
        d
    }

    pub fn from_schema(schema: &Schema, encoding: DiscreteEncoding) -> Self {
        let l = schema.n_discrete();
        let vars = &schema.variables[..l];
        Self::new(
            vars.iter().map(|v| v.n_levels()).collect(),
            vars.iter().map(|v| v.base()).collect(),
            schema.n_continuous(),
            encoding,
        )
    }

    fn layout(&mut self) {
        let mut off = 1;
        self.offsets = self
            .levels
            .iter()
            .map(|&m| {
                let start = off;
                off += match self.encoding {
                    DiscreteEncoding::Numeric => 1,
                    DiscreteEncoding::OneHot => m - 1,
                };
                start
            })
            .collect();
    }

    pub fn n_discrete(&self) -> usize {
        self.levels.len()
    }

    /// First coefficient index of the continuous block.
    pub fn continuous_offset(&self) -> usize {
        match self.encoding {
            DiscreteEncoding::Numeric => 1 + self.levels.len(),
            DiscreteEncoding::OneHot => 1 + self.levels.iter().map(|m| m - 1).sum::<usize>(),
        }
    }

    /// Length of `β`, intercept included.
    pub fn n_coefficients(&self) -> usize {
        self.continuous_offset() + self.n_continuous
    }

    /// Numeric value of a level in the numeric encoding.
    pub fn level_value(&self, j: usize, level: usize) -> f64 {
        self.bases[j] + (level as f64 - 1.0)
    }

    /// Contribution of discrete variable `j` at `level` to the logit.
    pub fn discrete_term(&self, beta: &[f64], j: usize, level: usize) -> f64 {
        let offset = self.offset(j);
        match self.encoding {
            DiscreteEncoding::Numeric => beta[offset] * self.level_value(j, level),
            DiscreteEncoding::OneHot if level >= 2 => beta[offset + level - 2],
            DiscreteEncoding::OneHot => 0.0,
        }
    }

    fn offset(&self, j: usize) -> usize {
        self.offsets[j]
    }

    pub fn continuous_term(&self, beta: &[f64], continuous: &[f64]) -> f64 {
        let off = self.continuous_offset();
        beta[off..off + self.n_continuous]
            .iter()
            .zip(continuous)
            .map(|(b, x)| b * x)
            .sum()
    }

    /// Fill `out` with the design row `[1, encoded x^d, x^c]`.
    pub fn write_row(&self, levels: &[usize], continuous: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n_coefficients());
        out.fill(0.0);
        out[0] = 1.0;
        for (j, &level) in levels.iter().enumerate() {
            let o = self.offset(j);
            match self.encoding {
                DiscreteEncoding::Numeric => out[o] = self.level_value(j, level),
                DiscreteEncoding::OneHot if level >= 2 => out[o + level - 2] = 1.0,
                DiscreteEncoding::OneHot => {}
            }
        }
        let off = self.continuous_offset();
        out[off..].copy_from_slice(continuous);
    }

    pub fn row(&self, levels: &[usize], continuous: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_coefficients()];
        self.write_row(levels, continuous, &mut out);
        out
    }

    pub fn logit(&self, beta: &[f64], levels: &[usize], continuous: &[f64]) -> f64 {
        beta[0]
            + levels
                .iter()
                .enumerate()
                .map(|(j, &m)| self.discrete_term(beta, j, m))
                .sum::<f64>()
            + self.continuous_term(beta, continuous)
    }
}

/// `θ`: regression coefficients, Gaussian over continuous covariates, and one
/// categorical per discrete covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta: Vec<f64>,
    pub gaussian: GaussianParams,
    pub discretes: Vec<CategoricalParams>,
    pub design: Design,
}

impl ModelParams {
    pub fn new(
        beta: Vec<f64>,
        gaussian: GaussianParams,
        discretes: Vec<CategoricalParams>,
        design: Design,
    ) -> Result<Self> {
        if beta.len() != design.n_coefficients() {
            return Err(Error::Dimension(format!(
                "beta has {} entries, design needs {}",
                beta.len(),
                design.n_coefficients()
            )));
        }
        if gaussian.dim() != design.n_continuous {
            return Err(Error::Dimension(format!(
                "Gaussian over {} coordinates, design has {} continuous",
                gaussian.dim(),
                design.n_continuous
            )));
        }
        if discretes.len() != design.n_discrete()
            || discretes.iter().zip(&design.levels).any(|(c, &m)| c.n_levels() != m)
        {
            return Err(Error::Dimension("categorical levels do not match the design".into()));
        }
        Ok(Self {
            beta,
            gaussian,
            discretes,
            design,
        })
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let p: ModelParams = serde_json::from_str(&text)?;
        let ModelParams {
            beta,
            gaussian,
            discretes,
            design,
        } = p;
        Self::new(beta, gaussian, discretes, design)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn n_discrete(&self) -> usize {
        self.discretes.len()
    }

    pub fn n_continuous(&self) -> usize {
        self.gaussian.dim()
    }

    /// Logit of a fully specified covariate vector.
    pub fn logit(&self, levels: &[usize], continuous: &[f64]) -> f64 {
        self.design.logit(&self.beta, levels, continuous)
    }

    /// `Σ_j ln θ^d_j(level_j)`.
    pub fn discrete_logprior(&self, levels: &[usize]) -> Result<f64> {
        levels
            .iter()
            .zip(&self.discretes)
            .map(|(&m, c)| c.logpmf(m))
            .sum()
    }
}

/// The three additive pieces of the complete-data log-likelihood of one
/// sample: outcome given covariates, discrete prior, Gaussian density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoglikTerms {
    pub outcome: f64,
    pub discrete: f64,
    pub continuous: f64,
}

impl LoglikTerms {
    pub fn total(&self) -> f64 {
        self.outcome + self.discrete + self.continuous
    }
}

pub fn complete_loglik_terms(
    params: &ModelParams,
    y: u8,
    levels: &[usize],
    continuous: &[f64],
) -> Result<LoglikTerms> {
    if levels.len() != params.n_discrete() || continuous.len() != params.n_continuous() {
        return Err(Error::Dimension(format!(
            "covariate vector has {} discrete + {} continuous entries, model expects {} + {}",
            levels.len(),
            continuous.len(),
            params.n_discrete(),
            params.n_continuous()
        )));
    }
    Ok(LoglikTerms {
        outcome: bernoulli_logpmf(y, params.logit(levels, continuous)),
        discrete: params.discrete_logprior(levels)?,
        continuous: params.gaussian.logpdf(continuous)?,
    })
}

/// `ln p(y, x; θ)` for a fully specified sample.
pub fn complete_loglik(params: &ModelParams, y: u8, levels: &[usize], continuous: &[f64]) -> Result<f64> {
    complete_loglik_terms(params, y, levels, continuous).map(|t| t.total())
}

/// Enumeration of a sample's missing discrete coordinates.
///
/// Combinations are indexed in mixed radix with the first missing coordinate
/// varying slowest. For each combination the table stores the shift it adds
/// to the logit and its log prior probability.
#[derive(Debug, Clone, PartialEq)]
pub struct ComboTable {
    pub missing: Vec<usize>,
    pub radices: Vec<usize>,
    pub logit_shift: Vec<f64>,
    pub log_prior: Vec<f64>,
}

/// Number of combinations, or an error above [`ENUMERATION_CAP`].
pub fn combo_count(sample: usize, radices: &[usize]) -> Result<usize> {
    let mut size: usize = 1;
    for &m in radices {
        size = size.saturating_mul(m);
        if size > ENUMERATION_CAP {
            return Err(Error::EnumerationCap {
                sample,
                size: radices.iter().fold(1usize, |a, &m| a.saturating_mul(m)),
                cap: ENUMERATION_CAP,
            });
        }
    }
    Ok(size)
}

/// Levels (1-based) of combination `index`.
pub fn decode_combo(mut index: usize, radices: &[usize], out: &mut [usize]) {
    for (slot, &m) in out.iter_mut().zip(radices).rev() {
        *slot = index % m + 1;
        index /= m;
    }
}

impl ComboTable {
    pub fn new(sample: &SampleView, params: &ModelParams) -> Result<Self> {
        let missing = sample.discrete_missing.clone();
        let radices: Vec<usize> = missing.iter().map(|&j| params.design.levels[j]).collect();
        let size = combo_count(sample.index, &radices)?;
        let mut logit_shift = Vec::with_capacity(size);
        let mut log_prior = Vec::with_capacity(size);
        let mut levels = vec![0; missing.len()];
        for c in 0..size {
            decode_combo(c, &radices, &mut levels);
            let mut shift = 0.0;
            let mut prior = 0.0;
            for (&j, &m) in missing.iter().zip(&levels) {
                shift += params.design.discrete_term(&params.beta, j, m);
                prior += params.discretes[j].logpmf(m)?;
            }
            logit_shift.push(shift);
            log_prior.push(prior);
        }
        Ok(Self {
            missing,
            radices,
            logit_shift,
            log_prior,
        })
    }

    pub fn len(&self) -> usize {
        self.logit_shift.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logit_shift.is_empty()
    }

    pub fn levels(&self, index: usize) -> Vec<usize> {
        let mut out = vec![0; self.radices.len()];
        decode_combo(index, &self.radices, &mut out);
        out
    }
}

/// Logit contribution of the intercept and the observed discrete coordinates.
pub fn observed_discrete_logit(sample: &SampleView, params: &ModelParams) -> f64 {
    params.beta[0]
        + sample
            .discrete_observed
            .iter()
            .map(|&(j, m)| params.design.discrete_term(&params.beta, j, m))
            .sum::<f64>()
}

/// Fill a full level vector from a sample's observed levels and a combination.
pub fn complete_levels(sample: &SampleView, l: usize, combo_levels: &[usize]) -> Vec<usize> {
    let mut levels = vec![0; l];
    for &(j, m) in &sample.discrete_observed {
        levels[j] = m;
    }
    for (&j, &m) in sample.discrete_missing.iter().zip(combo_levels) {
        levels[j] = m;
    }
    levels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{HybridDataset, VariableSchema};
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    const LN_2PI: f64 = 1.837_877_066_409_345_5;

    fn toy_params(beta: Vec<f64>) -> ModelParams {
        let design = Design::new(vec![5], vec![1.0], 1, DiscreteEncoding::Numeric);
        ModelParams::new(
            beta,
            GaussianParams::standard(1),
            vec![CategoricalParams::uniform(5)],
            design,
        )
        .unwrap()
    }

    #[test]
    fn complete_loglik_zero_beta() {
        let p = toy_params(vec![0.0; 3]);
        let v = complete_loglik(&p, 1, &[3], &[0.0]).unwrap();
        assert_abs_diff_eq!(v, 0.5f64.ln() + 0.2f64.ln() - 0.5 * LN_2PI, epsilon = 1e-14);
    }

    #[test]
    fn complete_loglik_matches_hand_formula() {
        // y·η − ln(1 + e^η) + Σ ln θ + Gaussian term, written out directly
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let g = GaussianParams::new(vec![0.3, -0.2], cov).unwrap();
        let design = Design::new(vec![2, 3], vec![0.0, 1.0], 2, DiscreteEncoding::Numeric);
        let discretes = vec![
            CategoricalParams::new(vec![0.4, 0.6]).unwrap(),
            CategoricalParams::new(vec![0.2, 0.5, 0.3]).unwrap(),
        ];
        let beta = vec![0.1, -0.7, 0.25, 0.4, -1.1];
        let p = ModelParams::new(beta.clone(), g, discretes, design).unwrap();
        let (levels, xc) = ([2usize, 3usize], [1.5, -0.5]);
        let eta: f64 = 0.1 + -0.7 * 1.0 + 0.25 * 3.0 + 0.4 * 1.5 + -1.1 * -0.5;
        let det: f64 = 2.0 * 1.0 - 0.25;
        let (d0, d1) = (1.5 - 0.3, -0.5 + 0.2);
        let quad = (1.0 * d0 * d0 - 2.0 * 0.5 * d0 * d1 + 2.0 * d1 * d1) / det;
        for y in [0u8, 1] {
            let expect = y as f64 * eta - (1.0 + eta.exp()).ln() + 0.6f64.ln() + 0.3f64.ln()
                - 0.5 * (2.0 * LN_2PI + det.ln() + quad);
            assert_abs_diff_eq!(complete_loglik(&p, y, &levels, &xc).unwrap(), expect, epsilon = 1e-12);
        }
        let terms = complete_loglik_terms(&p, 1, &levels, &xc).unwrap();
        assert_abs_diff_eq!(terms.discrete, 0.6f64.ln() + 0.3f64.ln(), epsilon = 1e-15);
        assert!(complete_loglik(&p, 1, &levels[..1], &xc).is_err());
    }

    #[test]
    fn one_hot_layout() {
        let d = Design::new(vec![2, 3], vec![1.0, 1.0], 1, DiscreteEncoding::OneHot);
        assert_eq!(d.n_coefficients(), 1 + 1 + 2 + 1);
        assert_eq!(d.row(&[2, 3], &[0.5]), vec![1.0, 1.0, 0.0, 1.0, 0.5]);
        assert_eq!(d.row(&[1, 1], &[0.5]), vec![1.0, 0.0, 0.0, 0.0, 0.5]);
        let beta = [0.1, 0.2, 0.3, 0.4, 0.5];
        assert_abs_diff_eq!(d.logit(&beta, &[2, 2], &[2.0]), 0.1 + 0.2 + 0.3 + 1.0, epsilon = 1e-15);
    }

    #[test]
    fn params_json_round_trip() {
        let p = toy_params(vec![0.5, -0.25, 1.0]);
        let text = serde_json::to_string(&p).unwrap();
        let back: ModelParams = serde_json::from_str(&text).unwrap();
        assert_eq!(back.beta, p.beta);
        assert_eq!(back.gaussian, p.gaussian);
        assert_eq!(back.discretes, p.discretes);
        assert_eq!(back.logit(&[2], &[1.0]), p.logit(&[2], &[1.0]));
    }

    #[test]
    fn combo_table_enumerates_mixed_radix() {
        let schema = Schema::new(
            "y",
            vec![
                VariableSchema::discrete("a", 2),
                VariableSchema::discrete("b", 3),
                VariableSchema::continuous("c"),
            ],
        )
        .unwrap();
        let ds = HybridDataset::new(
            schema.clone(),
            vec![1],
            vec![f64::NAN, f64::NAN, 0.0],
            vec![false, false, true],
        )
        .unwrap();
        let design = Design::from_schema(&schema, DiscreteEncoding::Numeric);
        let p = ModelParams::new(
            vec![0.0, 1.0, 10.0, 0.0],
            GaussianParams::standard(1),
            vec![CategoricalParams::uniform(2), CategoricalParams::uniform(3)],
            design,
        )
        .unwrap();
        let t = ComboTable::new(&ds.sample_view(0), &p).unwrap();
        assert_eq!(t.len(), 6);
        assert_eq!(t.levels(0), vec![1, 1]);
        assert_eq!(t.levels(4), vec![2, 2]);
        assert_eq!(t.logit_shift[4], 2.0 + 20.0);
        assert!(combo_count(0, &[64, 64]).is_ok());
        assert!(matches!(combo_count(3, &[64, 65]), Err(Error::EnumerationCap { sample: 3, .. })));
    }
}
