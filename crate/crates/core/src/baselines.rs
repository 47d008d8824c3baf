//! Reference estimators: mean/mode imputation, complete-case filtering and
//! plain logistic regression on completed data.

use std::path::Path;

use crate::data::{load_csv, CsvOptions, HybridDataset, Schema};
use crate::error::{Error, Result};
use crate::logistic::{NewtonConfig, WeightedDesign};
use crate::model::Design;

/// Maximum-likelihood logistic regression on design rows (intercept column
/// included), with a ridge on the non-intercept coefficients.
pub fn fit_logistic(rows: &[Vec<f64>], y: &[u8], ridge: f64) -> Result<Vec<f64>> {
    if rows.len() != y.len() {
        return Err(Error::Dimension(format!("{} rows, {} outcomes", rows.len(), y.len())));
    }
    let p = rows.first().map_or(0, Vec::len);
    if p == 0 || rows.len() <= p {
        return Err(Error::Dataset(format!("{} rows are too few for {p} coefficients", rows.len())));
    }
    if !(ridge >= 0.0) {
        return Err(Error::InvalidParameter(format!("ridge {ridge} must be non-negative")));
    }
    let positives = y.iter().filter(|&&v| v == 1).count();
    if ridge == 0.0 && (positives == 0 || positives == y.len()) {
        return Err(Error::Dataset("both outcome classes must be present without a ridge".into()));
    }
    let mut wd = WeightedDesign::new(p);
    for (r, &yi) in rows.iter().zip(y) {
        if r.len() != p {
            return Err(Error::Dimension("design rows have unequal lengths".into()));
        }
        wd.push(r, yi, 1.0);
    }
    let cfg = NewtonConfig {
        max_iterations: 100,
        gradient_tolerance: 1e-8,
        ridge,
    };
    let out = wd.maximize(&vec![0.0; p], &cfg)?;
    if !out.converged {
        return Err(Error::NonConvergence(format!(
            "gradient norm {:.3e} after {} iterations; the classes may be separable",
            out.gradient_norm, out.iterations
        )));
    }
    if ridge == 0.0 && separates(rows, y, &out.beta) {
        return Err(Error::NonConvergence(
            "the classes are separable, so the maximum likelihood estimate does not exist".into(),
        ));
    }
    Ok(out.beta)
}

/// Every fitted probability within 1e-6 of its label.
fn separates(rows: &[Vec<f64>], y: &[u8], beta: &[f64]) -> bool {
    rows.iter().zip(y).all(|(r, &yi)| {
        let p = crate::distributions::sigmoid(r.iter().zip(beta).map(|(x, b)| x * b).sum());
        (p - f64::from(yi)).abs() < 1e-6
    })
}

/// Design rows of a fully observed dataset.
pub fn design_rows(ds: &HybridDataset, design: &Design) -> Result<Vec<Vec<f64>>> {
    if !ds.is_fully_observed() {
        return Err(Error::Dataset(format!("{} cells are missing", ds.missing_count())));
    }
    let l = ds.n_discrete();
    Ok((0..ds.n_rows())
        .map(|i| {
            let row = ds.row(i);
            let levels: Vec<usize> = row[..l].iter().map(|&v| v as usize).collect();
            design.row(&levels, &row[l..])
        })
        .collect())
}

/// `fit_logistic` on a fully observed dataset.
pub fn fit_dataset(ds: &HybridDataset, design: &Design, ridge: f64) -> Result<Vec<f64>> {
    fit_logistic(&design_rows(ds, design)?, ds.outcomes(), ridge)
}

/// Column statistics used by mean/mode imputation.
#[derive(Debug, Clone, PartialEq)]
pub struct FillValues(pub Vec<f64>);

impl FillValues {
    /// Observed mean for continuous columns; observed mode for discrete
    /// columns with ties going to the smallest level.
    pub fn from_dataset(ds: &HybridDataset) -> Result<Self> {
        let schema = ds.schema();
        let fills = schema
            .variables
            .iter()
            .enumerate()
            .map(|(j, var)| {
                let col = ds.observed_column(j);
                if col.is_empty() {
                    return Err(Error::Dataset(format!("column `{}` has no observed values", var.name)));
                }
                if var.is_discrete() {
                    let mut counts = vec![0usize; var.n_levels()];
                    for v in &col {
                        counts[*v as usize - 1] += 1;
                    }
                    let best = counts.iter().max().copied().unwrap_or(0);
                    let level = counts.iter().position(|&c| c == best).unwrap_or(0) + 1;
                    Ok(level as f64)
                } else {
                    Ok(col.iter().sum::<f64>() / col.len() as f64)
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self(fills))
    }

    pub fn apply(&self, ds: &HybridDataset) -> Result<HybridDataset> {
        if self.0.len() != ds.n_columns() {
            return Err(Error::Dimension(format!(
                "{} fill values for {} columns",
                self.0.len(),
                ds.n_columns()
            )));
        }
        ds.filled(|_, j| self.0[j])
    }
}

/// Mean/mode imputation with statistics from `ds` itself.
pub fn impute_mean_mode(ds: &HybridDataset) -> Result<HybridDataset> {
    FillValues::from_dataset(ds)?.apply(ds)
}

/// Rows with every covariate observed, in their original order.
pub fn complete_cases(ds: &HybridDataset) -> HybridDataset {
    let rows: Vec<usize> = (0..ds.n_rows()).filter(|&i| ds.row_mask(i).iter().all(|&m| m)).collect();
    ds.select_rows(&rows)
}

/// Load a dataset completed by an external imputation tool. Any residual
/// missing cell is an error.
pub fn external_imputation_ingest(path: impl AsRef<Path>, schema: &Schema, opts: &CsvOptions) -> Result<HybridDataset> {
    let path = path.as_ref();
    let ds = load_csv(path, schema, opts)?;
    let p = ds.n_columns();
    if let Some(cell) = ds.mask().iter().position(|&m| !m) {
        return Err(Error::Cell {
            path: path.display().to_string(),
            row: cell / p + 1,
            column: schema.variables[cell % p].name.clone(),
            message: "imputed dataset still has a missing value".into(),
        });
    }
    Ok(ds)
}
