//! Python bindings: datasets, missingness injection, SAEM fitting, prediction,
//! baselines, metrics and the benchmark harness.

use std::path::PathBuf;

use mixsaem::baselines::{complete_cases, fit_dataset, impute_mean_mode};
use mixsaem::benchmark::{run_benchmark, BenchmarkConfig};
use mixsaem::data::{load_csv, save_csv, CsvOptions, HybridDataset as CoreDataset, Schema};
use mixsaem::metrics::classification_metrics;
use mixsaem::missingness::{inject, Mechanism};
use mixsaem::model::{DiscreteEncoding, ModelParams};
use mixsaem::prediction::{predict_dataset, PredictConfig};
use mixsaem::saem::{fit_saem, initial_params, SaemConfig};
use mixsaem::simulate::{synthetic_spec, SyntheticDesign};
use mixsaem::Error;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// A dataset with binary outcome and mixed covariates; missing cells are `None`.
#[pyclass(name = "Dataset", frozen)]
struct Dataset {
    inner: CoreDataset,
}

#[pymethods]
impl Dataset {
    #[staticmethod]
    #[pyo3(signature = (path, schema_path, na = "NA"))]
    fn from_csv(path: PathBuf, schema_path: PathBuf, na: &str) -> PyResult<Self> {
        let schema = Schema::load(schema_path).map_err(py_err)?;
        let inner = load_csv(path, &schema, &CsvOptions::with_na(na)).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[pyo3(signature = (path, na = "NA"))]
    fn to_csv(&self, path: PathBuf, na: &str) -> PyResult<()> {
        save_csv(&self.inner, path, &CsvOptions::with_na(na)).map_err(py_err)
    }

    fn save_schema(&self, path: PathBuf) -> PyResult<()> {
        self.inner.schema().save(path).map_err(py_err)
    }

    #[getter]
    fn n_rows(&self) -> usize {
        self.inner.n_rows()
    }

    #[getter]
    fn columns(&self) -> Vec<String> {
        self.inner.schema().variables.iter().map(|v| v.name.clone()).collect()
    }

    #[getter]
    fn outcomes(&self) -> Vec<u8> {
        self.inner.outcomes().to_vec()
    }

    fn missing_count(&self) -> usize {
        self.inner.missing_count()
    }

    fn rows(&self) -> Vec<Vec<Option<f64>>> {
        (0..self.inner.n_rows())
            .map(|i| {
                self.inner
                    .row(i)
                    .iter()
                    .zip(self.inner.row_mask(i))
                    .map(|(&v, &m)| m.then_some(v))
                    .collect()
            })
            .collect()
    }

    /// Mask cells with the given mechanism (`"mcar"` or `"mar"`). MAR uses the
    /// synthetic design's targets and drivers.
    #[pyo3(signature = (rate, seed, mechanism = "mcar"))]
    fn inject(&self, rate: f64, seed: u64, mechanism: &str) -> PyResult<Self> {
        let mechanism: Mechanism = mechanism.parse().map_err(py_err)?;
        let inner = inject(&self.inner, &synthetic_spec(mechanism, rate, seed)).map_err(py_err)?;
        Ok(Self { inner })
    }

    fn mean_mode_imputed(&self) -> PyResult<Self> {
        Ok(Self {
            inner: impute_mean_mode(&self.inner).map_err(py_err)?,
        })
    }

    fn complete_cases(&self) -> Self {
        Self {
            inner: complete_cases(&self.inner),
        }
    }

    fn __len__(&self) -> usize {
        self.inner.n_rows()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(rows={}, columns={}, missing={})",
            self.inner.n_rows(),
            self.inner.n_columns(),
            self.inner.missing_count()
        )
    }
}

/// Fitted model parameters.
#[pyclass(name = "Params", frozen)]
struct Params {
    inner: ModelParams,
}

#[pymethods]
impl Params {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: ModelParams::load(path).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(path).map_err(py_err)
    }

    #[getter]
    fn beta(&self) -> Vec<f64> {
        self.inner.beta.clone()
    }

    #[getter]
    fn mean(&self) -> Vec<f64> {
        self.inner.gaussian.mean().iter().copied().collect()
    }

    #[getter]
    fn cov(&self) -> Vec<Vec<f64>> {
        let c = self.inner.gaussian.cov();
        (0..c.nrows()).map(|i| c.row(i).iter().copied().collect()).collect()
    }

    #[getter]
    fn discrete_probs(&self) -> Vec<Vec<f64>> {
        self.inner.discretes.iter().map(|c| c.probs().to_vec()).collect()
    }

    /// Probability of class 1 per row, marginalizing missing covariates.
    #[pyo3(signature = (dataset, samples = 200, seed = 0))]
    fn predict_proba(&self, py: Python<'_>, dataset: &Dataset, samples: usize, seed: u64) -> PyResult<Vec<f64>> {
        let cfg = PredictConfig {
            samples,
            seed,
            ..PredictConfig::default()
        };
        let out = py
            .detach(|| predict_dataset(&self.inner, &dataset.inner, &cfg))
            .map_err(py_err)?;
        Ok(out.iter().map(|o| o.probability).collect())
    }

    fn __repr__(&self) -> String {
        format!("Params(beta={:?})", self.inner.beta)
    }
}

/// Result of a SAEM fit.
#[pyclass(name = "Fit", frozen)]
struct Fit {
    #[pyo3(get)]
    params: Py<Params>,
    #[pyo3(get)]
    beta_trajectory: Vec<Vec<f64>>,
    #[pyo3(get)]
    acceptance_rate: f64,
    #[pyo3(get)]
    iterations: usize,
}

/// Simulate the seven-covariate synthetic design.
#[pyfunction]
#[pyo3(signature = (n = 1000, seed = 1))]
fn simulate(n: usize, seed: u64) -> PyResult<Dataset> {
    let design = SyntheticDesign {
        n,
        ..SyntheticDesign::default()
    };
    Ok(Dataset {
        inner: design.simulate(seed).map_err(py_err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (dataset, iterations = 500, seed = 0, chain_length = 20, one_hot = false))]
fn fit(
    py: Python<'_>,
    dataset: &Dataset,
    iterations: usize,
    seed: u64,
    chain_length: usize,
    one_hot: bool,
) -> PyResult<Fit> {
    let mut cfg = SaemConfig {
        iterations,
        seed,
        ..SaemConfig::default()
    };
    cfg.mh.chain_length = chain_length;
    if one_hot {
        cfg.encoding = DiscreteEncoding::OneHot;
    }
    let result = py.detach(|| fit_saem(&dataset.inner, &cfg)).map_err(py_err)?;
    Ok(Fit {
        params: Py::new(py, Params { inner: result.params })?,
        beta_trajectory: result.trajectory.into_iter().map(|t| t.beta).collect(),
        acceptance_rate: result.diagnostics.acceptance_rate,
        iterations: result.diagnostics.iterations,
    })
}

/// Logistic regression after mean/mode imputation (`"mm"`) or on complete
/// cases (`"cc"`).
#[pyfunction]
#[pyo3(signature = (dataset, method = "mm", ridge = 1e-8))]
fn fit_baseline(dataset: &Dataset, method: &str, ridge: f64) -> PyResult<Params> {
    let completed = match method {
        "mm" => impute_mean_mode(&dataset.inner).map_err(py_err)?,
        "cc" => complete_cases(&dataset.inner),
        other => return Err(PyValueError::new_err(format!("unknown baseline `{other}`; use mm or cc"))),
    };
    let start = initial_params(&dataset.inner, mixsaem::model::Design::from_schema(
        dataset.inner.schema(),
        DiscreteEncoding::Numeric,
    ))
    .map_err(py_err)?;
    let beta = fit_dataset(&completed, &start.design, ridge).map_err(py_err)?;
    Ok(Params {
        inner: ModelParams { beta, ..start },
    })
}

/// AUC, accuracy, precision, sensitivity, specificity, F1 and Brier score.
#[pyfunction]
#[pyo3(signature = (probabilities, labels, threshold = 0.5))]
fn metrics<'py>(
    py: Python<'py>,
    probabilities: Vec<f64>,
    labels: Vec<u8>,
    threshold: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let m = classification_metrics(&probabilities, &labels, threshold).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("auc", m.auc)?;
    d.set_item("accuracy", m.accuracy)?;
    d.set_item("precision", m.precision)?;
    d.set_item("sensitivity", m.sensitivity)?;
    d.set_item("specificity", m.specificity)?;
    d.set_item("f1", m.f1)?;
    d.set_item("brier", m.brier)?;
    Ok(d)
}

/// Run the benchmark from a JSON configuration and return the summary text.
/// With `out_dir`, the report files are written there too.
#[pyfunction]
#[pyo3(signature = (config_json = "{}", out_dir = None))]
fn benchmark(py: Python<'_>, config_json: &str, out_dir: Option<PathBuf>) -> PyResult<String> {
    let cfg: BenchmarkConfig = serde_json::from_str(config_json).map_err(|e| py_err(e.into()))?;
    let report = py.detach(|| run_benchmark(&cfg)).map_err(py_err)?;
    if let Some(dir) = out_dir {
        report.write(dir).map_err(py_err)?;
    }
    Ok(report.summary_text())
}

#[pymodule]
fn mixsaem_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<Params>()?;
    m.add_class::<Fit>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(fit_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(benchmark, m)?)?;
    Ok(())
}
