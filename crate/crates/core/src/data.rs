//! Hybrid (discrete + continuous) datasets with per-cell missingness.
//!
//! Columns are ordered with the `l` discrete covariates first and the `h`
//! continuous covariates after them. Discrete cells hold level codes
//! `1..=M_j` stored as `f64`; missing cells hold `NaN` and a `false` mask
//! entry.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableKind {
    Continuous,
    Discrete,
}

/// One covariate column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSchema {
    pub name: String,
    pub kind: VariableKind,
    /// Number of levels `M_j` (discrete only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    /// Optional string labels for levels `1..=M_j`, used at ingestion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    /// Numeric value that level 1 takes in the regression design (default 1,
    /// so level `m` enters as `m`). A Bernoulli covariate coded `{0, 1}` uses 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design_base: Option<f64>,
}

impl VariableSchema {
    pub fn continuous(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: VariableKind::Continuous,
            levels: None,
            labels: None,
            design_base: None,
        }
    }

    pub fn discrete(name: impl Into<String>, levels: usize) -> Self {
        Self {
            name: name.into(),
            kind: VariableKind::Discrete,
            levels: Some(levels),
            labels: None,
            design_base: None,
        }
    }

    pub fn with_design_base(mut self, base: f64) -> Self {
        self.design_base = Some(base);
        self
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        self.labels = Some(labels);
        self
    }

    pub fn is_discrete(&self) -> bool {
        self.kind == VariableKind::Discrete
    }

    /// `M_j` for discrete variables, 0 for continuous ones.
    pub fn n_levels(&self) -> usize {
        self.levels.unwrap_or(0)
    }

    pub fn base(&self) -> f64 {
        self.design_base.unwrap_or(1.0)
    }

    fn validate(&self) -> Result<()> {
        match self.kind {
            VariableKind::Continuous => {
                if self.levels.is_some() || self.labels.is_some() {
                    return Err(Error::Schema(format!(
                        "continuous variable `{}` must not declare levels",
                        self.name
                    )));
                }
            }
            VariableKind::Discrete => {
                let m = self.levels.ok_or_else(|| {
                    Error::Schema(format!("discrete variable `{}` needs `levels`", self.name))
                })?;
                if m < 2 {
                    return Err(Error::Schema(format!(
                        "discrete variable `{}` declares {m} levels; at least 2 required",
                        self.name
                    )));
                }
                if let Some(labels) = &self.labels {
                    if labels.len() != m {
                        return Err(Error::Schema(format!(
                            "discrete variable `{}` has {} labels for {m} levels",
                            self.name,
                            labels.len()
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Ordered covariate schema plus the outcome column name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    #[serde(default = "default_outcome")]
    pub outcome: String,
    pub variables: Vec<VariableSchema>,
}

fn default_outcome() -> String {
    "y".to_string()
}

impl Schema {
    pub fn new(outcome: impl Into<String>, variables: Vec<VariableSchema>) -> Result<Self> {
        let schema = Self {
            outcome: outcome.into(),
            variables,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        seen.insert(self.outcome.as_str());
        let mut in_continuous = false;
        for v in &self.variables {
            v.validate()?;
            if !seen.insert(v.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name `{}`", v.name)));
            }
            match v.kind {
                VariableKind::Continuous => in_continuous = true,
                VariableKind::Discrete if in_continuous => {
                    return Err(Error::Schema(format!(
                        "discrete variable `{}` follows a continuous one; discrete columns come first",
                        v.name
                    )))
                }
                VariableKind::Discrete => {}
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let schema: Schema = serde_json::from_reader(BufReader::new(file))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn n_columns(&self) -> usize {
        self.variables.len()
    }

    /// Number of discrete covariates `l`.
    pub fn n_discrete(&self) -> usize {
        self.variables.iter().filter(|v| v.is_discrete()).count()
    }

    /// Number of continuous covariates `h`.
    pub fn n_continuous(&self) -> usize {
        self.n_columns() - self.n_discrete()
    }

    pub fn discrete_levels(&self) -> Vec<usize> {
        self.variables[..self.n_discrete()]
            .iter()
            .map(VariableSchema::n_levels)
            .collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }
}

/// CSV dialect used by [`load_csv`] and [`save_csv`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvOptions {
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default = "default_na")]
    pub na_token: String,
}

fn default_delimiter() -> char {
    ','
}

fn default_na() -> String {
    "NA".to_string()
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            delimiter: default_delimiter(),
            na_token: default_na(),
        }
    }
}

impl CsvOptions {
    pub fn with_na(na_token: impl Into<String>) -> Self {
        Self {
            na_token: na_token.into(),
            ..Self::default()
        }
    }

    fn delimiter_byte(&self) -> Result<u8> {
        u8::try_from(self.delimiter)
            .ok()
            .filter(u8::is_ascii)
            .ok_or_else(|| Error::Usage(format!("delimiter {:?} is not ASCII", self.delimiter)))
    }
}

/// Binary outcomes plus an `n × (l + h)` matrix of covariate cells.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridDataset {
    schema: Schema,
    outcomes: Vec<u8>,
    values: Vec<f64>,
    mask: Vec<bool>,
}

impl HybridDataset {
    /// Build a dataset from row-major cells. Cells whose mask entry is `false`
    /// are normalized to `NaN`.
    pub fn new(
        schema: Schema,
        outcomes: Vec<u8>,
        mut values: Vec<f64>,
        mask: Vec<bool>,
    ) -> Result<Self> {
        schema.validate()?;
        let p = schema.n_columns();
        let n = outcomes.len();
        if values.len() != n * p || mask.len() != n * p {
            return Err(Error::Dimension(format!(
                "expected {n}×{p} cells, got {} values and {} mask entries",
                values.len(),
                mask.len()
            )));
        }
        for (i, &y) in outcomes.iter().enumerate() {
            if y > 1 {
                return Err(Error::Dataset(format!("outcome of row {i} is {y}, not 0/1")));
            }
        }
        for i in 0..n {
            for (j, var) in schema.variables.iter().enumerate() {
                let k = i * p + j;
                if !mask[k] {
                    values[k] = f64::NAN;
                    continue;
                }
                let v = values[k];
                if !v.is_finite() {
                    return Err(Error::Dataset(format!(
                        "observed cell ({i}, `{}`) is not finite",
                        var.name
                    )));
                }
                if var.is_discrete() && !is_level(v, var.n_levels()) {
                    return Err(Error::Dataset(format!(
                        "cell ({i}, `{}`) = {v} is not a level in 1..={}",
                        var.name,
                        var.n_levels()
                    )));
                }
            }
        }
        Ok(Self {
            schema,
            outcomes,
            values,
            mask,
        })
    }

    /// Fully observed dataset.
    pub fn complete(schema: Schema, outcomes: Vec<u8>, values: Vec<f64>) -> Result<Self> {
        let mask = vec![true; values.len()];
        Self::new(schema, outcomes, values, mask)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.outcomes.len()
    }

    pub fn n_columns(&self) -> usize {
        self.schema.n_columns()
    }

    pub fn n_discrete(&self) -> usize {
        self.schema.n_discrete()
    }

    pub fn n_continuous(&self) -> usize {
        self.schema.n_continuous()
    }

    pub fn outcomes(&self) -> &[u8] {
        &self.outcomes
    }

    pub fn outcome(&self, i: usize) -> u8 {
        self.outcomes[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_columns() + j]
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.n_columns() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_columns();
        &self.values[i * p..(i + 1) * p]
    }

    pub fn row_mask(&self, i: usize) -> &[bool] {
        let p = self.n_columns();
        &self.mask[i * p..(i + 1) * p]
    }

    pub fn is_fully_observed(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    pub fn missing_count(&self) -> usize {
        self.mask.iter().filter(|&&m| !m).count()
    }

    /// Observed values of column `j`.
    pub fn observed_column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows())
            .filter(|&i| self.is_observed(i, j))
            .map(|i| self.value(i, j))
            .collect()
    }

    pub fn sample_view(&self, i: usize) -> SampleView {
        let l = self.n_discrete();
        let row = self.row(i);
        let mask = self.row_mask(i);
        let mut view = SampleView {
            index: i,
            outcome: self.outcomes[i],
            discrete_observed: Vec::new(),
            discrete_missing: Vec::new(),
            continuous_observed: Vec::new(),
            continuous_missing: Vec::new(),
        };
        for (j, (&v, &m)) in row.iter().zip(mask).enumerate() {
            match (j < l, m) {
                (true, true) => view.discrete_observed.push((j, v as usize)),
                (true, false) => view.discrete_missing.push(j),
                (false, true) => view.continuous_observed.push((j - l, v)),
                (false, false) => view.continuous_missing.push(j - l),
            }
        }
        view
    }

    pub fn sample_views(&self) -> Vec<SampleView> {
        (0..self.n_rows()).map(|i| self.sample_view(i)).collect()
    }

    /// New dataset holding the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let p = self.n_columns();
        let mut values = Vec::with_capacity(rows.len() * p);
        let mut mask = Vec::with_capacity(rows.len() * p);
        let mut outcomes = Vec::with_capacity(rows.len());
        for &i in rows {
            values.extend_from_slice(self.row(i));
            mask.extend_from_slice(self.row_mask(i));
            outcomes.push(self.outcomes[i]);
        }
        Self {
            schema: self.schema.clone(),
            outcomes,
            values,
            mask,
        }
    }

    /// Replace the mask, keeping the underlying values where still observed.
    pub fn with_mask(&self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.mask.len() {
            return Err(Error::Dimension("mask shape differs from dataset".into()));
        }
        if mask.iter().zip(&self.mask).any(|(&new, &old)| new && !old) {
            return Err(Error::Dataset(
                "cannot mark a missing cell as observed".into(),
            ));
        }
        let values = self
            .values
            .iter()
            .zip(&mask)
            .map(|(&v, &m)| if m { v } else { f64::NAN })
            .collect();
        Ok(Self {
            schema: self.schema.clone(),
            outcomes: self.outcomes.clone(),
            values,
            mask,
        })
    }

    /// Fill missing cells (used by imputation baselines). The result is
    /// validated like any other dataset.
    pub fn filled(&self, mut fill: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let p = self.n_columns();
        let mut values = self.values.clone();
        for i in 0..self.n_rows() {
            for j in 0..p {
                if !self.mask[i * p + j] {
                    values[i * p + j] = fill(i, j);
                }
            }
        }
        Self::complete(self.schema.clone(), self.outcomes.clone(), values)
    }
}

fn is_level(v: f64, m: usize) -> bool {
    v.fract() == 0.0 && v >= 1.0 && v <= m as f64
}

/// Coordinates of one row split by kind and observation status.
///
/// Discrete entries use the column index `j` in `0..l`; continuous entries use
/// the index `k` in `0..h` within the continuous block.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleView {
    pub index: usize,
    pub outcome: u8,
    pub discrete_observed: Vec<(usize, usize)>,
    pub discrete_missing: Vec<usize>,
    pub continuous_observed: Vec<(usize, f64)>,
    pub continuous_missing: Vec<usize>,
}

impl SampleView {
    pub fn is_complete(&self) -> bool {
        self.discrete_missing.is_empty() && self.continuous_missing.is_empty()
    }

    pub fn continuous_observed_indices(&self) -> Vec<usize> {
        self.continuous_observed.iter().map(|&(k, _)| k).collect()
    }

    pub fn continuous_observed_values(&self) -> Vec<f64> {
        self.continuous_observed.iter().map(|&(_, v)| v).collect()
    }

    /// Assemble the full continuous vector from observed cells and an
    /// imputation of the missing ones (ordered as `continuous_missing`).
    pub fn continuous_with(&self, h: usize, imputed: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; h];
        for &(k, v) in &self.continuous_observed {
            x[k] = v;
        }
        for (&k, &v) in self.continuous_missing.iter().zip(imputed) {
            x[k] = v;
        }
        x
    }
}

/// Read a CSV file with a header row naming the outcome and every schema
/// column. Cells equal to `na_token` are missing.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema, opts: &CsvOptions) -> Result<HybridDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter_byte()?)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let shown = path.display().to_string();
    read_records(&mut reader, schema, opts, &shown)
}

fn read_records<R: std::io::Read>(
    reader: &mut csv::Reader<R>,
    schema: &Schema,
    opts: &CsvOptions,
    path: &str,
) -> Result<HybridDataset> {
    schema.validate()?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::Schema(format!("{path}: header has no column `{name}`"))
        })
    };
    let outcome_col = find(&schema.outcome)?;
    let cols = schema
        .variables
        .iter()
        .map(|v| find(&v.name))
        .collect::<Result<Vec<_>>>()?;
    let expected = schema.n_columns() + 1;
    if headers.len() != expected {
        return Err(Error::Schema(format!(
            "{path}: header has {} columns, schema describes {expected}",
            headers.len()
        )));
    }

    let cell_err = |row: usize, column: &str, message: String| Error::Cell {
        path: path.to_string(),
        row,
        column: column.to_string(),
        message,
    };

    let p = schema.n_columns();
    let mut outcomes = Vec::new();
    let mut values = Vec::new();
    let mut mask = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        // 1-based data row numbers, header excluded
        let row = r + 1;
        let raw_y = &record[outcome_col];
        let y = match raw_y {
            "0" | "0.0" => 0,
            "1" | "1.0" => 1,
            s if s == opts.na_token || s.is_empty() => {
                return Err(cell_err(row, &schema.outcome, "outcome is missing".into()))
            }
            s => return Err(cell_err(row, &schema.outcome, format!("outcome `{s}` is not 0/1"))),
        };
        outcomes.push(y);
        for (var, &c) in schema.variables.iter().zip(&cols) {
            let raw = &record[c];
            if raw == opts.na_token {
                values.push(f64::NAN);
                mask.push(false);
                continue;
            }
            let v = parse_cell(raw, var).map_err(|m| cell_err(row, &var.name, m))?;
            values.push(v);
            mask.push(true);
        }
    }
    if outcomes.is_empty() {
        return Err(Error::Dataset(format!("{path}: no data rows")));
    }
    debug_assert_eq!(values.len(), outcomes.len() * p);
    HybridDataset::new(schema.clone(), outcomes, values, mask)
}

fn parse_cell(raw: &str, var: &VariableSchema) -> std::result::Result<f64, String> {
    match var.kind {
        VariableKind::Continuous => {
            let v: f64 = raw
                .parse()
                .map_err(|_| format!("cannot parse `{raw}` as a real number"))?;
            if !v.is_finite() {
                return Err(format!("`{raw}` is not finite"));
            }
            Ok(v)
        }
        VariableKind::Discrete => {
            let m = var.n_levels();
            if let Some(labels) = &var.labels {
                if let Some(pos) = labels.iter().position(|l| l == raw) {
                    return Ok((pos + 1) as f64);
                }
            }
            let level: i64 = raw
                .parse()
                .map_err(|_| format!("cannot parse `{raw}` as a level"))?;
            if level < 1 || level as usize > m {
                return Err(format!("level {level} outside 1..={m}"));
            }
            Ok(level as f64)
        }
    }
}

/// Write a dataset as CSV. Continuous values use the shortest representation
/// that reads back to the same `f64`.
pub fn save_csv(ds: &HybridDataset, path: impl AsRef<Path>, opts: &CsvOptions) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::WriterBuilder::new()
        .delimiter(opts.delimiter_byte()?)
        .from_writer(BufWriter::new(file));
    let schema = ds.schema();
    let mut header = vec![schema.outcome.clone()];
    header.extend(schema.variables.iter().map(|v| v.name.clone()));
    writer.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for i in 0..ds.n_rows() {
        record.clear();
        record.push(ds.outcome(i).to_string());
        for (j, var) in schema.variables.iter().enumerate() {
            if !ds.is_observed(i, j) {
                record.push(opts.na_token.clone());
                continue;
            }
            let v = ds.value(i, j);
            let cell = match (var.kind, &var.labels) {
                (VariableKind::Discrete, Some(labels)) => labels[v as usize - 1].clone(),
                (VariableKind::Discrete, None) => format!("{}", v as i64),
                (VariableKind::Continuous, _) => format!("{v}"),
            };
            record.push(cell);
        }
        writer.write_record(&record)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Random disjoint row partition into `⌈n(1−f)⌉` training and `⌊nf⌋` test
/// rows. Rows keep their original relative order within each part.
pub fn split_train_test(
    ds: &HybridDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(HybridDataset, HybridDataset)> {
    let n = ds.n_rows();
    if n < 2 {
        return Err(Error::InvalidParameter(format!("cannot split {n} rows")));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let n_test = (n as f64 * test_fraction).floor() as usize;
    if n_test == 0 || n_test == n {
        return Err(Error::InvalidParameter(format!(
            "test fraction {test_fraction} leaves an empty part for n = {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, &[rng::stage::SPLIT]));
    let (test, train) = order.split_at_mut(n_test);
    train.sort_unstable();
    test.sort_unstable();
    Ok((ds.select_rows(train), ds.select_rows(test)))
}
