//! Command-line entry points. Each command reads an optional JSON config,
//! applies flag overrides and writes a snapshot of the effective config next
//! to its outputs.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::baselines::{complete_cases, external_imputation_ingest, fit_dataset, impute_mean_mode};
use crate::benchmark::{export_splits, run_benchmark, BenchmarkConfig, Method};
use crate::data::{load_csv, save_csv, CsvOptions, Schema};
use crate::error::{Error, Result};
use crate::missingness::{inject, Mechanism, MissingnessSpec};
use crate::model::{Design, ModelParams};
use crate::prediction::{predict_dataset, write_predictions_csv, PredictConfig};
use crate::saem::{fit_saem, initial_params, SaemConfig};
use crate::simulate::{synthetic_spec, SyntheticDesign};

#[derive(Debug, Parser)]
#[command(name = "mixsaem", version, about = "Logistic regression with missing mixed-type covariates")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic dataset.
    Simulate(CommonArgs),
    /// Mask cells of a fully observed dataset.
    Inject(InjectArgs),
    /// Fit a model by SAEM or a baseline.
    Fit(FitArgs),
    /// Predict class probabilities for a dataset.
    Predict(PredictArgs),
    /// Replicated comparison of methods on synthetic data.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Dataset CSV.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Schema JSON.
    #[arg(long)]
    pub schema: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct InjectArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub mechanism: Option<String>,
    #[arg(long)]
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    /// saem, saem_replay, mm, cc, full or external.
    #[arg(long)]
    pub method: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    /// Fitted parameters JSON.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Monte-Carlo draws per sample.
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub mechanism: Option<String>,
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub runs: Option<usize>,
    /// Repeat or comma-separate to select several methods.
    #[arg(long, value_delimiter = ',')]
    pub method: Vec<String>,
    /// Also write each run's masked split for external imputation.
    #[arg(long)]
    pub export_splits: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateConfig {
    pub seed: u64,
    pub design: SyntheticDesign,
    pub out_dir: PathBuf,
    pub csv: CsvOptions,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            design: SyntheticDesign::default(),
            out_dir: PathBuf::from("out/simulate"),
            csv: CsvOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InjectConfig {
    pub input: PathBuf,
    pub schema: PathBuf,
    pub seed: u64,
    pub mechanism: Mechanism,
    pub rate: f64,
    /// Full spec; when absent, MCAR hits every covariate and MAR uses the
    /// synthetic targets `x1, x2, x4, x6` with drivers `x3, x5, x7`.
    pub missingness: Option<MissingnessSpec>,
    pub out_dir: PathBuf,
    pub csv: CsvOptions,
}

impl Default for InjectConfig {
    fn default() -> Self {
        Self {
            input: PathBuf::from("out/simulate/data.csv"),
            schema: PathBuf::from("out/simulate/schema.json"),
            seed: 1,
            mechanism: Mechanism::Mcar,
            rate: 0.3,
            missingness: None,
            out_dir: PathBuf::from("out/inject"),
            csv: CsvOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub input: PathBuf,
    pub schema: PathBuf,
    pub method: Method,
    pub saem: SaemConfig,
    pub baseline_ridge: f64,
    pub out_dir: PathBuf,
    pub csv: CsvOptions,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            input: PathBuf::from("out/inject/data.csv"),
            schema: PathBuf::from("out/inject/schema.json"),
            method: Method::Saem,
            saem: SaemConfig {
                loglik_samples: 20,
                ..SaemConfig::default()
            },
            baseline_ridge: 1e-8,
            out_dir: PathBuf::from("out/fit"),
            csv: CsvOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictCliConfig {
    pub input: PathBuf,
    pub schema: PathBuf,
    pub params: PathBuf,
    pub prediction: PredictConfig,
    pub out_dir: PathBuf,
    pub csv: CsvOptions,
}

impl Default for PredictCliConfig {
    fn default() -> Self {
        Self {
            input: PathBuf::from("out/inject/data.csv"),
            schema: PathBuf::from("out/inject/schema.json"),
            params: PathBuf::from("out/fit/params.json"),
            prediction: PredictConfig::default(),
            out_dir: PathBuf::from("out/predict"),
            csv: CsvOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkCliConfig {
    #[serde(flatten)]
    pub benchmark: BenchmarkConfig,
    pub out_dir: PathBuf,
    pub export_splits: bool,
}

impl Default for BenchmarkCliConfig {
    fn default() -> Self {
        Self {
            benchmark: BenchmarkConfig::default(),
            out_dir: PathBuf::from("out/benchmark"),
            export_splits: false,
        }
    }
}

fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Usage(format!("config {}: {e}", p.display())))
        }
    }
}

fn snapshot<T: Serialize>(dir: &Path, config: &T) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(config)?).map_err(|e| Error::io(&path, e))
}

fn apply_data(input: &mut PathBuf, schema: &mut PathBuf, args: &DataArgs) {
    if let Some(p) = &args.input {
        input.clone_from(p);
    }
    if let Some(p) = &args.schema {
        schema.clone_from(p);
    }
}

pub fn cmd_simulate(args: &CommonArgs) -> Result<Vec<PathBuf>> {
    let mut cfg: SimulateConfig = load_config(args.config.as_deref())?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(d) = &args.out_dir {
        cfg.out_dir.clone_from(d);
    }
    let ds = cfg.design.simulate(cfg.seed)?;
    snapshot(&cfg.out_dir, &cfg)?;
    let data = cfg.out_dir.join("data.csv");
    let schema = cfg.out_dir.join("schema.json");
    let truth = cfg.out_dir.join("truth.json");
    save_csv(&ds, &data, &cfg.csv)?;
    ds.schema().save(&schema)?;
    cfg.design.truth()?.save(&truth)?;
    Ok(vec![data, schema, truth])
}

pub fn cmd_inject(args: &InjectArgs) -> Result<Vec<PathBuf>> {
    let mut cfg: InjectConfig = load_config(args.common.config.as_deref())?;
    apply_data(&mut cfg.input, &mut cfg.schema, &args.data);
    if let Some(s) = args.common.seed {
        cfg.seed = s;
    }
    if let Some(d) = &args.common.out_dir {
        cfg.out_dir.clone_from(d);
    }
    if let Some(m) = &args.mechanism {
        cfg.mechanism = m.parse()?;
    }
    if let Some(r) = args.rate {
        cfg.rate = r;
    }
    let mut spec = match &cfg.missingness {
        Some(s) => s.clone(),
        None => synthetic_spec(cfg.mechanism, cfg.rate, cfg.seed),
    };
    if args.mechanism.is_some() {
        spec.mechanism = cfg.mechanism;
    }
    if args.rate.is_some() {
        spec.rate = cfg.rate;
    }
    spec.seed = cfg.seed;
    let schema = Schema::load(&cfg.schema)?;
    let ds = load_csv(&cfg.input, &schema, &cfg.csv)?;
    let out = inject(&ds, &spec)?;
    snapshot(&cfg.out_dir, &cfg)?;
    let data = cfg.out_dir.join("data.csv");
    let schema_out = cfg.out_dir.join("schema.json");
    save_csv(&out, &data, &cfg.csv)?;
    schema.save(&schema_out)?;
    Ok(vec![data, schema_out])
}

pub fn cmd_fit(args: &FitArgs) -> Result<Vec<PathBuf>> {
    let mut cfg: FitConfig = load_config(args.common.config.as_deref())?;
    apply_data(&mut cfg.input, &mut cfg.schema, &args.data);
    if let Some(s) = args.common.seed {
        cfg.saem.seed = s;
    }
    if let Some(d) = &args.common.out_dir {
        cfg.out_dir.clone_from(d);
    }
    if let Some(m) = &args.method {
        cfg.method = m.parse()?;
    }
    let schema = Schema::load(&cfg.schema)?;
    let ds = match cfg.method {
        Method::External => external_imputation_ingest(&cfg.input, &schema, &cfg.csv)?,
        _ => load_csv(&cfg.input, &schema, &cfg.csv)?,
    };
    let design = Design::from_schema(&schema, cfg.saem.encoding);
    let mut outputs = Vec::new();
    let params = match cfg.method {
        Method::Saem | Method::SaemReplay => {
            let mut saem = cfg.saem.clone();
            if cfg.method == Method::SaemReplay && saem.beta_objective == Default::default() {
                saem.beta_objective = crate::saem::BetaObjective::Replay { window: 10 };
            }
            let fit = fit_saem(&ds, &saem)?;
            let traj = cfg.out_dir.join("trajectory.csv");
            std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
            fit.write_trajectory_csv(&traj)?;
            outputs.push(traj);
            fit.params
        }
        method => {
            let train = match method {
                Method::Mm => impute_mean_mode(&ds)?,
                Method::Cc => complete_cases(&ds),
                _ => ds.clone(),
            };
            let beta = fit_dataset(&train, &design, cfg.baseline_ridge)?;
            // covariate model from the observed cells, so predict can use it
            let base = initial_params(&ds, design.clone())?;
            ModelParams { beta, ..base }
        }
    };
    snapshot(&cfg.out_dir, &cfg)?;
    let path = cfg.out_dir.join("params.json");
    params.save(&path)?;
    outputs.insert(0, path);
    Ok(outputs)
}

pub fn cmd_predict(args: &PredictArgs) -> Result<Vec<PathBuf>> {
    let mut cfg: PredictCliConfig = load_config(args.common.config.as_deref())?;
    apply_data(&mut cfg.input, &mut cfg.schema, &args.data);
    if let Some(p) = &args.params {
        cfg.params.clone_from(p);
    }
    if let Some(s) = args.common.seed {
        cfg.prediction.seed = s;
    }
    if let Some(s) = args.samples {
        cfg.prediction.samples = s;
    }
    if let Some(d) = &args.common.out_dir {
        cfg.out_dir.clone_from(d);
    }
    let schema = Schema::load(&cfg.schema)?;
    let ds = load_csv(&cfg.input, &schema, &cfg.csv)?;
    let params = ModelParams::load(&cfg.params)?;
    let out = predict_dataset(&params, &ds, &cfg.prediction)?;
    snapshot(&cfg.out_dir, &cfg)?;
    let path = cfg.out_dir.join("predictions.csv");
    write_predictions_csv(&path, &out)?;
    Ok(vec![path])
}

pub fn cmd_benchmark(args: &BenchmarkArgs, threads: Option<usize>) -> Result<Vec<PathBuf>> {
    let mut cfg: BenchmarkCliConfig = load_config(args.common.config.as_deref())?;
    let b = &mut cfg.benchmark;
    if let Some(s) = args.common.seed {
        b.seed = s;
    }
    if let Some(m) = &args.mechanism {
        b.mechanism = m.parse()?;
    }
    if let Some(r) = args.rate {
        b.rate = r;
    }
    if let Some(r) = args.runs {
        b.runs = r;
    }
    if !args.method.is_empty() {
        b.methods = args.method.iter().map(|m| m.parse()).collect::<Result<_>>()?;
    }
    if let Some(t) = threads {
        b.threads = t;
    }
    if let Some(d) = &args.common.out_dir {
        cfg.out_dir.clone_from(d);
    }
    cfg.export_splits |= args.export_splits;
    if cfg.export_splits {
        export_splits(&cfg.benchmark, cfg.out_dir.join("splits"))?;
    }
    let report = run_benchmark(&cfg.benchmark)?;
    let written = report.write(&cfg.out_dir)?;
    // the report's own config.json lacks the CLI-only fields
    snapshot(&cfg.out_dir, &cfg)?;
    print!("{}", report.summary_text());
    Ok(written)
}

/// Dispatch a parsed command line.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    if let (Some(t), false) = (cli.threads, matches!(cli.command, Command::Benchmark(_))) {
        if t == 0 {
            return Err(Error::Usage("--threads must be at least 1".into()));
        }
        // a second initialization (e.g. in tests) keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Inject(a) => cmd_inject(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Benchmark(a) => cmd_benchmark(a, cli.threads),
    }
}
