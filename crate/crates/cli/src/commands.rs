//! Subcommand implementations. Each one resolves its options into the
//! library's configuration types, runs, and writes a JSON report that embeds
//! the effective configuration plus CSV side files.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use dp_robust::criterion::CriterionContext;
use dp_robust::ensemble::{read_ensemble, write_ensemble};
use dp_robust::experiments::cv::{kfold_cv, CvRow};
use dp_robust::experiments::data::Dataset;
use dp_robust::experiments::protocols::{ComparisonTable, RealDataReport, SimulationReport, LOSS_SCALE};
use dp_robust::experiments::*;
use dp_robust::{
    build_ensemble, derive_stream, sgd_minimize, CenteringSpec, DpPrior, Error, LossKind, LossSpec, PhiSpec, Result,
    RngStream, RunTrace, SgdConfig, WeightedEnsemble,
};
use rand::RngCore;
use serde::Serialize;

use crate::options::{Approx, Beta, Common, CvArgs, FitArgs, LossArg, RealDataArgs, ReplicateArgs, SimulateArgs};

/// Pretty JSON with a trailing newline.
fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::Data(format!("cannot write {}: {e}", path.display())))
}

fn with_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn prepare_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::Data(format!("cannot create {}: {e}", out.display())))
}

fn single<T: Copy>(values: &Option<Vec<T>>, name: &str) -> Result<Option<T>> {
    match values.as_deref() {
        None => Ok(None),
        Some([v]) => Ok(Some(*v)),
        Some(v) => Err(Error::Config(format!("--{name} takes a single value here, got {}", v.len()))),
    }
}

fn betas(common: &Common) -> Option<Vec<PhiSpec>> {
    common.beta.as_ref().map(|b| b.iter().map(|Beta(p)| *p).collect())
}

fn seed(common: &Common) -> RngStream {
    derive_stream(common.seed.unwrap_or(0), 0)
}

/// Apply the shared overrides to experiment settings.
fn override_settings(settings: &mut RobustSettings, common: &Common) -> Result<()> {
    if let Some(a) = common.approx {
        settings.scheme = a
            .scheme()
            .ok_or_else(|| Error::Config("--approx exact is only available for fit".into()))?;
    }
    if let Some(v) = common.mc_samples {
        settings.mc_samples = v;
    }
    if let Some(v) = common.trunc {
        settings.trunc = v;
    }
    if let Some(v) = common.passes {
        settings.passes = v;
    }
    if let Some(v) = common.step_a {
        settings.step_a = v;
    }
    if let Some(v) = common.step_b {
        settings.step_b = v;
    }
    if let Some(c) = common.scale {
        settings.loss = LossSpec::new(settings.loss.kind, c).map_err(|e| Error::Config(e.to_string()))?;
    }
    settings.validate()
}

fn scale(common: &Common) -> Scale {
    if common.full_scale { Scale::Full } else { Scale::Desk }
}

/// Everything that determines a fit besides the data files.
#[derive(Debug, Clone, Serialize)]
pub struct FitConfig {
    pub data: PathBuf,
    pub test: Option<PathBuf>,
    pub ensemble: Option<PathBuf>,
    pub alpha: f64,
    pub beta: PhiSpec,
    pub approx: Approx,
    pub settings: RobustSettings,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
struct FitReport<'a> {
    command: &'static str,
    config: &'a FitConfig,
    rows: usize,
    theta: &'a [f64],
    averaged_theta: &'a [f64],
    updates: u64,
    criterion_trace: &'a [f64],
    test_metrics: Option<MetricRow>,
}

fn loss_task(loss: LossArg) -> Task {
    match loss {
        LossArg::Logistic => Task::Classification,
        _ => Task::Regression,
    }
}

fn fit_config(args: &FitArgs) -> Result<FitConfig> {
    let c = &args.common;
    let data = args.data.clone().ok_or_else(|| Error::Config("--data is required".into()))?;
    let loss = args.loss.unwrap_or(LossArg::Squared);
    let scale = c.scale.unwrap_or(LOSS_SCALE);
    let (kind, step_a) = match loss {
        LossArg::Squared => (LossKind::SquaredRegression, 50.0),
        LossArg::Logistic => (LossKind::Logistic, 1000.0),
        LossArg::Location => (LossKind::GaussianLocation, 20.0),
    };
    let approx = c.approx.unwrap_or(Approx::Mdmc);
    let alpha = single(&c.alpha, "alpha")?.unwrap_or(if approx == Approx::Exact { 0.0 } else { 1.0 });
    let beta = single(&c.beta, "beta")?.map_or(PhiSpec::Exponential { beta: 1.0 }, |b| b.0);
    let settings = RobustSettings {
        loss: LossSpec::new(kind, scale).map_err(|e| Error::Config(e.to_string()))?,
        // dimension is filled in once the data are read
        centering: CenteringSpec::Empirical,
        scheme: approx.scheme().unwrap_or_default(),
        mc_samples: c.mc_samples.unwrap_or(100),
        trunc: c.trunc.unwrap_or(50),
        passes: c.passes.unwrap_or(50),
        step_a: c.step_a.unwrap_or(step_a),
        step_b: c.step_b.unwrap_or(100.0),
    };
    settings.validate()?;
    DpPrior::new(alpha, CenteringSpec::Empirical).map_err(|e| Error::Config(e.to_string()))?;
    if approx == Approx::Exact && alpha != 0.0 {
        return Err(Error::Config(format!("--approx exact needs alpha = 0, got {alpha}")));
    }
    Ok(FitConfig { data, test: args.test.clone(), ensemble: args.ensemble.clone(), alpha, beta, approx, settings, seed: c.seed.unwrap_or(0) })
}

fn centering(loss: LossKind, dim: usize, prior_mean: Option<f64>) -> CenteringSpec {
    match loss {
        LossKind::SquaredRegression => CenteringSpec::StandardNormalProduct { dim },
        LossKind::Logistic => CenteringSpec::BinaryLabelNormal { dim },
        LossKind::GaussianLocation => CenteringSpec::GaussianLocation { mean: prior_mean.unwrap_or(0.0), sd: 1.0 },
    }
}

/// Load the training data and fill in the data-dependent centering.
fn load_fit(args: &FitArgs) -> Result<(FitConfig, Dataset)> {
    let mut cfg = fit_config(args)?;
    let task = loss_task(args.loss.unwrap_or(LossArg::Squared));
    let data = read_csv_path(&cfg.data, task)?;
    if cfg.settings.loss.kind == LossKind::GaussianLocation && data.dim() != 0 {
        return Err(Error::Data(format!("location model expects a single `target` column, {} has {} features", cfg.data.display(), data.dim())));
    }
    cfg.settings.centering = centering(cfg.settings.loss.kind, data.dim(), args.prior_mean);
    Ok((cfg, data))
}

fn make_ensemble(cfg: &FitConfig, data: &Dataset, stream: RngStream) -> Result<WeightedEnsemble> {
    match cfg.approx.scheme() {
        None => WeightedEnsemble::empirical(&data.rows),
        Some(scheme) => {
            let prior = DpPrior::new(cfg.alpha, cfg.settings.centering.clone())?;
            build_ensemble(scheme, &prior, &data.rows, cfg.settings.mc_samples, cfg.settings.trunc, stream)
        }
    }
}

pub fn fit(args: &FitArgs, out: &Path) -> Result<()> {
    let (cfg, data) = load_fit(args)?;
    let stream = derive_stream(cfg.seed, 0);
    let ensemble = match &cfg.ensemble {
        Some(p) => {
            let f = File::open(p).map_err(|e| Error::Data(format!("{}: {e}", p.display())))?;
            read_ensemble(BufReader::new(f))?
        }
        None => make_ensemble(&cfg, &data, stream.child(0))?,
    };
    let ctx = CriterionContext::new(ensemble, cfg.settings.loss, cfg.beta)?;
    let sgd_seed = stream.child(1).rng().next_u64();
    let dim = cfg.settings.loss.theta_dim(&data.rows[0]);
    let sgd = SgdConfig::new(cfg.settings.step_a, cfg.settings.step_b, cfg.settings.passes, vec![0.0; dim], sgd_seed);
    let trace: RunTrace = sgd_minimize(&ctx, &sgd)?;
    let test_metrics = match &cfg.test {
        Some(p) => {
            let test = read_csv_path(p, data.task)?;
            Some(compute_metrics(&trace.final_theta, &test.rows, &cfg.settings.loss, None)?)
        }
        None => None,
    };
    let report = FitReport {
        command: "fit",
        config: &cfg,
        rows: data.len(),
        theta: &trace.final_theta,
        averaged_theta: &trace.averaged_theta,
        updates: trace.updates,
        criterion_trace: &trace.criterion_values,
        test_metrics,
    };
    write_json(&out.join("fit.json"), &report)?;
    with_file(&out.join("trace.csv"), |w| trace.write_csv(w))
}

pub fn ensemble_cache(args: &FitArgs, out: &Path) -> Result<()> {
    if args.ensemble.is_some() {
        return Err(Error::Config("--ensemble is an input of fit, not of ensemble-cache".into()));
    }
    let (cfg, data) = load_fit(args)?;
    let ensemble = make_ensemble(&cfg, &data, derive_stream(cfg.seed, 0).child(0))?;
    with_file(&out.join("ensemble.csv"), |w| write_ensemble(&ensemble, w))
}

#[derive(Debug, Serialize)]
struct SimulateReport<'a> {
    command: &'static str,
    seed: u64,
    #[serde(flatten)]
    report: &'a SimulationReport,
}

pub fn simulate(args: &SimulateArgs, out: &Path) -> Result<()> {
    let c = &args.common;
    let kind: DgpKind = args
        .dgp
        .as_deref()
        .ok_or_else(|| Error::Config("simulate needs a dgp name (linreg, gauss-outlier or logit)".into()))?
        .parse()?;
    let mut cfg = SimulationConfig::defaults(kind, scale(c));
    override_settings(&mut cfg.settings, c)?;
    if let Some(a) = &c.alpha {
        cfg.alphas = a.clone();
    }
    if let Some(b) = betas(c) {
        cfg.betas = b;
    }
    if let Some(r) = args.replications {
        cfg.replications = r;
    }
    if let Some(t) = args.test_size {
        cfg.test_size = t;
    }
    if cfg.alphas.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
        return Err(Error::Config("alpha values must be finite and >= 0".into()));
    }
    if cfg.replications == 0 || cfg.test_size == 0 {
        return Err(Error::Config("replications and test-size must be positive".into()));
    }
    let report = run_simulation(&cfg, seed(c))?;
    write_json(&out.join("simulate.json"), &SimulateReport { command: "simulate", seed: c.seed.unwrap_or(0), report: &report })?;
    with_file(&out.join("figure.csv"), |w| report.write_figure_csv(w))
}

fn real_config(common: &Common, real: &RealDataArgs) -> Result<(RealDataConfig, Dataset, PathBuf)> {
    let name: RealDataset = real
        .dataset
        .as_deref()
        .ok_or_else(|| Error::Config("a dataset name (pima, wine or liver) is required".into()))?
        .parse()?;
    let path = match &real.data {
        Some(p) => p.clone(),
        None => real.data_dir.clone().unwrap_or_else(|| PathBuf::from("data")).join(name.file_name()),
    };
    if !path.exists() {
        return Err(Error::Data(format!("{} not found; {}", path.display(), name.download_hint())));
    }
    let data = read_csv_path(&path, name.task())?;
    let mut cfg = RealDataConfig::defaults(name, data.dim(), scale(common));
    override_settings(&mut cfg.settings, common)?;
    if let Some(a) = &common.alpha {
        cfg.alpha_grid = a.clone();
    }
    if let Some(b) = single(&common.beta, "beta")? {
        cfg.beta = b.0;
    }
    if let Some(v) = real.train_size {
        cfg.train_size = v;
    }
    if let Some(v) = real.folds {
        cfg.cv_folds = v;
    }
    if cfg.alpha_grid.is_empty() || cfg.alpha_grid.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
        return Err(Error::Config("alpha grid must be non-empty with finite values >= 0".into()));
    }
    Ok((cfg, data, path))
}

#[derive(Debug, Serialize)]
struct CvReport<'a> {
    command: &'static str,
    data: &'a Path,
    seed: u64,
    config: &'a RealDataConfig,
    best_alpha: f64,
    table: &'a [CvRow],
}

/// The cross-validation step of [`run_real_data`], on its own: same
/// standardization, split and streams, so the chosen alpha agrees.
pub fn cross_validate(args: &CvArgs, out: &Path) -> Result<()> {
    let (cfg, data, path) = real_config(&args.common, &args.real)?;
    cfg.settings.validate()?;
    if cfg.train_size >= data.len() {
        return Err(Error::Config(format!("train-size {} must be below the {} rows of {}", cfg.train_size, data.len(), path.display())));
    }
    if cfg.cv_folds < 2 || cfg.cv_folds > cfg.train_size {
        return Err(Error::Config(format!("folds must lie in 2..={}, got {}", cfg.train_size, cfg.cv_folds)));
    }
    let stream = seed(&args.common);
    let (z, _) = standardize(&data)?;
    let (train, _) = z.random_split(cfg.train_size, stream.child(0))?;
    let r = kfold_cv(&train.rows, cfg.cv_folds, &cfg.alpha_grid, cfg.beta, &cfg.settings, stream.child(1))?;
    let report = CvReport { command: "cv", data: &path, seed: args.common.seed.unwrap_or(0), config: &cfg, best_alpha: r.best, table: &r.table };
    write_json(&out.join("cv.json"), &report)?;
    with_file(&out.join("cv.csv"), |w| {
        writeln!(w, "alpha,risk")?;
        for row in &r.table {
            writeln!(w, "{},{}", row.value, row.risk)?;
        }
        Ok(())
    })
}

#[derive(Debug, Serialize)]
struct ReplicateReport<'a> {
    command: &'static str,
    data: &'a Path,
    seed: u64,
    #[serde(flatten)]
    report: &'a RealDataReport,
}

pub fn replicate(args: &ReplicateArgs, out: &Path) -> Result<()> {
    let (mut cfg, data, path) = real_config(&args.common, &args.real)?;
    if let Some(v) = args.batches {
        cfg.batches = v;
        if args.real.folds.is_none() {
            cfg.cv_folds = v;
        }
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if cfg.batches == 0 || cfg.batch_size == 0 {
        return Err(Error::Config("batches and batch-size must be positive".into()));
    }
    if cfg.batches * cfg.batch_size > cfg.train_size {
        return Err(Error::Config(format!(
            "{} batches of {} do not fit in {} training rows",
            cfg.batches, cfg.batch_size, cfg.train_size
        )));
    }
    let report = run_real_data(&data, &cfg, seed(&args.common))?;
    write_json(&out.join("replicate.json"), &ReplicateReport { command: "replicate", data: &path, seed: args.common.seed.unwrap_or(0), report: &report })?;
    let table: &ComparisonTable = &report.table;
    with_file(&out.join("table.csv"), |w| table.write_csv(w))
}
