//! End-to-end experiment protocols: the three simulation studies and the
//! three real-data batch comparisons, each with desk-scale and full-scale
//! defaults.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::cv::{kfold_cv, kfold_cv_l1, CvResult};
use super::data::{standardize, Dataset, Task};
use super::dgp::{DgpKind, DgpSpec};
use super::fit::{Method, RobustSettings};
use super::replicate::{batch_replicate, simulate_replicate, ReplicationReport};
use crate::ambiguity::PhiSpec;
use crate::ensemble::{CenteringSpec, Scheme};
use crate::error::{Error, Result};
use crate::loss::LossSpec;
use crate::sampling::RngStream;

/// Multiplier applied to every loss in the experiments.
pub const LOSS_SCALE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    Desk,
    Full,
}

impl DgpKind {
    pub fn cli_name(&self) -> &'static str {
        match self {
            DgpKind::SparseLinreg => "linreg",
            DgpKind::GaussianOutliers => "gauss-outlier",
            DgpKind::SparseLogit => "logit",
        }
    }
}

impl FromStr for DgpKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linreg" => Ok(DgpKind::SparseLinreg),
            "gauss-outlier" => Ok(DgpKind::GaussianOutliers),
            "logit" => Ok(DgpKind::SparseLogit),
            other => Err(Error::Config(format!("unknown simulation {other:?} (expected linreg, gauss-outlier or logit)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub dgp: DgpSpec,
    pub replications: usize,
    pub test_size: usize,
    pub alphas: Vec<f64>,
    pub betas: Vec<PhiSpec>,
    pub settings: RobustSettings,
}

impl SimulationConfig {
    pub fn defaults(kind: DgpKind, scale: Scale) -> Self {
        let full = scale == Scale::Full;
        let test_size = if full { 5000 } else { 2000 };
        let betas = vec![PhiSpec::Exponential { beta: 1.0 }, PhiSpec::Identity];
        // alpha = a / n with a in {1, 2, 5, 10}
        let scaled_alphas = |n: usize| [1.0, 2.0, 5.0, 10.0].iter().map(|a| a / n as f64).collect::<Vec<_>>();
        match kind {
            DgpKind::SparseLinreg => {
                let dgp = DgpSpec::sparse_linreg(100);
                Self {
                    alphas: scaled_alphas(dgp.n),
                    settings: RobustSettings {
                        loss: LossSpec::squared(LOSS_SCALE),
                        centering: CenteringSpec::StandardNormalProduct { dim: dgp.d },
                        scheme: Scheme::Mdmc,
                        mc_samples: if full { 300 } else { 100 },
                        trunc: 50,
                        passes: 100,
                        step_a: 50.0,
                        step_b: 100.0,
                    },
                    dgp,
                    replications: if full { 200 } else { 20 },
                    test_size,
                    betas,
                }
            }
            DgpKind::GaussianOutliers => {
                let dgp = DgpSpec::gaussian_outliers();
                Self {
                    alphas: vec![1.0, 2.0, 5.0, 10.0],
                    settings: RobustSettings {
                        loss: LossSpec::gaussian_location(LOSS_SCALE),
                        centering: CenteringSpec::GaussianLocation { mean: dgp.contaminated_mean(), sd: 1.0 },
                        scheme: Scheme::Mdmc,
                        mc_samples: if full { 300 } else { 100 },
                        trunc: 50,
                        passes: 100,
                        step_a: 20.0,
                        step_b: 100.0,
                    },
                    dgp,
                    replications: if full { 100 } else { 20 },
                    test_size,
                    betas,
                }
            }
            DgpKind::SparseLogit => {
                let dgp = DgpSpec::sparse_logit(100);
                Self {
                    alphas: scaled_alphas(dgp.n),
                    settings: RobustSettings {
                        loss: LossSpec::logistic(LOSS_SCALE),
                        centering: CenteringSpec::BinaryLabelNormal { dim: dgp.d },
                        scheme: Scheme::Mdmc,
                        mc_samples: if full { 200 } else { 100 },
                        trunc: 50,
                        passes: 50,
                        step_a: 1000.0,
                        step_b: 100.0,
                    },
                    dgp,
                    replications: if full { 200 } else { 20 },
                    test_size,
                    betas,
                }
            }
        }
    }

    /// Robust fits for every `(alpha, beta)` pair, then the unregularized fit.
    pub fn methods(&self) -> Vec<Method> {
        let mut m: Vec<Method> = self
            .alphas
            .iter()
            .flat_map(|&alpha| self.betas.iter().map(move |&beta| Method::Robust { alpha, beta }))
            .collect();
        m.push(Method::Unregularized);
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub config: SimulationConfig,
    pub reports: Vec<ReplicationReport>,
}

impl SimulationReport {
    pub fn report(&self, method: &Method) -> Option<&ReplicationReport> {
        self.reports.iter().find(|r| &r.method == method)
    }

    /// Bar-chart data: one row per method and metric.
    pub fn write_figure_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "method,alpha,beta,metric,mean,std")?;
        for r in &self.reports {
            let (alpha, beta) = match r.method {
                Method::Robust { alpha, beta } => (alpha.to_string(), beta.to_string()),
                _ => (String::new(), String::new()),
            };
            let name = match r.method {
                Method::Robust { beta, .. } if beta.is_identity() => "neutral",
                Method::Robust { .. } => "robust",
                _ => "plain",
            };
            let metrics = [
                ("test_risk", Some(r.mean.test_risk), Some(r.std.test_risk)),
                ("coef_l2_dist", r.mean.coef_l2_dist, r.std.coef_l2_dist),
                ("coef_l2_norm", r.mean.coef_l2_norm, r.std.coef_l2_norm),
            ];
            for (metric, m, s) in metrics {
                if let (Some(m), Some(s)) = (m, s) {
                    writeln!(out, "{name},{alpha},{beta},{metric},{m},{s}")?;
                }
            }
        }
        Ok(())
    }
}

pub fn run_simulation(config: &SimulationConfig, stream: RngStream) -> Result<SimulationReport> {
    config.settings.validate()?;
    let reports = simulate_replicate(&config.dgp, config.replications, config.test_size, &config.methods(), &config.settings, stream)?;
    Ok(SimulationReport { config: config.clone(), reports })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RealDataset {
    Pima,
    Wine,
    Liver,
}

impl RealDataset {
    pub fn task(&self) -> Task {
        match self {
            RealDataset::Pima => Task::Classification,
            _ => Task::Regression,
        }
    }

    pub fn file_name(&self) -> &'static str {
        match self {
            RealDataset::Pima => "pima.csv",
            RealDataset::Wine => "wine.csv",
            RealDataset::Liver => "liver.csv",
        }
    }

    pub fn download_hint(&self) -> &'static str {
        match self {
            RealDataset::Pima => "fetch with `python3 scripts/fetch_data.py pima` (Kaggle diabetes dataset, see data/README.md)",
            RealDataset::Wine => "fetch with `python3 scripts/fetch_data.py wine` (UCI Wine Quality, white wines)",
            RealDataset::Liver => "fetch with `python3 scripts/fetch_data.py liver` (UCI Liver Disorders)",
        }
    }
}

impl fmt::Display for RealDataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RealDataset::Pima => "pima",
            RealDataset::Wine => "wine",
            RealDataset::Liver => "liver",
        })
    }
}

impl FromStr for RealDataset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pima" => Ok(RealDataset::Pima),
            "wine" => Ok(RealDataset::Wine),
            "liver" => Ok(RealDataset::Liver),
            other => Err(Error::Config(format!("unknown dataset {other:?} (expected pima, wine or liver)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealDataConfig {
    pub dataset: RealDataset,
    pub train_size: usize,
    pub batches: usize,
    pub batch_size: usize,
    pub cv_folds: usize,
    pub alpha_grid: Vec<f64>,
    pub l1_grid: Vec<f64>,
    pub beta: PhiSpec,
    pub settings: RobustSettings,
}

impl RealDataConfig {
    /// `dim` is the number of feature columns.
    pub fn defaults(dataset: RealDataset, dim: usize, scale: Scale) -> Self {
        let (train_size, batches, batch_size) = match dataset {
            RealDataset::Pima => (300, 15, 20),
            RealDataset::Wine => (300, 10, 30),
            RealDataset::Liver => (200, 10, 20),
        };
        let (loss, centering, step_a) = match dataset.task() {
            Task::Classification => (LossSpec::logistic(LOSS_SCALE), CenteringSpec::BinaryLabelNormal { dim }, 1000.0),
            Task::Regression => (LossSpec::squared(LOSS_SCALE), CenteringSpec::StandardNormalProduct { dim }, 50.0),
        };
        Self {
            dataset,
            train_size,
            batches,
            batch_size,
            cv_folds: batches,
            alpha_grid: vec![0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0],
            l1_grid: vec![1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 0.1, 0.3, 1.0],
            beta: PhiSpec::Exponential { beta: 1.0 },
            settings: RobustSettings {
                loss,
                centering,
                scheme: Scheme::Mdmc,
                mc_samples: if scale == Scale::Full { 300 } else { 100 },
                trunc: 50,
                passes: 50,
                step_a,
                step_b: 100.0,
            },
        }
    }
}

/// Tables-style comparison: columns are methods, rows are average and
/// standard deviation of the test metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub columns: Vec<String>,
    pub average: Vec<f64>,
    pub std: Vec<f64>,
}

impl ComparisonTable {
    pub fn from_reports(columns: &[&str], reports: &[ReplicationReport]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            average: reports.iter().map(|r| r.mean.test_risk).collect(),
            std: reports.iter().map(|r| r.std.test_risk).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, ",{}", self.columns.join(","))?;
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        writeln!(out, "Average,{}", join(&self.average))?;
        writeln!(out, "Standard Deviation,{}", join(&self.std))?;
        Ok(())
    }
}

pub const TABLE_COLUMNS: [&str; 3] = ["Unregularized", "L1 Regularized", "DP Robust"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealDataReport {
    pub config: RealDataConfig,
    pub rows: usize,
    pub alpha_cv: CvResult,
    pub l1_cv: CvResult,
    /// Unregularized, L1, DP robust, in table column order.
    pub reports: Vec<ReplicationReport>,
    pub table: ComparisonTable,
}

/// Standardize, hold out a test set, cross-validate `alpha` and the L1
/// penalty on the training rows, then compare the three methods on disjoint
/// training batches.
pub fn run_real_data(data: &Dataset, config: &RealDataConfig, stream: RngStream) -> Result<RealDataReport> {
    config.settings.validate()?;
    if data.task != config.dataset.task() {
        return Err(Error::Config(format!("{} needs a {:?} dataset", config.dataset, config.dataset.task())));
    }
    if config.train_size >= data.len() {
        return Err(Error::Data(format!(
            "{} has {} rows; at least {} are needed for training plus a test set",
            config.dataset,
            data.len(),
            config.train_size + 1
        )));
    }
    let (z, _) = standardize(data)?;
    let (train, test) = z.random_split(config.train_size, stream.child(0))?;
    let alpha_cv = kfold_cv(&train.rows, config.cv_folds, &config.alpha_grid, config.beta, &config.settings, stream.child(1))?;
    let l1_cv = kfold_cv_l1(&train.rows, config.cv_folds, &config.l1_grid, &config.settings, stream.child(2))?;
    let methods = [
        Method::Unregularized,
        Method::L1 { lambda: l1_cv.best },
        Method::Robust { alpha: alpha_cv.best, beta: config.beta },
    ];
    let reports = batch_replicate(&train.rows, &test.rows, config.batches, config.batch_size, &methods, &config.settings, stream.child(3))?;
    let table = ComparisonTable::from_reports(&TABLE_COLUMNS, &reports);
    Ok(RealDataReport { config: config.clone(), rows: data.len(), alpha_cv, l1_cv, reports, table })
}
