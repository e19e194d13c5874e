//! Command-line flags and their TOML counterparts.
//!
//! Every option is optional on the command line so that a `--config` file can
//! supply it; flags win over the file. Top-level keys of the file are shared
//! options, a table named after the subcommand holds the rest:
//!
//! ```toml
//! seed = 7
//! passes = 50
//! beta = ["1", "inf"]
//!
//! [simulate]
//! replications = 5
//! ```

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use dp_robust::{Error, PhiSpec, Result, Scheme};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Parser)]
#[command(name = "dp-robust", version, about = "Dirichlet-process robust estimation toolkit")]
pub struct Cli {
    /// TOML file with option defaults; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimize the robust criterion on a CSV dataset.
    Fit(FitArgs),
    /// Run one of the simulation studies.
    Simulate(SimulateArgs),
    /// Cross-validate the DP concentration on a real dataset.
    Cv(CvArgs),
    /// Batch-replication comparison on a real dataset.
    Replicate(ReplicateArgs),
    /// Build a Monte Carlo ensemble and write it to disk.
    EnsembleCache(FitArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Fit(_) => "fit",
            Command::Simulate(_) => "simulate",
            Command::Cv(_) => "cv",
            Command::Replicate(_) => "replicate",
            Command::EnsembleCache(_) => "ensemble-cache",
        }
    }
}

/// `beta` as given by the user: a positive number or `inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(into = "String")]
pub struct Beta(pub PhiSpec);

impl std::str::FromStr for Beta {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        s.parse().map(Beta)
    }
}

impl From<Beta> for String {
    fn from(b: Beta) -> String {
        b.0.to_string()
    }
}

impl<'de> Deserialize<'de> for Beta {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let s = match Raw::deserialize(d)? {
            Raw::Num(v) => v.to_string(),
            Raw::Text(s) => s,
        };
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Approx {
    Sbmc,
    Mdmc,
    Bbmc,
    /// The empirical measure itself (one sample, weights 1/n); needs alpha = 0.
    Exact,
}

impl Approx {
    pub fn scheme(self) -> Option<Scheme> {
        match self {
            Approx::Sbmc => Some(Scheme::Sbmc),
            Approx::Mdmc => Some(Scheme::Mdmc),
            Approx::Bbmc => Some(Scheme::Bbmc),
            Approx::Exact => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum LossArg {
    Squared,
    Logistic,
    Location,
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Common {
    /// DP concentration; a comma-separated list where a grid is used.
    #[arg(long, value_delimiter = ',')]
    pub alpha: Option<Vec<f64>>,
    /// Ambiguity aversion: a positive number or `inf`; comma-separated list allowed.
    #[arg(long, value_delimiter = ',')]
    pub beta: Option<Vec<Beta>>,
    /// Posterior approximation scheme.
    #[arg(long, value_enum)]
    pub approx: Option<Approx>,
    /// Number of Monte Carlo posterior samples N.
    #[arg(long)]
    pub mc_samples: Option<usize>,
    /// Truncation level T.
    #[arg(long)]
    pub trunc: Option<usize>,
    /// SGD passes over the ensemble.
    #[arg(long)]
    pub passes: Option<usize>,
    /// Step size is step-a / (step-b + sqrt(t)).
    #[arg(long)]
    pub step_a: Option<f64>,
    #[arg(long)]
    pub step_b: Option<f64>,
    /// Loss multiplier c.
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Use the full-size experiment defaults.
    #[arg(long)]
    #[serde(default)]
    pub full_scale: bool,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct FitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Training CSV (features, then a `target` column).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Optional held-out CSV for test metrics.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub loss: Option<LossArg>,
    /// Mean of the location-model centering N(mean, 1).
    #[arg(long)]
    pub prior_mean: Option<f64>,
    /// Ensemble cache written by `ensemble-cache` (fit only).
    #[arg(long)]
    pub ensemble: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// linreg, gauss-outlier or logit.
    pub dgp: Option<String>,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub test_size: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct RealDataArgs {
    /// pima, wine or liver.
    pub dataset: Option<String>,
    /// Directory holding `<dataset>.csv`.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Explicit CSV path (overrides --data-dir).
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub train_size: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct CvArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub real: RealDataArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ReplicateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub real: RealDataArgs,
    #[arg(long)]
    pub batches: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

/// Read the TOML file into a JSON object holding the shared keys plus the
/// keys of the `[command]` table.
fn config_layer(path: &Path, command: &str) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let table: toml::Table = toml::from_str(&text).map_err(|e| {
        Error::Config(format!("{}: {}", path.display(), e.message()))
    })?;
    let mut out = Map::new();
    let mut section = Map::new();
    for (k, v) in table {
        let v = serde_json::to_value(v).map_err(|e| Error::Config(e.to_string()))?;
        match v {
            Value::Object(m) if k == command => section = m,
            // tables for other subcommands are ignored
            Value::Object(_) => {}
            v => {
                out.insert(k, v);
            }
        }
    }
    out.extend(section);
    Ok(out)
}

/// Overlay command-line values on the config file and rebuild the options.
/// Unknown keys in the file are configuration errors.
pub fn resolve<T>(flags: &T, config: Option<&Path>, command: &str) -> Result<T>
where
    T: Serialize + DeserializeOwned + Default,
{
    let Some(path) = config else {
        return clone_via_json(flags);
    };
    let mut merged = config_layer(path, command)?;
    let known = match serde_json::to_value(T::default()).map_err(|e| Error::Config(e.to_string()))? {
        Value::Object(m) => m,
        _ => unreachable!("options serialize to objects"),
    };
    if let Some(k) = merged.keys().find(|k| !known.contains_key(*k)) {
        return Err(Error::Config(format!("unknown key {k:?} in {}", path.display())));
    }
    if let Value::Object(f) = serde_json::to_value(flags).map_err(|e| Error::Config(e.to_string()))? {
        for (k, v) in f {
            // absent flags serialize as null, unset switches as false
            if !(v.is_null() || v == Value::Bool(false)) {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn clone_via_json<T: Serialize + DeserializeOwned>(v: &T) -> Result<T> {
    let j = serde_json::to_value(v).map_err(|e| Error::Config(e.to_string()))?;
    serde_json::from_value(j).map_err(|e| Error::Config(e.to_string()))
}
