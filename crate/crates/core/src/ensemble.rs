//! Monte Carlo approximations of the Dirichlet process posterior.
//!
//! Each scheme turns `(prior, data)` into a [`WeightedEnsemble`]: `N` finite
//! discrete measures, each a simplex weight vector over materialized atoms.
//!
//! * SBMC: stick-breaking with `Beta(1, alpha + n)` sticks truncated after `T`
//!   steps; the leftover stick mass goes to one extra predictive atom (stored
//!   last), so every sample has `T + 1` atoms.
//! * MDMC: `T` predictive atoms with symmetric `Dirichlet((alpha + n) / T)`
//!   weights.
//! * BBMC: the `n` data points themselves with flat Dirichlet weights
//!   (Bayesian bootstrap, the `alpha = 0` posterior).
//!
//! Sample `i` is generated from substream `i` of the caller's stream, so the
//! ensemble does not depend on how the work is scheduled across threads.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::Observation;
use crate::sampling::{
    sample_beta_1_eta, sample_dirichlet_symmetric, sample_mvn_compound_symmetry, sample_standard_normal,
    RngStream,
};

/// Named samplers for the centering measure `p0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CenteringSpec {
    /// `y ~ N(0, 1)` independent of `x ~ N(0, I_dim)`.
    StandardNormalProduct { dim: usize },
    /// `y ~ N(0, 1)` independent of compound-symmetry `x` with correlation `rho`.
    CompoundSymmetryNormal { dim: usize, rho: f64 },
    /// `y` uniform on {+1, -1} independent of `x ~ N(0, I_dim)`.
    BinaryLabelNormal { dim: usize },
    /// Scalar `xi ~ N(mean, sd^2)` for the location model.
    GaussianLocation { mean: f64, sd: f64 },
    /// Uniform over a fixed list of points.
    PointMasses { atoms: Vec<Observation> },
    /// `y ~ N(0, 1)`, `x ~ N(0, diag(1 / |theta_k|))`. The covariance depends
    /// on `theta`, so this centering has an analytic risk but cannot be sampled.
    LassoVariance { dim: usize },
    /// `p0` equal to the empirical distribution of the data.
    Empirical,
}

impl CenteringSpec {
    /// Draw one point from `p0`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, data: &[Observation]) -> Result<Observation> {
        match self {
            CenteringSpec::StandardNormalProduct { dim } => {
                let x = (0..*dim).map(|_| sample_standard_normal(rng)).collect();
                Ok(Observation::new(x, sample_standard_normal(rng)))
            }
            CenteringSpec::CompoundSymmetryNormal { dim, rho } => {
                let x = sample_mvn_compound_symmetry(rng, *dim, *rho)?;
                Ok(Observation::new(x, sample_standard_normal(rng)))
            }
            CenteringSpec::BinaryLabelNormal { dim } => {
                let x = (0..*dim).map(|_| sample_standard_normal(rng)).collect();
                let y = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                Ok(Observation::new(x, y))
            }
            CenteringSpec::GaussianLocation { mean, sd } => {
                Ok(Observation::scalar(mean + sd * sample_standard_normal(rng)))
            }
            CenteringSpec::PointMasses { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::Config("point-mass centering has no atoms".into()));
                }
                Ok(atoms[rng.gen_range(0..atoms.len())].clone())
            }
            CenteringSpec::LassoVariance { .. } => Err(Error::Config(
                "the LASSO-variance centering depends on theta and cannot be sampled".into(),
            )),
            CenteringSpec::Empirical => {
                if data.is_empty() {
                    return Err(Error::input("empirical centering needs at least one observation"));
                }
                Ok(data[rng.gen_range(0..data.len())].clone())
            }
        }
    }
}

/// Dirichlet process prior `DP(alpha, p0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpPrior {
    pub alpha: f64,
    pub centering: CenteringSpec,
}

impl DpPrior {
    pub fn new(alpha: f64, centering: CenteringSpec) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::param(format!("DP concentration must be >= 0, got {alpha}")));
        }
        Ok(Self { alpha, centering })
    }

    /// Mixing weight of `p0` in the posterior predictive.
    pub fn prior_weight(&self, n: usize) -> f64 {
        self.alpha / (self.alpha + n as f64)
    }
}

/// Draw from the posterior predictive
/// `alpha/(alpha+n) p0 + n/(alpha+n) empirical`.
pub fn predictive_draw<R: Rng + ?Sized>(prior: &DpPrior, data: &[Observation], rng: &mut R) -> Result<Observation> {
    let n = data.len();
    if n == 0 && prior.alpha == 0.0 {
        return Err(Error::input("predictive is undefined with no data and alpha = 0"));
    }
    let u: f64 = rng.gen();
    if u * (prior.alpha + n as f64) < prior.alpha {
        prior.centering.sample(rng, data)
    } else {
        Ok(data[rng.gen_range(0..n)].clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Sbmc,
    #[default]
    Mdmc,
    Bbmc,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Sbmc => "sbmc",
            Scheme::Mdmc => "mdmc",
            Scheme::Bbmc => "bbmc",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sbmc" => Ok(Scheme::Sbmc),
            "mdmc" => Ok(Scheme::Mdmc),
            "bbmc" => Ok(Scheme::Bbmc),
            other => Err(Error::Config(format!("unknown approximation scheme {other:?} (sbmc|mdmc|bbmc)"))),
        }
    }
}

/// One simulated discrete measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample {
    pub weights: Vec<f64>,
    pub atoms: Vec<Observation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMeta {
    pub scheme: Scheme,
    pub alpha: f64,
    pub n: usize,
    /// Truncation level `T` (equal to `n` for BBMC).
    pub trunc: usize,
    pub samples: usize,
    pub seed: u64,
    pub substream: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedEnsemble {
    pub samples: Vec<WeightedSample>,
    pub meta: EnsembleMeta,
}

impl WeightedEnsemble {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Check lengths and the simplex constraint (`|sum - 1| <= 1e-10`).
    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.samples.iter().enumerate() {
            if s.weights.len() != s.atoms.len() {
                return Err(Error::Shape { expected: s.weights.len(), got: s.atoms.len() });
            }
            if s.weights.iter().any(|w| !(*w >= 0.0)) {
                return Err(Error::input(format!("sample {i} has a negative or NaN weight")));
            }
            let total: f64 = s.weights.iter().sum();
            if (total - 1.0).abs() > 1e-10 {
                return Err(Error::input(format!("sample {i} weights sum to {total}")));
            }
        }
        Ok(())
    }

    /// A single sample holding `data` with uniform weights: the exact
    /// empirical measure.
    pub fn empirical(data: &[Observation]) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::input("empirical ensemble needs at least one observation"));
        }
        let n = data.len();
        Ok(Self {
            samples: vec![WeightedSample { weights: vec![1.0 / n as f64; n], atoms: data.to_vec() }],
            meta: EnsembleMeta { scheme: Scheme::Bbmc, alpha: 0.0, n, trunc: n, samples: 1, seed: 0, substream: 0 },
        })
    }
}

fn check_counts(samples: usize, trunc: usize) -> Result<()> {
    if samples == 0 || trunc == 0 {
        return Err(Error::param(format!(
            "ensemble needs N >= 1 and T >= 1, got N = {samples}, T = {trunc}"
        )));
    }
    Ok(())
}

fn build<F>(samples: usize, stream: RngStream, meta: EnsembleMeta, one: F) -> Result<WeightedEnsemble>
where
    F: Fn(&mut crate::sampling::StreamRng) -> Result<WeightedSample> + Sync,
{
    let samples = (0..samples as u64)
        .into_par_iter()
        .map(|i| one(&mut stream.child(i).rng()))
        .collect::<Result<Vec<_>>>()?;
    Ok(WeightedEnsemble { samples, meta })
}

/// Stick-breaking Monte Carlo ensemble with `T + 1` atoms per sample.
pub fn sbmc_ensemble(
    prior: &DpPrior,
    data: &[Observation],
    samples: usize,
    trunc: usize,
    stream: RngStream,
) -> Result<WeightedEnsemble> {
    check_counts(samples, trunc)?;
    let eta = prior.alpha + data.len() as f64;
    let meta = meta(Scheme::Sbmc, prior, data, trunc, samples, stream);
    build(samples, stream, meta, |rng| {
        let mut weights = Vec::with_capacity(trunc + 1);
        let mut atoms = Vec::with_capacity(trunc + 1);
        let mut remaining = 1.0;
        for _ in 0..trunc {
            atoms.push(predictive_draw(prior, data, rng)?);
            let b = sample_beta_1_eta(rng, eta)?;
            weights.push(b * remaining);
            remaining *= 1.0 - b;
        }
        atoms.push(predictive_draw(prior, data, rng)?);
        weights.push(remaining);
        Ok(WeightedSample { weights, atoms })
    })
}

/// Multinomial-Dirichlet Monte Carlo ensemble with `T` atoms per sample.
pub fn mdmc_ensemble(
    prior: &DpPrior,
    data: &[Observation],
    samples: usize,
    trunc: usize,
    stream: RngStream,
) -> Result<WeightedEnsemble> {
    check_counts(samples, trunc)?;
    let conc = (prior.alpha + data.len() as f64) / trunc as f64;
    let meta = meta(Scheme::Mdmc, prior, data, trunc, samples, stream);
    build(samples, stream, meta, |rng| {
        let weights = sample_dirichlet_symmetric(rng, trunc, conc)?;
        let atoms = (0..trunc)
            .map(|_| predictive_draw(prior, data, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(WeightedSample { weights, atoms })
    })
}

/// Bayesian bootstrap ensemble: the data points with flat Dirichlet weights.
pub fn bbmc_ensemble(data: &[Observation], samples: usize, stream: RngStream) -> Result<WeightedEnsemble> {
    if data.is_empty() {
        return Err(Error::input("Bayesian bootstrap needs at least one observation"));
    }
    check_counts(samples, data.len())?;
    let n = data.len();
    let meta = EnsembleMeta {
        scheme: Scheme::Bbmc,
        alpha: 0.0,
        n,
        trunc: n,
        samples,
        seed: stream.seed,
        substream: stream.substream_id,
    };
    build(samples, stream, meta, |rng| {
        let weights = sample_dirichlet_symmetric(rng, n, 1.0)?;
        Ok(WeightedSample { weights, atoms: data.to_vec() })
    })
}

/// Dispatch on [`Scheme`]. BBMC ignores `prior` and `trunc`.
pub fn build_ensemble(
    scheme: Scheme,
    prior: &DpPrior,
    data: &[Observation],
    samples: usize,
    trunc: usize,
    stream: RngStream,
) -> Result<WeightedEnsemble> {
    match scheme {
        Scheme::Sbmc => sbmc_ensemble(prior, data, samples, trunc, stream),
        Scheme::Mdmc => mdmc_ensemble(prior, data, samples, trunc, stream),
        Scheme::Bbmc => bbmc_ensemble(data, samples, stream),
    }
}

fn meta(scheme: Scheme, prior: &DpPrior, data: &[Observation], trunc: usize, samples: usize, stream: RngStream) -> EnsembleMeta {
    EnsembleMeta {
        scheme,
        alpha: prior.alpha,
        n: data.len(),
        trunc,
        samples,
        seed: stream.seed,
        substream: stream.substream_id,
    }
}

const CACHE_MAGIC: &str = "# dp-robust ensemble v1";

/// Write an ensemble in the columnar cache format.
///
/// ```text
/// # dp-robust ensemble v1
/// # scheme=mdmc alpha=1 n=100 trunc=50 samples=200 seed=7 substream=0 dim=3
/// sample,weight,y,x0,x1,x2
/// 0,0.0213...,1.5,0.1,-0.2,0.3
/// ```
///
/// One row per atom; floats use the shortest representation that round-trips.
pub fn write_ensemble<W: Write>(ensemble: &WeightedEnsemble, mut out: W) -> Result<()> {
    let dim = ensemble
        .samples
        .first()
        .and_then(|s| s.atoms.first())
        .map_or(0, |a| a.x.len());
    let m = &ensemble.meta;
    writeln!(out, "{CACHE_MAGIC}")?;
    writeln!(
        out,
        "# scheme={} alpha={} n={} trunc={} samples={} seed={} substream={} dim={}",
        m.scheme, m.alpha, m.n, m.trunc, m.samples, m.seed, m.substream, dim
    )?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["sample".to_string(), "weight".to_string(), "y".to_string()];
    header.extend((0..dim).map(|k| format!("x{k}")));
    w.write_record(&header)?;
    let mut row: Vec<String> = Vec::with_capacity(dim + 3);
    for (i, s) in ensemble.samples.iter().enumerate() {
        for (wt, atom) in s.weights.iter().zip(&s.atoms) {
            if atom.x.len() != dim {
                return Err(Error::Shape { expected: dim, got: atom.x.len() });
            }
            row.clear();
            row.push(i.to_string());
            row.push(wt.to_string());
            row.push(atom.y.to_string());
            row.extend(atom.x.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read an ensemble written by [`write_ensemble`].
pub fn read_ensemble<R: BufRead>(mut input: R) -> Result<WeightedEnsemble> {
    let bad = |msg: &str| Error::Data(format!("ensemble cache: {msg}"));
    let mut line = String::new();
    input.read_line(&mut line)?;
    if line.trim_end() != CACHE_MAGIC {
        return Err(bad("missing header line"));
    }
    line.clear();
    input.read_line(&mut line)?;
    let fields = line.trim().strip_prefix('#').ok_or_else(|| bad("missing metadata line"))?;
    let lookup = |key: &str| -> Result<&str> {
        fields
            .split_whitespace()
            .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
            .ok_or_else(|| bad(&format!("missing {key}")))
    };
    fn num<T: FromStr>(s: &str, key: &str) -> Result<T> {
        s.parse().map_err(|_| Error::Data(format!("ensemble cache: bad {key} value {s:?}")))
    }
    let meta = EnsembleMeta {
        scheme: lookup("scheme")?.parse().map_err(|_| bad("bad scheme"))?,
        alpha: num(lookup("alpha")?, "alpha")?,
        n: num(lookup("n")?, "n")?,
        trunc: num(lookup("trunc")?, "trunc")?,
        samples: num(lookup("samples")?, "samples")?,
        seed: num(lookup("seed")?, "seed")?,
        substream: num(lookup("substream")?, "substream")?,
    };
    let dim: usize = num(lookup("dim")?, "dim")?;
    let mut samples: Vec<WeightedSample> = (0..meta.samples)
        .map(|_| WeightedSample { weights: Vec::new(), atoms: Vec::new() })
        .collect();
    let mut reader = csv::Reader::from_reader(input);
    for rec in reader.records() {
        let rec = rec?;
        if rec.len() != dim + 3 {
            return Err(bad(&format!("row has {} columns, expected {}", rec.len(), dim + 3)));
        }
        let i: usize = num(&rec[0], "sample")?;
        let s = samples.get_mut(i).ok_or_else(|| bad(&format!("sample index {i} out of range")))?;
        s.weights.push(num(&rec[1], "weight")?);
        let x = (0..dim).map(|k| num(&rec[3 + k], "x")).collect::<Result<Vec<f64>>>()?;
        s.atoms.push(Observation::new(x, num(&rec[2], "y")?));
    }
    let ens = WeightedEnsemble { samples, meta };
    ens.validate()?;
    Ok(ens)
}
