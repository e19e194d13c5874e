//! Simulated data-generating processes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{dot, sigmoid, Observation};
use crate::sampling::{sample_mvn_compound_symmetry, sample_standard_normal, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DgpKind {
    SparseLinreg,
    GaussianOutliers,
    SparseLogit,
}

/// Parameters of a simulated design. Fields unused by a kind are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub kind: DgpKind,
    pub n: usize,
    pub d: usize,
    pub s: usize,
    pub rho: f64,
    pub sigma: f64,
    pub n_clean: usize,
    pub n_out: usize,
    pub outlier_mean: f64,
    pub outlier_sd: f64,
}

impl DgpSpec {
    /// `d = 90`, `s = 5`, `sigma = 0.5`, `rho = 0.3`.
    pub fn sparse_linreg(n: usize) -> Self {
        Self { kind: DgpKind::SparseLinreg, n, d: 90, s: 5, rho: 0.3, sigma: 0.5, n_clean: 0, n_out: 0, outlier_mean: 0.0, outlier_sd: 0.0 }
    }

    /// 10 clean `N(0, 1)` draws followed by 3 outliers from `N(5, 1)`.
    pub fn gaussian_outliers() -> Self {
        Self { kind: DgpKind::GaussianOutliers, n: 13, d: 1, s: 0, rho: 0.0, sigma: 1.0, n_clean: 10, n_out: 3, outlier_mean: 5.0, outlier_sd: 1.0 }
    }

    pub fn sparse_logit(n: usize) -> Self {
        Self { kind: DgpKind::SparseLogit, ..Self::sparse_linreg(n) }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            DgpKind::SparseLinreg | DgpKind::SparseLogit => {
                if self.d == 0 || self.s > self.d {
                    return Err(Error::param(format!("need 1 <= d and s <= d, got d = {}, s = {}", self.d, self.s)));
                }
                if !(0.0..1.0).contains(&self.rho) {
                    return Err(Error::param(format!("rho must lie in [0, 1), got {}", self.rho)));
                }
                if self.kind == DgpKind::SparseLinreg && !(self.sigma >= 0.0 && self.sigma.is_finite()) {
                    return Err(Error::param(format!("sigma must be >= 0, got {}", self.sigma)));
                }
            }
            DgpKind::GaussianOutliers => {
                if self.n_clean + self.n_out == 0 {
                    return Err(Error::param("outlier design needs at least one observation"));
                }
                if !(self.outlier_sd >= 0.0) || !self.outlier_mean.is_finite() {
                    return Err(Error::param("outlier distribution needs a finite mean and sd >= 0"));
                }
            }
        }
        Ok(())
    }

    /// Rows per generated training set.
    pub fn size(&self) -> usize {
        match self.kind {
            DgpKind::GaussianOutliers => self.n_clean + self.n_out,
            _ => self.n,
        }
    }

    /// `a = (1, ..., 1, 0, ..., 0)` with `s` ones; `[0]` for the location design.
    pub fn true_coef(&self) -> Vec<f64> {
        match self.kind {
            DgpKind::GaussianOutliers => vec![0.0],
            _ => (0..self.d).map(|k| if k < self.s { 1.0 } else { 0.0 }).collect(),
        }
    }

    /// Draw a training set of [`DgpSpec::size`] rows.
    pub fn generate(&self, stream: RngStream) -> Result<Vec<Observation>> {
        self.generate_n(self.size(), stream)
    }

    /// Draw `rows` observations; the location design yields clean draws
    /// only when `rows` exceeds its clean-plus-outlier count (test sets).
    pub fn generate_n(&self, rows: usize, stream: RngStream) -> Result<Vec<Observation>> {
        self.validate()?;
        let mut rng = stream.rng();
        let a = self.true_coef();
        match self.kind {
            DgpKind::SparseLinreg => (0..rows)
                .map(|_| {
                    let x = sample_mvn_compound_symmetry(&mut rng, self.d, self.rho)?;
                    let y = dot(&a, &x) + self.sigma * sample_standard_normal(&mut rng);
                    Ok(Observation::new(x, y))
                })
                .collect(),
            DgpKind::SparseLogit => (0..rows)
                .map(|_| {
                    let x = sample_mvn_compound_symmetry(&mut rng, self.d, self.rho)?;
                    let p = sigmoid(dot(&a, &x));
                    let y = if rng.gen::<f64>() < p { 1.0 } else { -1.0 };
                    Ok(Observation::new(x, y))
                })
                .collect(),
            DgpKind::GaussianOutliers => Ok((0..rows)
                .map(|i| {
                    let z = sample_standard_normal(&mut rng);
                    if i >= self.n_clean && i < self.n_clean + self.n_out {
                        Observation::scalar(self.outlier_mean + self.outlier_sd * z)
                    } else {
                        Observation::scalar(z)
                    }
                })
                .collect()),
        }
    }

    /// Held-out draws from the uncontaminated process.
    pub fn generate_test(&self, rows: usize, stream: RngStream) -> Result<Vec<Observation>> {
        match self.kind {
            DgpKind::GaussianOutliers => {
                let clean = DgpSpec { n_clean: rows, n_out: 0, ..self.clone() };
                clean.generate_n(rows, stream)
            }
            _ => self.generate_n(rows, stream),
        }
    }

    /// Pooled mean of the contaminated location design.
    pub fn contaminated_mean(&self) -> f64 {
        let n = (self.n_clean + self.n_out) as f64;
        self.n_out as f64 * self.outlier_mean / n
    }
}

pub fn gen_sparse_linreg(spec: &DgpSpec, stream: RngStream) -> Result<Vec<Observation>> {
    expect_kind(spec, DgpKind::SparseLinreg)?;
    spec.generate(stream)
}

pub fn gen_gaussian_outliers(spec: &DgpSpec, stream: RngStream) -> Result<Vec<Observation>> {
    expect_kind(spec, DgpKind::GaussianOutliers)?;
    spec.generate(stream)
}

pub fn gen_sparse_logit(spec: &DgpSpec, stream: RngStream) -> Result<Vec<Observation>> {
    expect_kind(spec, DgpKind::SparseLogit)?;
    spec.generate(stream)
}

fn expect_kind(spec: &DgpSpec, kind: DgpKind) -> Result<()> {
    if spec.kind != kind {
        return Err(Error::param(format!("expected a {kind:?} design, got {:?}", spec.kind)));
    }
    Ok(())
}
