//! Smooth ambiguity transforms.
//!
//! The exponential family `phi_beta(t) = beta * (exp(t / beta) - 1)` and its
//! `beta = inf` limit, the identity. The identity is a separate variant so the
//! ambiguity-neutral case is exact rather than a large-`beta` approximation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `t / beta` passed to `exp`; beyond this the transform is reported
/// as a numeric failure instead of saturating.
pub const EXP_ARG_CAP: f64 = 700.0;

/// A continuous, convex, strictly increasing transform with `phi(0) = 0`.
pub trait AmbiguityTransform {
    fn phi(&self, t: f64) -> Result<f64>;
    fn phi_prime(&self, t: f64) -> Result<f64>;
    fn phi_second(&self, t: f64) -> Result<f64>;

    /// Arrow-Pratt coefficient `phi'' / phi'`.
    fn arrow_pratt(&self, t: f64) -> Result<f64> {
        Ok(self.phi_second(t)? / self.phi_prime(t)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum PhiSpec {
    /// `phi(t) = t` (ambiguity neutrality)
    Identity,
    /// `phi(t) = beta (exp(t / beta) - 1)`, `beta > 0`
    Exponential { beta: f64 },
}

impl PhiSpec {
    /// `beta = inf` maps to [`PhiSpec::Identity`].
    pub fn from_beta(beta: f64) -> Result<Self> {
        if beta == f64::INFINITY {
            Ok(PhiSpec::Identity)
        } else if beta > 0.0 && beta.is_finite() {
            Ok(PhiSpec::Exponential { beta })
        } else {
            Err(Error::param(format!("beta must be positive or inf, got {beta}")))
        }
    }

    pub fn beta(&self) -> f64 {
        match *self {
            PhiSpec::Identity => f64::INFINITY,
            PhiSpec::Exponential { beta } => beta,
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, PhiSpec::Identity)
    }

    fn check_domain(t: f64) -> Result<()> {
        if t < 0.0 || t.is_nan() {
            Err(Error::Domain(format!("ambiguity transform requires t >= 0, got {t}")))
        } else {
            Ok(())
        }
    }

    fn scaled_arg(t: f64, beta: f64) -> Result<f64> {
        let u = t / beta;
        if u > EXP_ARG_CAP {
            Err(Error::numeric(format!(
                "t / beta = {u:.3e} exceeds the exponent cap {EXP_ARG_CAP} (t = {t:.3e}, beta = {beta:.3e})"
            )))
        } else {
            Ok(u)
        }
    }

    /// Supremum of `phi'` over `[0, k_bound]`.
    pub fn m_phi(&self, k_bound: f64) -> f64 {
        match *self {
            PhiSpec::Identity => 1.0,
            PhiSpec::Exponential { beta } => (k_bound / beta).exp(),
        }
    }
}

impl AmbiguityTransform for PhiSpec {
    fn phi(&self, t: f64) -> Result<f64> {
        Self::check_domain(t)?;
        match *self {
            PhiSpec::Identity => Ok(t),
            PhiSpec::Exponential { beta } => Ok(beta * Self::scaled_arg(t, beta)?.exp_m1()),
        }
    }

    fn phi_prime(&self, t: f64) -> Result<f64> {
        Self::check_domain(t)?;
        match *self {
            PhiSpec::Identity => Ok(1.0),
            PhiSpec::Exponential { beta } => Ok(Self::scaled_arg(t, beta)?.exp()),
        }
    }

    fn phi_second(&self, t: f64) -> Result<f64> {
        Self::check_domain(t)?;
        match *self {
            PhiSpec::Identity => Ok(0.0),
            PhiSpec::Exponential { beta } => Ok(Self::scaled_arg(t, beta)?.exp() / beta),
        }
    }

    fn arrow_pratt(&self, t: f64) -> Result<f64> {
        Self::check_domain(t)?;
        Ok(match *self {
            PhiSpec::Identity => 0.0,
            PhiSpec::Exponential { beta } => 1.0 / beta,
        })
    }
}

impl fmt::Display for PhiSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhiSpec::Identity => write!(f, "inf"),
            PhiSpec::Exponential { beta } => write!(f, "{beta}"),
        }
    }
}

impl FromStr for PhiSpec {
    type Err = Error;

    /// Accepts a positive number or the literal `inf`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") {
            return Ok(PhiSpec::Identity);
        }
        let beta: f64 = s
            .parse()
            .map_err(|_| Error::Config(format!("beta must be a positive number or \"inf\", got {s:?}")))?;
        PhiSpec::from_beta(beta).map_err(|_| Error::Config(format!("beta must be positive or \"inf\", got {s}")))
    }
}

impl From<PhiSpec> for String {
    fn from(p: PhiSpec) -> String {
        p.to_string()
    }
}

impl TryFrom<String> for PhiSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

pub fn phi(spec: &PhiSpec, t: f64) -> Result<f64> {
    spec.phi(t)
}

pub fn phi_prime(spec: &PhiSpec, t: f64) -> Result<f64> {
    spec.phi_prime(t)
}

pub fn phi_second(spec: &PhiSpec, t: f64) -> Result<f64> {
    spec.phi_second(t)
}

pub fn arrow_pratt(spec: &PhiSpec, t: f64) -> Result<f64> {
    spec.arrow_pratt(t)
}

pub fn m_phi(spec: &PhiSpec, k_bound: f64) -> f64 {
    spec.m_phi(k_bound)
}
