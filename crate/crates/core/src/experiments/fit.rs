//! Fitting a named method on a training set.

use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::baselines::{lasso_oracle, logistic_l1, logistic_unregularized, location_mle, ols, ridge_oracle};
use crate::ambiguity::PhiSpec;
use crate::criterion::CriterionContext;
use crate::ensemble::{build_ensemble, CenteringSpec, DpPrior, Scheme};
use crate::error::{Error, Result};
use crate::loss::{LossKind, LossSpec, Observation};
use crate::optimizer::{sgd_minimize, RunTrace, SgdConfig};
use crate::sampling::RngStream;

/// Everything the robust procedure needs besides `alpha` and `phi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustSettings {
    pub loss: LossSpec,
    pub centering: CenteringSpec,
    pub scheme: Scheme,
    pub mc_samples: usize,
    pub trunc: usize,
    pub passes: usize,
    pub step_a: f64,
    pub step_b: f64,
}

impl RobustSettings {
    pub fn validate(&self) -> Result<()> {
        if self.mc_samples == 0 || self.trunc == 0 || self.passes == 0 {
            return Err(Error::Config("mc-samples, trunc and passes must be positive".into()));
        }
        if !(self.step_a > 0.0) || !(self.step_b > 0.0) {
            return Err(Error::Config("step-a and step-b must be positive".into()));
        }
        if !(self.loss.scale > 0.0) {
            return Err(Error::Config("loss scale must be positive".into()));
        }
        Ok(())
    }
}

/// Build the ensemble for `data` and run per-sample SGD from `theta = 0`.
pub fn fit_robust(data: &[Observation], alpha: f64, phi: PhiSpec, settings: &RobustSettings, stream: RngStream) -> Result<RunTrace> {
    settings.validate()?;
    let first = data.first().ok_or_else(|| Error::input("cannot fit on an empty training set"))?;
    let prior = DpPrior::new(alpha, settings.centering.clone())?;
    let ens = build_ensemble(settings.scheme, &prior, data, settings.mc_samples, settings.trunc, stream.child(0))?;
    let ctx = CriterionContext::new(ens, settings.loss, phi)?;
    let seed = stream.child(1).rng().next_u64();
    let cfg = SgdConfig::new(settings.step_a, settings.step_b, settings.passes, vec![0.0; settings.loss.theta_dim(first)], seed);
    sgd_minimize(&ctx, &cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum Method {
    /// DP-based criterion; `beta = inf` is the ambiguity-neutral variant.
    Robust { alpha: f64, beta: PhiSpec },
    /// OLS, unpenalized logistic regression, or the sample mean.
    Unregularized,
    L1 { lambda: f64 },
    Ridge { lambda: f64 },
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Robust { alpha, beta } if beta.is_identity() => write!(f, "neutral(alpha={alpha})"),
            Method::Robust { alpha, beta } => write!(f, "robust(alpha={alpha},beta={beta})"),
            Method::Unregularized => write!(f, "unregularized"),
            Method::L1 { lambda } => write!(f, "l1(lambda={lambda})"),
            Method::Ridge { lambda } => write!(f, "ridge(lambda={lambda})"),
        }
    }
}

/// Fitted parameter vector for `method`.
pub fn fit_method(method: &Method, data: &[Observation], settings: &RobustSettings, stream: RngStream) -> Result<Vec<f64>> {
    let kind = settings.loss.kind;
    match (*method, kind) {
        (Method::Robust { alpha, beta }, _) => Ok(fit_robust(data, alpha, beta, settings, stream)?.final_theta),
        (Method::Unregularized, LossKind::SquaredRegression) => ols(data),
        (Method::Unregularized, LossKind::Logistic) => logistic_unregularized(data),
        (Method::Unregularized, LossKind::GaussianLocation) => location_mle(data),
        (Method::L1 { lambda }, LossKind::SquaredRegression) => lasso_oracle(data, lambda),
        (Method::L1 { lambda }, LossKind::Logistic) => logistic_l1(data, lambda),
        (Method::Ridge { lambda }, LossKind::SquaredRegression) => ridge_oracle(data, lambda),
        (m, k) => Err(Error::Config(format!("method {m} is not available for {} loss", k.name()))),
    }
}
