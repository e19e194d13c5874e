//! Loss families `h(theta, xi)` with analytic gradients.
//!
//! All three families have gradients of the form `s * x` (or `s` for the
//! location model), so the hot paths work with that scalar and never allocate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One data point `xi = (x, y)`. The location model leaves `x` empty and
/// stores the scalar observation in `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub x: Vec<f64>,
    pub y: f64,
}

impl Observation {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        Self { x, y }
    }

    pub fn scalar(y: f64) -> Self {
        Self { x: Vec::new(), y }
    }

    pub fn is_finite(&self) -> bool {
        self.y.is_finite() && self.x.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// `(y - theta'x)^2`
    SquaredRegression,
    /// `log(1 + exp(-y theta'x))`, `y` in {+1, -1}
    Logistic,
    /// `(xi - theta)^2` for scalar `xi`
    GaussianLocation,
}

impl LossKind {
    pub fn name(&self) -> &'static str {
        match self {
            LossKind::SquaredRegression => "squared",
            LossKind::Logistic => "logistic",
            LossKind::GaussianLocation => "gaussian-location",
        }
    }
}

/// A loss family together with its multiplicative scale `c`.
///
/// `bound_k` is a diagnostic upper bound on `c * h`; it is never enforced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    pub scale: f64,
    pub bound_k: Option<f64>,
}

impl LossSpec {
    pub fn new(kind: LossKind, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::param(format!("loss scale must be positive, got {scale}")));
        }
        Ok(Self { kind, scale, bound_k: None })
    }

    pub fn squared(scale: f64) -> Self {
        Self { kind: LossKind::SquaredRegression, scale, bound_k: None }
    }

    pub fn logistic(scale: f64) -> Self {
        Self { kind: LossKind::Logistic, scale, bound_k: None }
    }

    pub fn gaussian_location(scale: f64) -> Self {
        Self { kind: LossKind::GaussianLocation, scale, bound_k: None }
    }

    pub fn with_bound(mut self, k: f64) -> Self {
        self.bound_k = Some(k);
        self
    }

    /// Parameter dimension implied by an observation.
    pub fn theta_dim(&self, obs: &Observation) -> usize {
        match self.kind {
            LossKind::GaussianLocation => 1,
            _ => obs.x.len(),
        }
    }

    /// Check that `theta` and `obs` are compatible and finite.
    pub fn check(&self, theta: &[f64], obs: &Observation) -> Result<()> {
        let expected = self.theta_dim(obs);
        if theta.len() != expected {
            return Err(Error::Shape { expected, got: theta.len() });
        }
        if !obs.is_finite() || theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::input("non-finite value in theta or observation"));
        }
        if self.kind == LossKind::Logistic && obs.y != 1.0 && obs.y != -1.0 {
            return Err(Error::input(format!("logistic response must be +1 or -1, got {}", obs.y)));
        }
        Ok(())
    }

    /// `c * h(theta, obs)`.
    pub fn eval(&self, theta: &[f64], obs: &Observation) -> Result<f64> {
        self.check(theta, obs)?;
        Ok(self.eval_unchecked(theta, obs))
    }

    /// Gradient of [`LossSpec::eval`] with respect to `theta`.
    pub fn grad(&self, theta: &[f64], obs: &Observation) -> Result<Vec<f64>> {
        self.check(theta, obs)?;
        let mut out = vec![0.0; theta.len()];
        self.add_grad_unchecked(theta, obs, 1.0, &mut out);
        Ok(out)
    }

    pub(crate) fn eval_unchecked(&self, theta: &[f64], obs: &Observation) -> f64 {
        self.eval_and_slope(theta, obs).0
    }

    /// Adds `factor * grad h(theta, obs)` into `out`.
    pub(crate) fn add_grad_unchecked(&self, theta: &[f64], obs: &Observation, factor: f64, out: &mut [f64]) {
        let (_, slope) = self.eval_and_slope(theta, obs);
        self.add_scaled_direction(obs, factor * slope, out);
    }

    pub(crate) fn add_scaled_direction(&self, obs: &Observation, coef: f64, out: &mut [f64]) {
        match self.kind {
            LossKind::GaussianLocation => out[0] += coef,
            _ => out.iter_mut().zip(&obs.x).for_each(|(o, x)| *o += coef * x),
        }
    }

    /// Returns `(c h, s)` where the gradient is `s * x` (or `s` for location).
    pub(crate) fn eval_and_slope(&self, theta: &[f64], obs: &Observation) -> (f64, f64) {
        let c = self.scale;
        match self.kind {
            LossKind::SquaredRegression => {
                let r = obs.y - dot(theta, &obs.x);
                (c * (r * r), -2.0 * c * r)
            }
            LossKind::GaussianLocation => {
                let r = obs.y - theta[0];
                (c * (r * r), -2.0 * c * r)
            }
            LossKind::Logistic => {
                let z = obs.y * dot(theta, &obs.x);
                let h = (-z).max(0.0) + (-z.abs()).exp().ln_1p();
                (c * h, -c * obs.y * sigmoid(-z))
            }
        }
    }
}

/// Free-function form of [`LossSpec::eval`].
pub fn loss_eval(spec: &LossSpec, theta: &[f64], obs: &Observation) -> Result<f64> {
    spec.eval(theta, obs)
}

/// Free-function form of [`LossSpec::grad`].
pub fn loss_grad(spec: &LossSpec, theta: &[f64], obs: &Observation) -> Result<Vec<f64>> {
    spec.grad(theta, obs)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Logistic function, evaluated without overflow.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
