//! First-order minimization of the robust criterion.
//!
//! The default engine is per-sample SGD: each pass visits every ensemble
//! sample once in a fresh random order and steps along that sample's
//! direction `phi'(H_i) grad H_i`. Step sizes follow `eta_t = a / (b + sqrt t)`
//! with a single counter `t` that starts at 0 and advances on every update.

use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::criterion::{CriterionContext, Objective};
use crate::error::{Error, Result};
use crate::loss::dot;
use crate::sampling::derive_stream;

/// Updates are aborted once `|theta|` exceeds this.
pub const DIVERGENCE_NORM: f64 = 1e6;

/// Substream reserved for the per-pass visiting order.
const ORDER_SUBSTREAM: u64 = 0x5344_5f4f_5244;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub a: f64,
    pub b: f64,
}

impl StepSchedule {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) || !(b > 0.0 && b.is_finite()) {
            return Err(Error::param(format!("step schedule needs a, b > 0, got a = {a}, b = {b}")));
        }
        Ok(Self { a, b })
    }

    /// `a / (b + sqrt t)`.
    pub fn eta(&self, t: u64) -> f64 {
        self.a / (self.b + (t as f64).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub step_a: f64,
    pub step_b: f64,
    pub passes: usize,
    pub theta0: Vec<f64>,
    pub seed: u64,
    pub record_trace: bool,
}

impl SgdConfig {
    pub fn new(step_a: f64, step_b: f64, passes: usize, theta0: Vec<f64>, seed: u64) -> Self {
        Self { step_a, step_b, passes, theta0, seed, record_trace: false }
    }

    pub fn with_trace(mut self) -> Self {
        self.record_trace = true;
        self
    }

    pub fn schedule(&self) -> Result<StepSchedule> {
        StepSchedule::new(self.step_a, self.step_b)
    }

    fn validate(&self, dim: usize) -> Result<StepSchedule> {
        if self.passes == 0 {
            return Err(Error::param("passes must be at least 1"));
        }
        if self.theta0.len() != dim {
            return Err(Error::Shape { expected: dim, got: self.theta0.len() });
        }
        if self.theta0.iter().any(|t| !t.is_finite()) {
            return Err(Error::input("non-finite theta0"));
        }
        self.schedule()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    /// `theta^0, ..., theta^T` when recording was requested.
    pub iterates: Option<Vec<Vec<f64>>>,
    /// Criterion at `theta0` and after each pass (`passes + 1` entries).
    pub criterion_values: Vec<f64>,
    /// Norm of theta at the same points as `criterion_values`.
    pub theta_norms: Vec<f64>,
    pub final_theta: Vec<f64>,
    /// `sum_t nu_t theta^t` over `t = 0..T-1`, `nu_t = eta_t / sum eta`.
    pub averaged_theta: Vec<f64>,
    pub updates: u64,
}

impl RunTrace {
    /// Recompute the averaged iterate from the recorded iterates.
    pub fn averaged_iterate(&self, schedule: &StepSchedule) -> Result<Vec<f64>> {
        let its = self
            .iterates
            .as_ref()
            .ok_or_else(|| Error::input("trace has no recorded iterates"))?;
        let used = (self.updates as usize).max(1).min(its.len());
        let etas: Vec<f64> = (0..used as u64).map(|t| schedule.eta(t)).collect();
        averaged_iterate(&its[..used], &etas)
    }

    /// CSV with columns `pass,criterion,theta_norm`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "pass,criterion,theta_norm")?;
        for (p, (v, n)) in self.criterion_values.iter().zip(&self.theta_norms).enumerate() {
            writeln!(out, "{p},{v},{n}")?;
        }
        Ok(())
    }
}

/// `sum_k w_k theta_k / sum_k w_k`.
pub fn averaged_iterate(iterates: &[Vec<f64>], etas: &[f64]) -> Result<Vec<f64>> {
    if iterates.is_empty() {
        return Err(Error::input("no iterates to average"));
    }
    if iterates.len() != etas.len() {
        return Err(Error::Shape { expected: iterates.len(), got: etas.len() });
    }
    let total: f64 = etas.iter().sum();
    if !(total > 0.0) {
        return Err(Error::param("step weights must have positive sum"));
    }
    let dim = iterates[0].len();
    let mut out = vec![0.0; dim];
    for (theta, eta) in iterates.iter().zip(etas) {
        if theta.len() != dim {
            return Err(Error::Shape { expected: dim, got: theta.len() });
        }
        out.iter_mut().zip(theta).for_each(|(o, v)| *o += eta * v);
    }
    out.iter_mut().for_each(|o| *o /= total);
    Ok(out)
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Running state shared by the SGD and full-gradient loops.
struct Runner {
    schedule: StepSchedule,
    theta: Vec<f64>,
    t: u64,
    avg_sum: Vec<f64>,
    eta_sum: f64,
    iterates: Option<Vec<Vec<f64>>>,
    values: Vec<f64>,
    norms: Vec<f64>,
}

impl Runner {
    fn new(config: &SgdConfig, schedule: StepSchedule) -> Self {
        let theta = config.theta0.clone();
        Self {
            schedule,
            avg_sum: vec![0.0; theta.len()],
            eta_sum: 0.0,
            iterates: config.record_trace.then(|| vec![theta.clone()]),
            values: Vec::with_capacity(config.passes + 1),
            norms: Vec::with_capacity(config.passes + 1),
            theta,
            t: 0,
        }
    }

    fn checkpoint<O: Objective + ?Sized>(&mut self, obj: &O) -> Result<()> {
        let v = obj.value(&self.theta).map_err(|e| self.abort(e))?;
        self.values.push(v);
        self.norms.push(norm(&self.theta));
        Ok(())
    }

    fn abort(&self, e: Error) -> Error {
        let msg = format!(
            "{} (update t = {}, |theta| = {:.6e}, criterion trace = {:?})",
            match &e {
                Error::Numeric(m) => m.clone(),
                other => other.to_string(),
            },
            self.t,
            norm(&self.theta),
            self.values
        );
        match e {
            Error::Numeric(_) => Error::Numeric(msg),
            other => other,
        }
    }

    fn step(&mut self, direction: &[f64]) -> Result<()> {
        let eta = self.schedule.eta(self.t);
        self.avg_sum.iter_mut().zip(&self.theta).for_each(|(a, th)| *a += eta * th);
        self.eta_sum += eta;
        self.theta.iter_mut().zip(direction).for_each(|(th, g)| *th -= eta * g);
        self.t += 1;
        let n = norm(&self.theta);
        if !n.is_finite() {
            return Err(self.abort(Error::numeric("non-finite iterate")));
        }
        if n > DIVERGENCE_NORM {
            return Err(self.abort(Error::numeric(format!("iterate norm exceeded {DIVERGENCE_NORM:e}"))));
        }
        if let Some(its) = self.iterates.as_mut() {
            its.push(self.theta.clone());
        }
        Ok(())
    }

    fn finish(self) -> RunTrace {
        let averaged_theta = if self.eta_sum > 0.0 {
            self.avg_sum.iter().map(|a| a / self.eta_sum).collect()
        } else {
            self.theta.clone()
        };
        RunTrace {
            iterates: self.iterates,
            criterion_values: self.values,
            theta_norms: self.norms,
            final_theta: self.theta,
            averaged_theta,
            updates: self.t,
        }
    }
}

/// Per-sample SGD over the ensemble: `passes` passes, each a fresh uniform
/// permutation of the `N` samples.
pub fn sgd_minimize(ctx: &CriterionContext, config: &SgdConfig) -> Result<RunTrace> {
    let schedule = config.validate(ctx.dim())?;
    let n = ctx.num_samples();
    let mut rng = derive_stream(config.seed, ORDER_SUBSTREAM).rng();
    let mut run = Runner::new(config, schedule);
    let mut order: Vec<usize> = (0..n).collect();
    let mut dir = vec![0.0; run.theta.len()];
    run.checkpoint(ctx)?;
    for _ in 0..config.passes {
        order.shuffle(&mut rng);
        for &i in &order {
            ctx.sample_step_into(i, &run.theta, &mut dir).map_err(|e| run.abort(e))?;
            run.step(&dir)?;
        }
        run.checkpoint(ctx)?;
    }
    Ok(run.finish())
}

/// Deterministic descent on any objective: `steps_per_pass` full-gradient
/// steps per pass, sharing the update counter of [`sgd_minimize`].
pub fn gradient_descent<O: Objective + ?Sized>(obj: &O, config: &SgdConfig, steps_per_pass: usize) -> Result<RunTrace> {
    let schedule = config.validate(obj.dim())?;
    if steps_per_pass == 0 {
        return Err(Error::param("steps_per_pass must be at least 1"));
    }
    let mut run = Runner::new(config, schedule);
    run.checkpoint(obj)?;
    for _ in 0..config.passes {
        for _ in 0..steps_per_pass {
            let g = obj.gradient(&run.theta).map_err(|e| run.abort(e))?;
            run.step(&g)?;
        }
        run.checkpoint(obj)?;
    }
    Ok(run.finish())
}

/// Full-gradient counterpart of [`sgd_minimize`] with `N` steps per pass.
pub fn full_gradient_descent(ctx: &CriterionContext, config: &SgdConfig) -> Result<RunTrace> {
    gradient_descent(ctx, config, ctx.num_samples())
}

/// Direction of one mini-batch update over flattened `(i, j)` terms:
/// `(1/B) sum_m l_m phi'(H_i) grad h(theta, xi_ij)`.
pub fn minibatch_direction(ctx: &CriterionContext, theta: &[f64], batch: &[(usize, usize)]) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::input("empty mini-batch"));
    }
    let mut out = vec![0.0; theta.len()];
    for &(i, j) in batch {
        let g = ctx.term_direction(i, j, theta)?;
        out.iter_mut().zip(g).for_each(|(o, v)| *o += v);
    }
    let inv_b = 1.0 / batch.len() as f64;
    out.iter_mut().for_each(|o| *o *= inv_b);
    Ok(out)
}

/// `theta - eta * minibatch_direction(...)`.
pub fn minibatch_sgd_step(ctx: &CriterionContext, theta: &[f64], batch: &[(usize, usize)], eta: f64) -> Result<Vec<f64>> {
    let d = minibatch_direction(ctx, theta, batch)?;
    Ok(theta.iter().zip(d).map(|(t, g)| t - eta * g).collect())
}

/// All flattened term indices `(i, j)` in sample-major order.
pub fn all_terms(ctx: &CriterionContext) -> Vec<(usize, usize)> {
    ctx.ensemble
        .samples
        .iter()
        .enumerate()
        .flat_map(|(i, s)| (0..s.atoms.len()).map(move |j| (i, j)))
        .collect()
}
