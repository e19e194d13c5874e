//! The robust criterion and its gradient over a weighted ensemble.
//!
//! For an ensemble of `N` discrete measures the criterion is
//! `V(theta) = (1/N) sum_i phi(H_i(theta))` with inner risks
//! `H_i(theta) = sum_j p_ij h(theta, xi_ij)`, and
//! `grad V = (1/N) sum_i phi'(H_i) grad H_i`. Samples with larger inner risk
//! get larger `phi'` factors, which tilts descent toward the plausible
//! distributions under which `theta` does worst.
//!
//! Per-sample terms may be computed in parallel; they are always reduced in
//! index order, so results are bit-identical for any thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ambiguity::{AmbiguityTransform, PhiSpec};
use crate::ensemble::{CenteringSpec, DpPrior, WeightedEnsemble, WeightedSample};
use crate::error::{Error, Result};
use crate::loss::{dot, LossKind, LossSpec, Observation};
use crate::sampling::RngStream;

/// Default number of `p0` draws used when no analytic prior risk exists.
pub const PRIOR_MC_DRAWS: usize = 10_000;

/// Something that can be minimized with first-order methods.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, theta: &[f64]) -> Result<f64>;
    fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>>;
}

/// Ensemble, loss and ambiguity transform bundled together.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionContext {
    pub ensemble: WeightedEnsemble,
    pub loss: LossSpec,
    pub phi: PhiSpec,
}

impl CriterionContext {
    pub fn new(ensemble: WeightedEnsemble, loss: LossSpec, phi: PhiSpec) -> Result<Self> {
        if ensemble.is_empty() {
            return Err(Error::input("criterion needs a nonempty ensemble"));
        }
        ensemble.validate()?;
        let first = ensemble.samples[0]
            .atoms
            .first()
            .ok_or_else(|| Error::input("ensemble sample without atoms"))?;
        let dim = first.x.len();
        for s in &ensemble.samples {
            for a in &s.atoms {
                if a.x.len() != dim {
                    return Err(Error::Shape { expected: dim, got: a.x.len() });
                }
                if !a.is_finite() {
                    return Err(Error::input("non-finite ensemble atom"));
                }
                if loss.kind == LossKind::Logistic && a.y != 1.0 && a.y != -1.0 {
                    return Err(Error::input(format!("logistic atom with response {}", a.y)));
                }
            }
        }
        Ok(Self { ensemble, loss, phi })
    }

    pub fn num_samples(&self) -> usize {
        self.ensemble.len()
    }

    fn sample(&self, i: usize) -> Result<&WeightedSample> {
        self.ensemble.samples.get(i).ok_or_else(|| {
            Error::input(format!("sample index {i} out of range (N = {})", self.ensemble.len()))
        })
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        let expected = self.dim();
        if theta.len() != expected {
            return Err(Error::Shape { expected, got: theta.len() });
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::input("non-finite theta"));
        }
        Ok(())
    }

    /// `H_i(theta)`, the weighted risk under sample `i`.
    pub fn inner_risk(&self, i: usize, theta: &[f64]) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(self.inner_risk_unchecked(self.sample(i)?, theta))
    }

    fn inner_risk_unchecked(&self, s: &WeightedSample, theta: &[f64]) -> f64 {
        s.weights
            .iter()
            .zip(&s.atoms)
            .map(|(w, a)| w * self.loss.eval_unchecked(theta, a))
            .sum()
    }

    /// All inner risks, in sample order.
    pub fn inner_risks(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        Ok(self
            .ensemble
            .samples
            .par_iter()
            .map(|s| self.inner_risk_unchecked(s, theta))
            .collect())
    }

    /// `(1/N) sum_i phi(H_i(theta))`.
    pub fn robust_value(&self, theta: &[f64]) -> Result<f64> {
        let risks = self.inner_risks(theta)?;
        let mut total = 0.0;
        for h in risks {
            total += self.phi.phi(h)?;
        }
        let v = total / self.num_samples() as f64;
        if !v.is_finite() {
            return Err(Error::numeric(format!("robust criterion is not finite ({v})")));
        }
        Ok(v)
    }

    /// `phi'(H_i) * grad H_i`: the update direction contributed by sample `i`.
    pub fn sample_direction(&self, i: usize, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        let mut out = vec![0.0; theta.len()];
        self.add_sample_direction(self.sample(i)?, theta, 1.0, &mut out)?;
        Ok(out)
    }

    fn add_sample_direction(&self, s: &WeightedSample, theta: &[f64], factor: f64, out: &mut [f64]) -> Result<f64> {
        // One pass computes H_i and the per-atom slopes; the slopes are
        // reused for the gradient once phi'(H_i) is known.
        let mut h = 0.0;
        let slopes: Vec<f64> = s
            .weights
            .iter()
            .zip(&s.atoms)
            .map(|(w, a)| {
                let (l, slope) = self.loss.eval_and_slope(theta, a);
                h += w * l;
                w * slope
            })
            .collect();
        let scale = factor * self.phi.phi_prime(h)?;
        for (slope, a) in slopes.iter().zip(&s.atoms) {
            self.loss.add_scaled_direction(a, scale * slope, out);
        }
        Ok(h)
    }

    /// `(1/N) sum_i phi'(H_i) grad H_i`.
    pub fn robust_grad(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        let per_sample = self
            .ensemble
            .samples
            .par_iter()
            .map(|s| {
                let mut g = vec![0.0; theta.len()];
                self.add_sample_direction(s, theta, 1.0, &mut g).map(|_| g)
            })
            .collect::<Result<Vec<_>>>()?;
        let inv_n = 1.0 / self.num_samples() as f64;
        let mut out = vec![0.0; theta.len()];
        for g in per_sample {
            out.iter_mut().zip(g).for_each(|(o, v)| *o += v);
        }
        out.iter_mut().for_each(|o| *o *= inv_n);
        Ok(out)
    }

    /// Flattened term `m = (i, j)` of the gradient decomposition:
    /// `l_m phi'(H_i) grad h(theta, xi_ij)` with `l_m = K_i p_ij`, `K_i` the
    /// atom count of sample `i`. Averaging over all terms gives the gradient
    /// when every sample has the same atom count (true for all schemes).
    pub fn term_direction(&self, i: usize, j: usize, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        let s = self.sample(i)?;
        let atom = s
            .atoms
            .get(j)
            .ok_or_else(|| Error::input(format!("atom index {j} out of range for sample {i}")))?;
        let h = self.inner_risk_unchecked(s, theta);
        let ell = s.atoms.len() as f64 * s.weights[j];
        let mut out = vec![0.0; theta.len()];
        self.loss.add_grad_unchecked(theta, atom, ell * self.phi.phi_prime(h)?, &mut out);
        Ok(out)
    }

    /// Total number of flattened terms `M`.
    pub fn num_terms(&self) -> usize {
        self.ensemble.samples.iter().map(|s| s.atoms.len()).sum()
    }

    pub(crate) fn sample_step_into(&self, i: usize, theta: &[f64], out: &mut [f64]) -> Result<()> {
        out.iter_mut().for_each(|o| *o = 0.0);
        self.add_sample_direction(&self.ensemble.samples[i], theta, 1.0, out).map(|_| ())
    }
}

impl Objective for CriterionContext {
    fn dim(&self) -> usize {
        let a = &self.ensemble.samples[0].atoms[0];
        self.loss.theta_dim(a)
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        self.robust_value(theta)
    }

    fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.robust_grad(theta)
    }
}

pub fn inner_risk(ctx: &CriterionContext, i: usize, theta: &[f64]) -> Result<f64> {
    ctx.inner_risk(i, theta)
}

pub fn robust_value(ctx: &CriterionContext, theta: &[f64]) -> Result<f64> {
    ctx.robust_value(theta)
}

pub fn robust_grad(ctx: &CriterionContext, theta: &[f64]) -> Result<Vec<f64>> {
    ctx.robust_grad(theta)
}

/// Regularization strength `alpha / n` equivalent to a DP prior.
pub fn ridge_lambda(alpha: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::input("ridge_lambda needs n >= 1"));
    }
    Ok(alpha / n as f64)
}

/// How `E_{p0}[h(theta, .)]` is obtained.
#[derive(Debug, Clone)]
enum PriorRisk {
    StandardNormalSquared,
    CompoundSymmetrySquared { rho: f64 },
    LassoSquared,
    Location { mean: f64, sd: f64 },
    /// Exact average over a fixed set of points (point masses, the empirical
    /// measure, or a frozen Monte Carlo sample from `p0`).
    Atoms(Vec<Observation>),
}

/// The ambiguity-neutral criterion
/// `n/(alpha+n) R_emp(theta) + alpha/(alpha+n) E_{p0}[h(theta, .)]`.
#[derive(Debug, Clone)]
pub struct NeutralObjective {
    data: Vec<Observation>,
    alpha: f64,
    loss: LossSpec,
    prior_risk: PriorRisk,
    dim: usize,
}

impl NeutralObjective {
    /// Analytic rules are used when available (standard-normal or
    /// compound-symmetry centering with squared loss, the LASSO-variance
    /// centering, Gaussian location). Otherwise `mc` supplies the number of
    /// `p0` draws and their stream; without it this is a configuration error.
    pub fn new(data: &[Observation], prior: &DpPrior, loss: LossSpec, mc: Option<(usize, RngStream)>) -> Result<Self> {
        use CenteringSpec as C;
        use LossKind as K;
        let prior_risk = match (&prior.centering, loss.kind) {
            (C::StandardNormalProduct { .. }, K::SquaredRegression) => PriorRisk::StandardNormalSquared,
            (C::CompoundSymmetryNormal { rho, .. }, K::SquaredRegression) => {
                PriorRisk::CompoundSymmetrySquared { rho: *rho }
            }
            (C::LassoVariance { .. }, K::SquaredRegression) => PriorRisk::LassoSquared,
            (C::GaussianLocation { mean, sd }, K::GaussianLocation) => PriorRisk::Location { mean: *mean, sd: *sd },
            (C::PointMasses { atoms }, _) => PriorRisk::Atoms(atoms.clone()),
            (C::Empirical, _) => PriorRisk::Atoms(data.to_vec()),
            (centering, _) => {
                let (draws, stream) = mc.ok_or_else(|| {
                    Error::Config(format!(
                        "no analytic prior risk for {:?} with {} loss and no Monte Carlo budget",
                        centering,
                        loss.kind.name()
                    ))
                })?;
                if draws == 0 {
                    return Err(Error::Config("Monte Carlo budget must be positive".into()));
                }
                let mut rng = stream.rng();
                let atoms = (0..draws)
                    .map(|_| centering.sample(&mut rng, data))
                    .collect::<Result<Vec<_>>>()?;
                PriorRisk::Atoms(atoms)
            }
        };
        let dim = match (&prior.centering, loss.kind) {
            (_, K::GaussianLocation) => 1,
            (C::StandardNormalProduct { dim }, _)
            | (C::CompoundSymmetryNormal { dim, .. }, _)
            | (C::BinaryLabelNormal { dim }, _)
            | (C::LassoVariance { dim }, _) => *dim,
            _ => data
                .first()
                .map(|o| o.x.len())
                .ok_or_else(|| Error::input("cannot infer dimension without data"))?,
        };
        if let Some(o) = data.iter().find(|o| loss.theta_dim(o) != dim) {
            return Err(Error::Shape { expected: dim, got: loss.theta_dim(o) });
        }
        if data.is_empty() && prior.alpha == 0.0 {
            return Err(Error::input("neutral criterion undefined with no data and alpha = 0"));
        }
        Ok(Self { data: data.to_vec(), alpha: prior.alpha, loss, prior_risk, dim })
    }

    fn weights(&self) -> (f64, f64) {
        let n = self.data.len() as f64;
        (n / (self.alpha + n), self.alpha / (self.alpha + n))
    }

    pub fn empirical_risk(&self, theta: &[f64]) -> Result<f64> {
        empirical_risk(&self.loss, &self.data, theta)
    }

    /// `E_{p0}[c h(theta, .)]`.
    pub fn prior_risk(&self, theta: &[f64]) -> Result<f64> {
        let c = self.loss.scale;
        Ok(match &self.prior_risk {
            PriorRisk::StandardNormalSquared => c * (1.0 + dot(theta, theta)),
            PriorRisk::CompoundSymmetrySquared { rho } => {
                let s: f64 = theta.iter().sum();
                c * (1.0 + (1.0 - rho) * dot(theta, theta) + rho * s * s)
            }
            PriorRisk::LassoSquared => c * (1.0 + theta.iter().map(|t| t.abs()).sum::<f64>()),
            PriorRisk::Location { mean, sd } => c * (sd * sd + (mean - theta[0]).powi(2)),
            PriorRisk::Atoms(atoms) => empirical_risk(&self.loss, atoms, theta)?,
        })
    }

    fn prior_grad(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let c = self.loss.scale;
        Ok(match &self.prior_risk {
            PriorRisk::StandardNormalSquared => theta.iter().map(|t| 2.0 * c * t).collect(),
            PriorRisk::CompoundSymmetrySquared { rho } => {
                let s: f64 = theta.iter().sum();
                theta.iter().map(|t| 2.0 * c * ((1.0 - rho) * t + rho * s)).collect()
            }
            // subgradient, 0 at the kink
            PriorRisk::LassoSquared => theta.iter().map(|t| c * t.signum() * (t.abs() > 0.0) as u8 as f64).collect(),
            PriorRisk::Location { mean, .. } => vec![-2.0 * c * (mean - theta[0])],
            PriorRisk::Atoms(atoms) => empirical_grad(&self.loss, atoms, theta)?,
        })
    }
}

impl Objective for NeutralObjective {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        if theta.len() != self.dim {
            return Err(Error::Shape { expected: self.dim, got: theta.len() });
        }
        let (wd, wp) = self.weights();
        let emp = if self.data.is_empty() { 0.0 } else { self.empirical_risk(theta)? };
        let pri = if wp > 0.0 { self.prior_risk(theta)? } else { 0.0 };
        Ok(wd * emp + wp * pri)
    }

    fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.dim {
            return Err(Error::Shape { expected: self.dim, got: theta.len() });
        }
        let (wd, wp) = self.weights();
        let mut g = if self.data.is_empty() { vec![0.0; self.dim] } else { empirical_grad(&self.loss, &self.data, theta)? };
        g.iter_mut().for_each(|v| *v *= wd);
        if wp > 0.0 {
            for (o, p) in g.iter_mut().zip(self.prior_grad(theta)?) {
                *o += wp * p;
            }
        }
        Ok(g)
    }
}

/// Ambiguity-neutral criterion value. `mc` is only consulted when the
/// centering has no analytic prior-risk rule.
pub fn neutral_value(
    data: &[Observation],
    prior: &DpPrior,
    loss: &LossSpec,
    theta: &[f64],
    mc: Option<(usize, RngStream)>,
) -> Result<f64> {
    NeutralObjective::new(data, prior, *loss, mc)?.value(theta)
}

/// Mean of `c h(theta, obs)` over `data`.
pub fn empirical_risk(loss: &LossSpec, data: &[Observation], theta: &[f64]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::input("empirical risk of an empty dataset"));
    }
    let mut total = 0.0;
    for o in data {
        total += loss.eval(theta, o)?;
    }
    Ok(total / data.len() as f64)
}

/// Gradient of [`empirical_risk`].
pub fn empirical_grad(loss: &LossSpec, data: &[Observation], theta: &[f64]) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::input("empirical gradient of an empty dataset"));
    }
    let mut g = vec![0.0; theta.len()];
    let w = 1.0 / data.len() as f64;
    for o in data {
        loss.check(theta, o)?;
        loss.add_grad_unchecked(theta, o, w, &mut g);
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{mdmc_ensemble, sbmc_ensemble, EnsembleMeta, Scheme};
    use crate::sampling::derive_stream;

    fn ensemble_from(samples: Vec<WeightedSample>) -> WeightedEnsemble {
        let n = samples.len();
        WeightedEnsemble {
            samples,
            meta: EnsembleMeta { scheme: Scheme::Mdmc, alpha: 0.0, n: 0, trunc: 1, samples: n, seed: 0, substream: 0 },
        }
    }

    /// Location samples whose inner risk at theta = 0 (scale 1) is exactly `h`.
    fn location_ctx(hs: &[f64], beta: f64) -> CriterionContext {
        let samples = hs
            .iter()
            .map(|h| WeightedSample { weights: vec![1.0], atoms: vec![Observation::scalar(h.sqrt())] })
            .collect();
        CriterionContext::new(ensemble_from(samples), LossSpec::gaussian_location(1.0), PhiSpec::from_beta(beta).unwrap())
            .unwrap()
    }

    #[test]
    fn inner_risk_cases() {
        let zero = WeightedSample { weights: vec![1.0], atoms: vec![Observation::new(vec![2.0, 3.0], 2.0)] };
        let ctx = CriterionContext::new(ensemble_from(vec![zero]), LossSpec::squared(1.0), PhiSpec::Identity).unwrap();
        assert_eq!(ctx.inner_risk(0, &[1.0, 0.0]).unwrap(), 0.0);
        assert!(ctx.inner_risk(1, &[1.0, 0.0]).is_err());

        let two = WeightedSample {
            weights: vec![0.5, 0.5],
            atoms: vec![Observation::scalar(2f64.sqrt()), Observation::scalar(2.0)],
        };
        let ctx = CriterionContext::new(ensemble_from(vec![two]), LossSpec::gaussian_location(1.0), PhiSpec::Identity)
            .unwrap();
        assert!((ctx.inner_risk(0, &[0.0]).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn robust_value_hand_computed() {
        let ctx = location_ctx(&[0.0, 1.0, 2.0], 1.0);
        let e = std::f64::consts::E;
        let expected = ((e - 1.0) + (e * e - 1.0)) / 3.0;
        assert!((ctx.robust_value(&[0.0]).unwrap() - expected).abs() < 1e-14);
        assert!((expected - 2.702_445_975_8).abs() < 1e-9);
    }

    #[test]
    fn identity_and_constant_cases() {
        let ctx = location_ctx(&[0.5, 1.0, 4.0], f64::INFINITY);
        assert_eq!(ctx.robust_value(&[0.0]).unwrap(), (0.5 + 1.0 + 4.0) / 3.0);
        let ctx = location_ctx(&[1.5, 1.5, 1.5], 2.0);
        let expected = PhiSpec::from_beta(2.0).unwrap().phi(1.5).unwrap();
        assert!((ctx.robust_value(&[0.0]).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn cap_hit_is_an_error() {
        let ctx = location_ctx(&[1e6], 1.0);
        assert!(matches!(ctx.robust_value(&[0.0]), Err(Error::Numeric(_))));
        assert!(matches!(ctx.robust_grad(&[0.0]), Err(Error::Numeric(_))));
    }

    #[test]
    fn worse_samples_get_larger_weight() {
        let ctx = location_ctx(&[0.2, 3.0], 1.0);
        let theta = [0.0];
        let ha = ctx.inner_risk(1, &theta).unwrap();
        let hb = ctx.inner_risk(0, &theta).unwrap();
        assert!(ha > hb);
        let pa = ctx.phi.phi_prime(ha).unwrap();
        let pb = ctx.phi.phi_prime(hb).unwrap();
        assert!(pa > pb);
    }

    fn random_ctx(seed: u64, kind: LossKind, beta: f64, scheme: Scheme) -> CriterionContext {
        use rand::Rng;
        let mut rng = derive_stream(seed, 99).rng();
        let d = 3;
        let data: Vec<Observation> = (0..15)
            .map(|_| {
                let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let y = match kind {
                    LossKind::Logistic => {
                        if rng.gen::<bool>() { 1.0 } else { -1.0 }
                    }
                    _ => rng.gen_range(-2.0..2.0),
                };
                if kind == LossKind::GaussianLocation { Observation::scalar(y) } else { Observation::new(x, y) }
            })
            .collect();
        let centering = match kind {
            LossKind::Logistic => CenteringSpec::BinaryLabelNormal { dim: d },
            LossKind::GaussianLocation => CenteringSpec::GaussianLocation { mean: 0.5, sd: 1.0 },
            LossKind::SquaredRegression => CenteringSpec::StandardNormalProduct { dim: d },
        };
        let prior = DpPrior::new(2.0, centering).unwrap();
        let ens = match scheme {
            Scheme::Sbmc => sbmc_ensemble(&prior, &data, 12, 10, derive_stream(seed, 1)).unwrap(),
            _ => mdmc_ensemble(&prior, &data, 12, 10, derive_stream(seed, 1)).unwrap(),
        };
        CriterionContext::new(ens, LossSpec::new(kind, 1.0).unwrap(), PhiSpec::from_beta(beta).unwrap()).unwrap()
    }

    #[test]
    fn jensen_gap_and_beta_monotonicity() {
        for seed in 0..10 {
            let ctx = random_ctx(seed, LossKind::SquaredRegression, 1.0, Scheme::Mdmc);
            let theta = vec![0.3, -0.2, 0.1];
            let risks = ctx.inner_risks(&theta).unwrap();
            let mean = risks.iter().sum::<f64>() / risks.len() as f64;
            let v = ctx.robust_value(&theta).unwrap();
            assert!(v >= ctx.phi.phi(mean).unwrap() - 1e-10);
            let mut last = f64::INFINITY;
            for beta in [0.5, 1.0, 3.0, 10.0, 100.0, 1e4] {
                let c = CriterionContext { phi: PhiSpec::from_beta(beta).unwrap(), ..ctx.clone() };
                let val = c.robust_value(&theta).unwrap();
                assert!(val <= last);
                last = val;
            }
            let ident = CriterionContext { phi: PhiSpec::Identity, ..ctx.clone() }.robust_value(&theta).unwrap();
            assert!((last - ident).abs() < 1e-3 * ident.max(1.0));
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for (seed, kind) in [(1, LossKind::SquaredRegression), (2, LossKind::Logistic), (3, LossKind::GaussianLocation)] {
            let ctx = random_ctx(seed, kind, 1.0, Scheme::Sbmc);
            let theta: Vec<f64> = (0..ctx.dim()).map(|k| 0.1 * k as f64 - 0.05).collect();
            let g = ctx.robust_grad(&theta).unwrap();
            for k in 0..theta.len() {
                let h = 1e-6;
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[k] += h;
                tm[k] -= h;
                let fd = (ctx.robust_value(&tp).unwrap() - ctx.robust_value(&tm).unwrap()) / (2.0 * h);
                assert!((g[k] - fd).abs() / g[k].abs().max(1e-3) < 1e-5, "{kind:?} k={k}: {} vs {fd}", g[k]);
            }
        }
    }

    #[test]
    fn sample_directions_average_to_gradient() {
        let ctx = random_ctx(4, LossKind::Logistic, 1.0, Scheme::Mdmc);
        let theta = vec![0.2, -0.1, 0.4];
        let g = ctx.robust_grad(&theta).unwrap();
        let n = ctx.num_samples();
        let mut avg = vec![0.0; 3];
        for i in 0..n {
            for (a, v) in avg.iter_mut().zip(ctx.sample_direction(i, &theta).unwrap()) {
                *a += v / n as f64;
            }
        }
        for (a, b) in avg.iter().zip(&g) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn empirical_measure_identity_phi_is_empirical_risk() {
        let data: Vec<Observation> = (0..9).map(|i| Observation::new(vec![i as f64, 1.0], 0.3 * i as f64)).collect();
        let ctx = CriterionContext::new(WeightedEnsemble::empirical(&data).unwrap(), LossSpec::squared(1.0), PhiSpec::Identity)
            .unwrap();
        let theta = [0.2, 0.1];
        let emp = empirical_risk(&LossSpec::squared(1.0), &data, &theta).unwrap();
        assert!((ctx.robust_value(&theta).unwrap() - emp).abs() < 1e-15);
    }

    #[test]
    fn ridge_lambda_values() {
        assert_eq!(ridge_lambda(0.0, 100).unwrap(), 0.0);
        assert_eq!(ridge_lambda(5.0, 100).unwrap(), 0.05);
        assert_eq!(ridge_lambda(100.0, 100).unwrap(), 1.0);
        assert!(ridge_lambda(1.0, 0).is_err());
    }

    #[test]
    fn neutral_value_rules() {
        let data: Vec<Observation> = (0..10).map(|i| Observation::new(vec![i as f64 * 0.1, 1.0], 0.5)).collect();
        let loss = LossSpec::squared(1.0);
        let theta = [2f64.sqrt(), 2f64.sqrt()]; // |theta|^2 = 4
        let emp = empirical_risk(&loss, &data, &theta).unwrap();

        let p = DpPrior::new(0.0, CenteringSpec::StandardNormalProduct { dim: 2 }).unwrap();
        assert_eq!(neutral_value(&data, &p, &loss, &theta, None).unwrap(), emp);

        let alpha = 3.0;
        let p = DpPrior::new(alpha, CenteringSpec::StandardNormalProduct { dim: 2 }).unwrap();
        let v = neutral_value(&data, &p, &loss, &theta, None).unwrap();
        let expected = emp * 10.0 / 13.0 + 5.0 * alpha / 13.0;
        assert!((v - expected).abs() < 1e-12);

        let p = DpPrior::new(alpha, CenteringSpec::LassoVariance { dim: 2 }).unwrap();
        let t = [0.5, -0.5];
        let v = neutral_value(&data, &p, &loss, &t, None).unwrap();
        let emp = empirical_risk(&loss, &data, &t).unwrap();
        assert!((v - (emp * 10.0 / 13.0 + 2.0 * alpha / 13.0)).abs() < 1e-12);
    }

    #[test]
    fn neutral_needs_budget_without_rule() {
        let data = vec![Observation::new(vec![1.0], 1.0)];
        let p = DpPrior::new(1.0, CenteringSpec::BinaryLabelNormal { dim: 1 }).unwrap();
        let loss = LossSpec::logistic(1.0);
        assert!(matches!(neutral_value(&data, &p, &loss, &[0.0], None), Err(Error::Config(_))));
        // logistic at theta = 0 is log 2 for every point, so the MC estimate is exact
        let v = neutral_value(&data, &p, &loss, &[0.0], Some((PRIOR_MC_DRAWS, derive_stream(0, 7)))).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn neutral_mc_matches_analytic_rule() {
        // compound-symmetry has an analytic rule; compare with MC through point masses
        let p = DpPrior::new(1.0, CenteringSpec::CompoundSymmetryNormal { dim: 3, rho: 0.3 }).unwrap();
        let mut rng = derive_stream(5, 5).rng();
        let atoms: Vec<Observation> = (0..200_000).map(|_| p.centering.sample(&mut rng, &[]).unwrap()).collect();
        let loss = LossSpec::squared(1.0);
        let theta = [0.5, -0.2, 0.8];
        let analytic = NeutralObjective::new(&[], &p, loss, None).unwrap().prior_risk(&theta).unwrap();
        let mc = empirical_risk(&loss, &atoms, &theta).unwrap();
        assert!((analytic - mc).abs() / analytic < 0.01, "{analytic} vs {mc}");
    }

    #[test]
    fn neutral_gradient_matches_finite_differences() {
        let data: Vec<Observation> = (0..8).map(|i| Observation::new(vec![(i as f64).sin(), 1.0, 0.3], (i as f64).cos())).collect();
        for centering in [
            CenteringSpec::StandardNormalProduct { dim: 3 },
            CenteringSpec::CompoundSymmetryNormal { dim: 3, rho: 0.3 },
            CenteringSpec::Empirical,
        ] {
            let obj = NeutralObjective::new(&data, &DpPrior::new(2.0, centering).unwrap(), LossSpec::squared(1.0), None).unwrap();
            let theta = [0.3, -0.4, 0.25];
            let g = obj.gradient(&theta).unwrap();
            for k in 0..3 {
                let mut tp = theta;
                let mut tm = theta;
                tp[k] += 1e-6;
                tm[k] -= 1e-6;
                let fd = (obj.value(&tp).unwrap() - obj.value(&tm).unwrap()) / 2e-6;
                assert!((g[k] - fd).abs() < 1e-6 * g[k].abs().max(1.0));
            }
        }
    }
}
