//! Property tests for the criterion, the posterior ensembles and the SGD
//! estimator on randomly drawn small problems.

use dp_robust::ambiguity::phi;
use dp_robust::criterion::{empirical_risk, neutral_value};
use dp_robust::experiments::cv::{select_best, CvRow};
use dp_robust::experiments::data::{standardize, Dataset, Task};
use dp_robust::optimizer::{all_terms, minibatch_direction};
use dp_robust::*;
use proptest::prelude::*;
use rand::Rng;

fn observations(kind: LossKind, n: usize, d: usize, seed: u64) -> Vec<Observation> {
    let mut rng = derive_stream(seed, 11).rng();
    (0..n)
        .map(|_| match kind {
            LossKind::GaussianLocation => Observation::scalar(rng.gen_range(-2.0..3.0)),
            LossKind::SquaredRegression => Observation::new((0..d).map(|_| rng.gen_range(-1.5..1.5)).collect(), rng.gen_range(-2.0..2.0)),
            LossKind::Logistic => {
                Observation::new((0..d).map(|_| rng.gen_range(-1.5..1.5)).collect(), if rng.gen::<bool>() { 1.0 } else { -1.0 })
            }
        })
        .collect()
}

fn centering(kind: LossKind, d: usize) -> CenteringSpec {
    match kind {
        LossKind::GaussianLocation => CenteringSpec::GaussianLocation { mean: 0.5, sd: 1.0 },
        LossKind::SquaredRegression => CenteringSpec::StandardNormalProduct { dim: d },
        LossKind::Logistic => CenteringSpec::BinaryLabelNormal { dim: d },
    }
}

fn theta_for(kind: LossKind, d: usize, seed: u64) -> Vec<f64> {
    let mut rng = derive_stream(seed, 12).rng();
    let dim = if kind == LossKind::GaussianLocation { 1 } else { d };
    (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn kind_strategy() -> impl Strategy<Value = LossKind> {
    prop_oneof![Just(LossKind::SquaredRegression), Just(LossKind::Logistic), Just(LossKind::GaussianLocation)]
}

fn scheme_strategy() -> impl Strategy<Value = Scheme> {
    prop_oneof![Just(Scheme::Sbmc), Just(Scheme::Mdmc), Just(Scheme::Bbmc)]
}

#[derive(Debug, Clone)]
struct Case {
    kind: LossKind,
    scheme: Scheme,
    alpha: f64,
    n: usize,
    d: usize,
    samples: usize,
    trunc: usize,
    seed: u64,
}

fn case() -> impl Strategy<Value = Case> {
    (kind_strategy(), scheme_strategy(), 0.0f64..10.0, 1usize..12, 1usize..4, 1usize..12, 1usize..10, any::<u64>())
        .prop_map(|(kind, scheme, alpha, n, d, samples, trunc, seed)| Case { kind, scheme, alpha, n, d, samples, trunc, seed })
}

impl Case {
    fn data(&self) -> Vec<Observation> {
        observations(self.kind, self.n, self.d, self.seed)
    }

    fn ensemble(&self) -> WeightedEnsemble {
        let prior = DpPrior::new(self.alpha, centering(self.kind, self.d)).unwrap();
        build_ensemble(self.scheme, &prior, &self.data(), self.samples, self.trunc, derive_stream(self.seed, 1)).unwrap()
    }

    fn ctx(&self, phi: PhiSpec) -> CriterionContext {
        CriterionContext::new(self.ensemble(), LossSpec::new(self.kind, 0.1).unwrap(), phi).unwrap()
    }

    fn theta(&self) -> Vec<f64> {
        theta_for(self.kind, self.d, self.seed)
    }
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ensemble_weights_lie_on_the_simplex(c in case()) {
        let e = c.ensemble();
        prop_assert_eq!(e.len(), c.samples);
        let atoms = match c.scheme {
            Scheme::Sbmc => c.trunc + 1,
            Scheme::Mdmc => c.trunc,
            Scheme::Bbmc => c.n,
        };
        for s in &e.samples {
            prop_assert_eq!(s.weights.len(), atoms);
            prop_assert!(s.weights.iter().all(|w| *w >= 0.0));
            prop_assert!((s.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
        }
        prop_assert!(e.validate().is_ok());
        prop_assert_eq!(e, c.ensemble());
    }

    #[test]
    fn jensen_gap_is_nonnegative(c in case(), beta in 0.5f64..20.0) {
        let p = PhiSpec::from_beta(beta).unwrap();
        let ctx = c.ctx(p);
        let theta = c.theta();
        let hs = ctx.inner_risks(&theta).unwrap();
        let mean_h = hs.iter().sum::<f64>() / hs.len() as f64;
        let v = ctx.robust_value(&theta).unwrap();
        prop_assert!(v >= phi(&p, mean_h).unwrap() - 1e-10);
    }

    #[test]
    fn value_decreases_in_beta(c in case(), b1 in 0.5f64..20.0, ratio in 1.0f64..10.0) {
        let theta = c.theta();
        let e = c.ensemble();
        let loss = LossSpec::new(c.kind, 0.1).unwrap();
        let at = |p: PhiSpec| CriterionContext::new(e.clone(), loss, p).unwrap().robust_value(&theta).unwrap();
        let v1 = at(PhiSpec::from_beta(b1).unwrap());
        let v2 = at(PhiSpec::from_beta(b1 * ratio).unwrap());
        let vi = at(PhiSpec::Identity);
        prop_assert!(v1 >= v2 - 1e-12 * v1.abs().max(1.0));
        prop_assert!(v2 >= vi - 1e-12 * v2.abs().max(1.0));
    }

    #[test]
    fn sample_and_term_directions_average_to_the_gradient(c in case(), beta in prop_oneof![Just(f64::INFINITY), 0.5f64..20.0]) {
        let ctx = c.ctx(PhiSpec::from_beta(beta).unwrap());
        let theta = c.theta();
        let g = ctx.robust_grad(&theta).unwrap();
        let n = ctx.num_samples();
        let mut mean = vec![0.0; g.len()];
        for i in 0..n {
            for (m, v) in mean.iter_mut().zip(ctx.sample_direction(i, &theta).unwrap()) {
                *m += v / n as f64;
            }
        }
        let terms = minibatch_direction(&ctx, &theta, &all_terms(&ctx)).unwrap();
        let scale = g.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        for k in 0..g.len() {
            prop_assert!((mean[k] - g[k]).abs() <= 1e-12 * scale);
            prop_assert!((terms[k] - g[k]).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn exact_empirical_measure_gives_empirical_risk(c in case()) {
        let data = c.data();
        let loss = LossSpec::new(c.kind, 0.1).unwrap();
        let ctx = CriterionContext::new(WeightedEnsemble::empirical(&data).unwrap(), loss, PhiSpec::Identity).unwrap();
        let theta = c.theta();
        prop_assert!(close(ctx.robust_value(&theta).unwrap(), empirical_risk(&loss, &data, &theta).unwrap(), 1e-14));
    }

    #[test]
    fn neutral_criterion_ridge_identity(alpha in 0.0f64..50.0, n in 1usize..30, d in 1usize..6, seed in any::<u64>(), c in 0.01f64..2.0) {
        let data = observations(LossKind::SquaredRegression, n, d, seed);
        let prior = DpPrior::new(alpha, CenteringSpec::StandardNormalProduct { dim: d }).unwrap();
        let loss = LossSpec::squared(c);
        let theta = theta_for(LossKind::SquaredRegression, d, seed);
        let v = neutral_value(&data, &prior, &loss, &theta, None).unwrap();
        let w = alpha / (alpha + n as f64);
        let sq: f64 = theta.iter().map(|t| t * t).sum();
        let expected = (1.0 - w) * empirical_risk(&loss, &data, &theta).unwrap() + w * c * (1.0 + sq);
        prop_assert!((v - expected).abs() <= 1e-12 * expected.max(1.0));
    }

    #[test]
    fn sgd_trace_shape(c in case(), passes in 1usize..5) {
        let ctx = c.ctx(PhiSpec::from_beta(2.0).unwrap());
        let cfg = SgdConfig::new(0.5, 10.0, passes, vec![0.0; c.theta().len()], c.seed);
        let t = sgd_minimize(&ctx, &cfg).unwrap();
        prop_assert_eq!(t.criterion_values.len(), passes + 1);
        prop_assert_eq!(t.theta_norms.len(), passes + 1);
        prop_assert_eq!(t.updates, (passes * c.samples) as u64);
        prop_assert_eq!(t, sgd_minimize(&ctx, &cfg).unwrap());
    }

    #[test]
    fn cv_choice_attains_the_minimum(risks in prop::collection::vec(0.0f64..1.0, 1..12)) {
        let table: Vec<CvRow> = risks.iter().enumerate().map(|(k, &risk)| CvRow { value: k as f64 * 0.5, risk }).collect();
        let best = select_best(&table).unwrap();
        let min = risks.iter().cloned().fold(f64::INFINITY, f64::min);
        let row = table.iter().find(|r| r.value == best).unwrap();
        prop_assert!(row.risk <= min + 1e-10);
        prop_assert!(table.iter().filter(|r| r.value < best).all(|r| r.risk > min + 1e-10));
    }

    #[test]
    fn standardized_columns_have_zero_mean_unit_sd(n in 3usize..40, d in 1usize..5, seed in any::<u64>()) {
        let rows = observations(LossKind::SquaredRegression, n, d, seed);
        let (z, _) = standardize(&Dataset::from_rows(rows, Task::Regression).unwrap()).unwrap();
        for k in 0..=d {
            let col: Vec<f64> = z.rows.iter().map(|r| if k < d { r.x[k] } else { r.y }).collect();
            let m = col.iter().sum::<f64>() / n as f64;
            let v = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
            prop_assert!(m.abs() < 1e-12 && (v - 1.0).abs() < 1e-10);
        }
    }
}
