//! Classical estimators the robust fits are compared against.
//!
//! Objectives are unscaled and intercept-free (inputs are standardized):
//! ridge `(1/n)|y - X theta|^2 + lambda |theta|^2`, LASSO
//! `(1/n)|y - X theta|^2 + lambda |theta|_1`, and logistic
//! `(1/n) sum log(1 + exp(-y x'theta)) [+ lambda |theta|_1]`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::loss::{dot, sigmoid, Observation};

fn design(data: &[Observation]) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n = data.len();
    if n == 0 {
        return Err(Error::input("estimator needs at least one observation"));
    }
    let d = data[0].x.len();
    if let Some(o) = data.iter().find(|o| o.x.len() != d) {
        return Err(Error::Shape { expected: d, got: o.x.len() });
    }
    let x = DMatrix::from_fn(n, d, |i, k| data[i].x[k]);
    let y = DVector::from_iterator(n, data.iter().map(|o| o.y));
    Ok((x, y))
}

/// `(X'X/n + lambda I)^{-1} X'y/n`.
pub fn ridge_oracle(data: &[Observation], lambda: f64) -> Result<Vec<f64>> {
    if !(lambda >= 0.0) {
        return Err(Error::param(format!("ridge lambda must be >= 0, got {lambda}")));
    }
    let (x, y) = design(data)?;
    let n = data.len() as f64;
    let d = x.ncols();
    let gram = x.transpose() * &x / n + DMatrix::identity(d, d) * lambda;
    let rhs = x.transpose() * y / n;
    let singular = || Error::numeric("ridge system is singular (rank-deficient design with lambda = 0)");
    let scale = gram.diagonal().max();
    let chol = gram.cholesky().ok_or_else(singular)?;
    // pivots below relative precision mean the rounding hid an exact zero
    if chol.l_dirty().diagonal().iter().any(|l| l * l <= 1e-12 * scale) {
        return Err(singular());
    }
    Ok(chol.solve(&rhs).iter().copied().collect())
}

/// Least squares; fails on a rank-deficient design.
pub fn ols(data: &[Observation]) -> Result<Vec<f64>> {
    let (x, y) = design(data)?;
    if x.nrows() < x.ncols() {
        return Err(Error::numeric(format!("OLS needs n >= d, got n = {}, d = {}", x.nrows(), x.ncols())));
    }
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > smax * 1e-12) {
        return Err(Error::numeric("OLS design is rank deficient"));
    }
    let theta = svd.solve(&y, 0.0).map_err(|e| Error::numeric(e.to_string()))?;
    Ok(theta.iter().copied().collect())
}

fn soft(z: f64, t: f64) -> f64 {
    z.signum() * (z.abs() - t).max(0.0)
}

/// Cyclic coordinate descent until no coordinate moves by more than `1e-8`.
pub fn lasso_oracle(data: &[Observation], lambda: f64) -> Result<Vec<f64>> {
    if !(lambda >= 0.0) {
        return Err(Error::param(format!("lasso lambda must be >= 0, got {lambda}")));
    }
    let (x, y) = design(data)?;
    let n = data.len() as f64;
    let d = x.ncols();
    let col_sq: Vec<f64> = (0..d).map(|k| x.column(k).norm_squared() / n).collect();
    let mut theta = vec![0.0; d];
    let mut resid = y.clone();
    for _ in 0..100_000 {
        let mut max_move: f64 = 0.0;
        for k in 0..d {
            if col_sq[k] == 0.0 {
                continue;
            }
            let col = x.column(k);
            let rho = col.dot(&resid) / n + col_sq[k] * theta[k];
            // d/dtheta_k of (1/n)|r|^2 is -2 (rho - z theta_k); lambda enters as lambda/2
            let new = soft(rho, lambda / 2.0) / col_sq[k];
            let delta = new - theta[k];
            if delta != 0.0 {
                resid.axpy(-delta, &col, 1.0);
                theta[k] = new;
                max_move = max_move.max(delta.abs());
            }
        }
        if max_move <= 1e-8 {
            return Ok(theta);
        }
    }
    Err(Error::numeric("coordinate descent did not reach a fixed point"))
}

/// Iteration cap for the unpenalized logistic fit; separable data has no
/// finite minimizer, so the fit stops there.
pub const LOGISTIC_MAX_ITER: usize = 100;

fn logistic_risk(data: &[Observation], theta: &[f64]) -> f64 {
    data.iter()
        .map(|o| {
            let z = o.y * dot(theta, &o.x);
            (-z).max(0.0) + (-z.abs()).exp().ln_1p()
        })
        .sum::<f64>()
        / data.len() as f64
}

/// Damped Newton iterations on the mean logistic loss, at most
/// [`LOGISTIC_MAX_ITER`] of them.
pub fn logistic_unregularized(data: &[Observation]) -> Result<Vec<f64>> {
    let (x, _) = design(data)?;
    let n = data.len() as f64;
    let d = x.ncols();
    let mut theta = vec![0.0; d];
    let mut f = logistic_risk(data, &theta);
    for _ in 0..LOGISTIC_MAX_ITER {
        let mut g = DVector::zeros(d);
        let mut h = DMatrix::zeros(d, d);
        for (i, o) in data.iter().enumerate() {
            let z = o.y * dot(&theta, &o.x);
            let s = sigmoid(-z);
            let row = x.row(i).transpose();
            g.axpy(-o.y * s / n, &row, 1.0);
            let w = s * (1.0 - s) / n;
            h.ger(w, &row, &row, 1.0);
        }
        if g.norm() < 1e-10 {
            break;
        }
        // tiny ridge keeps the Newton system solvable on separable data
        h += DMatrix::identity(d, d) * 1e-10;
        let step = h.cholesky().map(|c| c.solve(&g)).unwrap_or_else(|| g.clone());
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand: Vec<f64> = theta.iter().zip(step.iter()).map(|(a, s)| a - t * s).collect();
            let fc = logistic_risk(data, &cand);
            if fc <= f - 1e-4 * t * g.dot(&step) {
                theta = cand;
                f = fc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("logistic fit produced a non-finite coefficient"));
    }
    Ok(theta)
}

/// Accelerated proximal gradient on the L1-penalized mean logistic loss.
pub fn logistic_l1(data: &[Observation], lambda: f64) -> Result<Vec<f64>> {
    if !(lambda >= 0.0) {
        return Err(Error::param(format!("L1 penalty must be >= 0, got {lambda}")));
    }
    let (x, _) = design(data)?;
    let n = data.len() as f64;
    let d = x.ncols();
    // Lipschitz constant of the smooth part: |X|_2^2 / (4 n)
    let lip = x.clone().svd(false, false).singular_values.max().powi(2) / (4.0 * n);
    let step = 1.0 / lip.max(1e-12);
    let grad = |th: &[f64]| {
        let mut g = vec![0.0; d];
        for o in data {
            let s = -o.y * sigmoid(-o.y * dot(th, &o.x)) / n;
            g.iter_mut().zip(&o.x).for_each(|(gk, xk)| *gk += s * xk);
        }
        g
    };
    let mut theta = vec![0.0; d];
    let mut z = theta.clone();
    let mut t = 1.0f64;
    for _ in 0..50_000 {
        let g = grad(&z);
        let next: Vec<f64> = z.iter().zip(&g).map(|(zk, gk)| soft(zk - step * gk, step * lambda)).collect();
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let momentum = (t - 1.0) / t_next;
        let moved = next.iter().zip(&theta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        z = next.iter().zip(&theta).map(|(a, b)| a + momentum * (a - b)).collect();
        theta = next;
        t = t_next;
        if moved < 1e-10 {
            break;
        }
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("L1 logistic fit produced a non-finite coefficient"));
    }
    Ok(theta)
}

/// Sample mean (location maximum likelihood).
pub fn location_mle(data: &[Observation]) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::input("location estimate needs at least one observation"));
    }
    Ok(vec![data.iter().map(|o| o.y).sum::<f64>() / data.len() as f64])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{derive_stream, sample_standard_normal};

    fn random_data(n: usize, d: usize, seed: u64) -> Vec<Observation> {
        let mut rng = derive_stream(seed, 0).rng();
        (0..n)
            .map(|_| {
                let x: Vec<f64> = (0..d).map(|_| sample_standard_normal(&mut rng)).collect();
                let y = x.iter().enumerate().map(|(k, v)| (k as f64 - 1.0) * v).sum::<f64>() + 0.3 * sample_standard_normal(&mut rng);
                Observation::new(x, y)
            })
            .collect()
    }

    #[test]
    fn ridge_zero_is_ols_with_orthogonal_residuals() {
        let data = random_data(40, 4, 1);
        let th = ridge_oracle(&data, 0.0).unwrap();
        for k in 0..4 {
            let s: f64 = data.iter().map(|o| o.x[k] * (o.y - dot(&th, &o.x))).sum();
            assert!(s.abs() < 1e-8);
        }
        let o = ols(&data).unwrap();
        for (a, b) in th.iter().zip(&o) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn ridge_shrinks_to_zero() {
        let data = random_data(40, 4, 2);
        let th = ridge_oracle(&data, 1e6).unwrap();
        assert!(dot(&th, &th).sqrt() < 1e-3);
    }

    #[test]
    fn singular_designs() {
        let data = vec![Observation::new(vec![1.0, 1.0], 1.0), Observation::new(vec![2.0, 2.0], 2.0)];
        assert!(matches!(ridge_oracle(&data, 0.0), Err(Error::Numeric(_))));
        assert!(matches!(ols(&data), Err(Error::Numeric(_))));
        assert!(ridge_oracle(&data, 0.1).is_ok());
    }

    #[test]
    fn lasso_zero_penalty_is_ols_and_kkt_holds() {
        let data = random_data(60, 3, 3);
        let l = lasso_oracle(&data, 0.0).unwrap();
        let o = ols(&data).unwrap();
        for (a, b) in l.iter().zip(&o) {
            assert!((a - b).abs() < 1e-6);
        }
        let lambda = 0.5;
        let th = lasso_oracle(&data, lambda).unwrap();
        let n = data.len() as f64;
        for k in 0..3 {
            // subgradient optimality of (1/n)|r|^2 + lambda |theta|_1
            let g: f64 = -2.0 / n * data.iter().map(|o| o.x[k] * (o.y - dot(&th, &o.x))).sum::<f64>();
            if th[k] != 0.0 {
                assert!((g + lambda * th[k].signum()).abs() < 1e-6);
            } else {
                assert!(g.abs() <= lambda + 1e-6);
            }
        }
    }

    #[test]
    fn lasso_large_penalty_is_zero() {
        let data = random_data(30, 3, 4);
        assert_eq!(lasso_oracle(&data, 1e3).unwrap(), vec![0.0; 3]);
    }

    fn logistic_data(n: usize, seed: u64) -> Vec<Observation> {
        let mut rng = derive_stream(seed, 1).rng();
        (0..n)
            .map(|_| {
                let x = vec![sample_standard_normal(&mut rng), sample_standard_normal(&mut rng)];
                let p = sigmoid(0.8 * x[0] - 0.5 * x[1]);
                let y = if rand::Rng::gen::<f64>(&mut rng) < p { 1.0 } else { -1.0 };
                Observation::new(x, y)
            })
            .collect()
    }

    #[test]
    fn logistic_gradient_vanishes() {
        let data = logistic_data(400, 5);
        let th = logistic_unregularized(&data).unwrap();
        for k in 0..2 {
            let g: f64 = data.iter().map(|o| -o.y * sigmoid(-o.y * dot(&th, &o.x)) * o.x[k]).sum::<f64>() / 400.0;
            assert!(g.abs() < 1e-8);
        }
        // the L1 fit at zero penalty reaches the same point
        let l1 = logistic_l1(&data, 0.0).unwrap();
        for (a, b) in th.iter().zip(&l1) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn logistic_l1_kkt() {
        let data = logistic_data(200, 6);
        let lambda = 0.05;
        let th = logistic_l1(&data, lambda).unwrap();
        for k in 0..2 {
            let g: f64 = data.iter().map(|o| -o.y * sigmoid(-o.y * dot(&th, &o.x)) * o.x[k]).sum::<f64>() / 200.0;
            if th[k] != 0.0 {
                assert!((g + lambda * th[k].signum()).abs() < 1e-6);
            } else {
                assert!(g.abs() <= lambda + 1e-6);
            }
        }
    }

    #[test]
    fn separable_logistic_stays_finite() {
        let data = vec![Observation::new(vec![1.0], 1.0), Observation::new(vec![-1.0], -1.0)];
        let th = logistic_unregularized(&data).unwrap();
        assert!(th[0].is_finite() && th[0] > 5.0);
    }

    #[test]
    fn location_mean() {
        let d: Vec<Observation> = [1.0, 2.0, 6.0].iter().map(|&v| Observation::scalar(v)).collect();
        assert_eq!(location_mle(&d).unwrap(), vec![3.0]);
    }
}
