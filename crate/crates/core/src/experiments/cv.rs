//! K-fold cross-validation over a scalar hyperparameter grid.
//!
//! Every grid value sees the same folds and the same per-fold random streams,
//! so differences between grid values are not masked by Monte Carlo noise.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit_method, Method, RobustSettings};
use crate::ambiguity::PhiSpec;
use crate::criterion::empirical_risk;
use crate::error::{Error, Result};
use crate::loss::{LossSpec, Observation};
use crate::sampling::RngStream;

/// Risks within this distance of the minimum count as ties.
pub const CV_TIE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub value: f64,
    pub risk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best: f64,
    pub table: Vec<CvRow>,
    /// Fold index of every input row.
    pub fold_of: Vec<usize>,
}

/// Round-robin fold labels over a random permutation.
pub fn assign_folds(n: usize, folds: usize, stream: RngStream) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::param(format!("need at least 2 folds, got {folds}")));
    }
    if folds > n {
        return Err(Error::param(format!("{folds} folds leave some fold empty with {n} rows")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut stream.rng());
    let mut fold_of = vec![0; n];
    for (rank, &i) in perm.iter().enumerate() {
        fold_of[i] = rank % folds;
    }
    Ok(fold_of)
}

/// Smallest grid value among risks within [`CV_TIE_TOL`] of the minimum;
/// the earliest entry wins among equal values.
pub fn select_best(table: &[CvRow]) -> Result<f64> {
    let min = table
        .iter()
        .map(|r| r.risk)
        .fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(Error::numeric("no finite cross-validation risk"));
    }
    let mut best: Option<f64> = None;
    for r in table {
        if r.risk <= min + CV_TIE_TOL && best.map_or(true, |b| r.value < b) {
            best = Some(r.value);
        }
    }
    Ok(best.expect("minimum is attained"))
}

/// Mean over folds of the scaled out-of-fold loss, for each grid value.
pub fn kfold_cv_with<F>(data: &[Observation], folds: usize, grid: &[f64], loss: &LossSpec, stream: RngStream, fit: F) -> Result<CvResult>
where
    F: Fn(&[Observation], f64, RngStream) -> Result<Vec<f64>> + Sync,
{
    if grid.is_empty() {
        return Err(Error::param("cross-validation grid is empty"));
    }
    let fold_of = assign_folds(data.len(), folds, stream.child(0))?;
    let splits: Vec<(Vec<Observation>, Vec<Observation>)> = (0..folds)
        .map(|f| {
            let (mut train, mut held) = (Vec::new(), Vec::new());
            for (o, &k) in data.iter().zip(&fold_of) {
                if k == f { held.push(o.clone()) } else { train.push(o.clone()) }
            }
            (train, held)
        })
        .collect();
    let tasks: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..folds).map(move |f| (g, f))).collect();
    let risks = tasks
        .par_iter()
        .map(|&(g, f)| {
            let (train, held) = &splits[f];
            let theta = fit(train, grid[g], stream.child(1 + f as u64))?;
            empirical_risk(loss, held, &theta)
        })
        .collect::<Result<Vec<f64>>>()?;
    let table: Vec<CvRow> = grid
        .iter()
        .enumerate()
        .map(|(g, &value)| CvRow { value, risk: risks[g * folds..(g + 1) * folds].iter().sum::<f64>() / folds as f64 })
        .collect();
    Ok(CvResult { best: select_best(&table)?, table, fold_of })
}

/// Cross-validate the DP concentration `alpha` of the robust method.
pub fn kfold_cv(
    data: &[Observation],
    folds: usize,
    alpha_grid: &[f64],
    beta: PhiSpec,
    settings: &RobustSettings,
    stream: RngStream,
) -> Result<CvResult> {
    kfold_cv_with(data, folds, alpha_grid, &settings.loss, stream, |train, alpha, s| {
        fit_method(&Method::Robust { alpha, beta }, train, settings, s)
    })
}

/// Cross-validate the L1 penalty of the LASSO / L1-logistic baseline.
pub fn kfold_cv_l1(data: &[Observation], folds: usize, lambda_grid: &[f64], settings: &RobustSettings, stream: RngStream) -> Result<CvResult> {
    kfold_cv_with(data, folds, lambda_grid, &settings.loss, stream, |train, lambda, s| {
        fit_method(&Method::L1 { lambda }, train, settings, s)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::derive_stream;

    #[test]
    fn fold_assignment() {
        let f = assign_folds(10, 3, derive_stream(1, 0)).unwrap();
        let counts: Vec<usize> = (0..3).map(|k| f.iter().filter(|&&v| v == k).count()).collect();
        assert_eq!(counts, vec![4, 3, 3]);
        assert_eq!(f, assign_folds(10, 3, derive_stream(1, 0)).unwrap());
        assert!(assign_folds(3, 4, derive_stream(1, 0)).is_err());
        assert!(assign_folds(3, 1, derive_stream(1, 0)).is_err());
    }

    #[test]
    fn tie_breaks() {
        let rows = |v: &[(f64, f64)]| v.iter().map(|&(value, risk)| CvRow { value, risk }).collect::<Vec<_>>();
        assert_eq!(select_best(&rows(&[(5.0, 1.0)])).unwrap(), 5.0);
        assert_eq!(select_best(&rows(&[(5.0, 1.0), (2.0, 1.0 + 1e-12), (9.0, 0.5)])).unwrap(), 9.0);
        assert_eq!(select_best(&rows(&[(5.0, 1.0), (2.0, 1.0 + 1e-12)])).unwrap(), 2.0);
        assert_eq!(select_best(&rows(&[(0.0, 1.0), (0.0, 1.0), (0.0, 1.0)])).unwrap(), 0.0);
    }

    #[test]
    fn cv_on_location_mean() {
        let data: Vec<Observation> = (0..12).map(|i| Observation::scalar(i as f64)).collect();
        let loss = LossSpec::gaussian_location(1.0);
        // shrinking the fold mean toward 0 only hurts on this uncentered data
        let r = kfold_cv_with(&data, 4, &[0.5, 0.0, 0.9], &loss, derive_stream(2, 0), |train, v, _| {
            let m = train.iter().map(|o| o.y).sum::<f64>() / train.len() as f64;
            Ok(vec![(1.0 - v) * m])
        })
        .unwrap();
        assert_eq!(r.best, 0.0);
        assert_eq!(r.table.len(), 3);
        assert!(kfold_cv_with(&data, 4, &[], &loss, derive_stream(2, 0), |_, _, _| Ok(vec![0.0])).is_err());
    }
}
