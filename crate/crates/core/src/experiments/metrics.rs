//! Out-of-sample metrics and their replication summaries.

use serde::{Deserialize, Serialize};

use crate::criterion::empirical_risk;
use crate::error::{Error, Result};
use crate::loss::{dot, LossKind, LossSpec, Observation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub test_risk: f64,
    pub coef_l2_dist: Option<f64>,
    pub coef_l2_norm: Option<f64>,
}

/// Test RMSE for squared loss, mean unscaled loss otherwise, plus coefficient
/// distance to `true_coef` and coefficient norm.
pub fn compute_metrics(theta: &[f64], test: &[Observation], loss: &LossSpec, true_coef: Option<&[f64]>) -> Result<MetricRow> {
    let unit = LossSpec { scale: 1.0, ..*loss };
    let mean = empirical_risk(&unit, test, theta)?;
    let test_risk = match loss.kind {
        LossKind::SquaredRegression => mean.sqrt(),
        _ => mean,
    };
    row(theta, test_risk, true_coef)
}

/// Mean of the scaled loss `c h` on `test` (the tabulated real-data metric).
pub fn compute_scaled_metrics(theta: &[f64], test: &[Observation], loss: &LossSpec) -> Result<MetricRow> {
    row(theta, empirical_risk(loss, test, theta)?, None)
}

fn row(theta: &[f64], test_risk: f64, true_coef: Option<&[f64]>) -> Result<MetricRow> {
    let coef_l2_dist = match true_coef {
        Some(a) => {
            if a.len() != theta.len() {
                return Err(Error::Shape { expected: theta.len(), got: a.len() });
            }
            let diff: Vec<f64> = theta.iter().zip(a).map(|(t, a)| t - a).collect();
            Some(dot(&diff, &diff).sqrt())
        }
        None => None,
    };
    let r = MetricRow { test_risk, coef_l2_dist, coef_l2_norm: Some(dot(theta, theta).sqrt()) };
    if !r.test_risk.is_finite() || r.coef_l2_dist.is_some_and(|v| !v.is_finite()) {
        return Err(Error::numeric("non-finite metric"));
    }
    Ok(r)
}

fn mean_std(vals: &[f64]) -> (f64, f64) {
    let n = vals.len() as f64;
    let m = vals.iter().sum::<f64>() / n;
    let v = vals.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, v.sqrt())
}

fn summarize_opt(rows: &[MetricRow], f: impl Fn(&MetricRow) -> Option<f64>) -> (Option<f64>, Option<f64>) {
    let vals: Option<Vec<f64>> = rows.iter().map(f).collect();
    match vals {
        Some(v) => {
            let (m, s) = mean_std(&v);
            (Some(m), Some(s))
        }
        None => (None, None),
    }
}

/// Column-wise mean and population standard deviation.
pub fn summarize(rows: &[MetricRow]) -> Result<(MetricRow, MetricRow)> {
    if rows.is_empty() {
        return Err(Error::input("nothing to summarize"));
    }
    let risks: Vec<f64> = rows.iter().map(|r| r.test_risk).collect();
    let (rm, rs) = mean_std(&risks);
    let (dm, ds) = summarize_opt(rows, |r| r.coef_l2_dist);
    let (nm, ns) = summarize_opt(rows, |r| r.coef_l2_norm);
    Ok((
        MetricRow { test_risk: rm, coef_l2_dist: dm, coef_l2_norm: nm },
        MetricRow { test_risk: rs, coef_l2_dist: ds, coef_l2_norm: ns },
    ))
}
