//! Repeated fitting on disjoint batches or fresh simulated samples.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dgp::DgpSpec;
use super::fit::{fit_method, Method, RobustSettings};
use super::metrics::{compute_metrics, compute_scaled_metrics, summarize, MetricRow};
use crate::error::{Error, Result};
use crate::loss::Observation;
use crate::sampling::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationReport {
    pub method: Method,
    pub label: String,
    pub per_batch_metrics: Vec<MetricRow>,
    pub mean: MetricRow,
    pub std: MetricRow,
}

impl ReplicationReport {
    pub fn new(method: Method, per_batch_metrics: Vec<MetricRow>) -> Result<Self> {
        let (mean, std) = summarize(&per_batch_metrics)?;
        Ok(Self { method, label: method.to_string(), per_batch_metrics, mean, std })
    }
}

/// Split `train` into `batches` disjoint random batches of `batch_size`,
/// fit every method on every batch and score on `test` with the scaled mean
/// loss. All methods see the same batch and the same per-batch stream.
pub fn batch_replicate(
    train: &[Observation],
    test: &[Observation],
    batches: usize,
    batch_size: usize,
    methods: &[Method],
    settings: &RobustSettings,
    stream: RngStream,
) -> Result<Vec<ReplicationReport>> {
    if batches == 0 || batch_size == 0 {
        return Err(Error::param("batches and batch size must be positive"));
    }
    if batches * batch_size > train.len() {
        return Err(Error::input(format!(
            "{batches} batches of {batch_size} need {} training rows, only {} available",
            batches * batch_size,
            train.len()
        )));
    }
    let mut perm: Vec<usize> = (0..train.len()).collect();
    perm.shuffle(&mut stream.child(0).rng());
    let parts: Vec<Vec<Observation>> = (0..batches)
        .map(|b| perm[b * batch_size..(b + 1) * batch_size].iter().map(|&i| train[i].clone()).collect())
        .collect();
    run_grid(methods, batches, |m, b| {
        let theta = fit_method(m, &parts[b], settings, stream.child(1 + b as u64))?;
        compute_scaled_metrics(&theta, test, &settings.loss)
    })
}

/// Fresh training and test draws from `dgp` for each replication.
pub fn simulate_replicate(
    dgp: &DgpSpec,
    replications: usize,
    test_size: usize,
    methods: &[Method],
    settings: &RobustSettings,
    stream: RngStream,
) -> Result<Vec<ReplicationReport>> {
    if replications == 0 || test_size == 0 {
        return Err(Error::param("replications and test size must be positive"));
    }
    let samples = (0..replications)
        .into_par_iter()
        .map(|r| {
            let rs = stream.child(r as u64);
            Ok((dgp.generate(rs.child(0))?, dgp.generate_test(test_size, rs.child(1))?))
        })
        .collect::<Result<Vec<_>>>()?;
    let a = dgp.true_coef();
    run_grid(methods, replications, |m, r| {
        let (train, test) = &samples[r];
        let theta = fit_method(m, train, settings, stream.child(r as u64).child(2))?;
        compute_metrics(&theta, test, &settings.loss, Some(&a))
    })
}

fn run_grid<F>(methods: &[Method], reps: usize, task: F) -> Result<Vec<ReplicationReport>>
where
    F: Fn(&Method, usize) -> Result<MetricRow> + Sync,
{
    if methods.is_empty() {
        return Err(Error::param("no methods to replicate"));
    }
    let jobs: Vec<(usize, usize)> = (0..methods.len()).flat_map(|m| (0..reps).map(move |r| (m, r))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(m, r)| task(&methods[m], r))
        .collect::<Result<Vec<_>>>()?;
    methods
        .iter()
        .enumerate()
        .map(|(m, method)| ReplicationReport::new(*method, rows[m * reps..(m + 1) * reps].to_vec()))
        .collect()
}
