//! Tabular datasets: CSV ingestion, splitting and standardization.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::Observation;
use crate::sampling::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Regression,
    /// Targets stored as 0/1 on disk and as -1/+1 in memory.
    Classification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub rows: Vec<Observation>,
    pub task: Task,
}

impl Dataset {
    pub fn new(feature_names: Vec<String>, rows: Vec<Observation>, task: Task) -> Result<Self> {
        let d = feature_names.len();
        if let Some(r) = rows.iter().find(|r| r.x.len() != d) {
            return Err(Error::Shape { expected: d, got: r.x.len() });
        }
        Ok(Self { feature_names, rows, task })
    }

    /// Generic `x0, x1, ...` names.
    pub fn from_rows(rows: Vec<Observation>, task: Task) -> Result<Self> {
        let d = rows.first().map_or(0, |r| r.x.len());
        Self::new((0..d).map(|k| format!("x{k}")).collect(), rows, task)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            task: self.task,
        }
    }

    /// Random `(first, rest)` split with `first.len() == size`.
    pub fn random_split(&self, size: usize, stream: RngStream) -> Result<(Dataset, Dataset)> {
        if size > self.len() {
            return Err(Error::input(format!("cannot take {size} rows from a dataset of {}", self.len())));
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut stream.rng());
        Ok((self.subset(&idx[..size]), self.subset(&idx[size..])))
    }
}

/// Read a CSV with a header row whose last column is `target`.
pub fn read_csv<R: Read>(input: R, task: Task) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(input);
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    match headers.last() {
        Some(last) if last == "target" => {}
        _ => return Err(Error::Data(format!("last CSV column must be named \"target\", header is {headers:?}"))),
    }
    let d = headers.len() - 1;
    let mut rows = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        let vals = rec
            .iter()
            .enumerate()
            .map(|(k, v)| {
                v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| {
                    Error::Data(format!("row {}: column {:?} is not a finite number: {v:?}", line + 2, headers[k]))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let mut y = vals[d];
        if task == Task::Classification {
            y = match y {
                v if v == 0.0 || v == -1.0 => -1.0,
                v if v == 1.0 => 1.0,
                v => return Err(Error::Data(format!("row {}: class label must be 0 or 1, got {v}", line + 2))),
            };
        }
        rows.push(Observation::new(vals[..d].to_vec(), y));
    }
    if rows.is_empty() {
        return Err(Error::Data("CSV has no data rows".into()));
    }
    Dataset::new(headers[..d].to_vec(), rows, task)
}

pub fn read_csv_path(path: &Path, task: Task) -> Result<Dataset> {
    let f = std::fs::File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    read_csv(std::io::BufReader::new(f), task)
}

/// Inverse of [`read_csv`]; class labels are written back as 0/1.
pub fn write_csv<W: Write>(data: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = data.feature_names.clone();
    header.push("target".into());
    w.write_record(&header)?;
    for r in &data.rows {
        let mut rec: Vec<String> = r.x.iter().map(|v| v.to_string()).collect();
        let y = match data.task {
            Task::Classification => if r.y > 0.0 { 1.0 } else { 0.0 },
            Task::Regression => r.y,
        };
        rec.push(y.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Column means and population standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub x_mean: Vec<f64>,
    pub x_sd: Vec<f64>,
    /// Present for regression targets only.
    pub y_mean_sd: Option<(f64, f64)>,
}

fn mean_sd(vals: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = vals.clone().count() as f64;
    let m = vals.clone().sum::<f64>() / n;
    let v = vals.map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, v.sqrt())
}

impl Standardizer {
    pub fn fit(data: &Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::input("cannot standardize an empty dataset"));
        }
        let mut x_mean = Vec::with_capacity(data.dim());
        let mut x_sd = Vec::with_capacity(data.dim());
        for k in 0..data.dim() {
            let (m, s) = mean_sd(data.rows.iter().map(|r| r.x[k]));
            if !(s > 0.0) {
                return Err(Error::Data(format!("column {:?} has zero variance", data.feature_names[k])));
            }
            x_mean.push(m);
            x_sd.push(s);
        }
        let y_mean_sd = match data.task {
            Task::Regression => {
                let (m, s) = mean_sd(data.rows.iter().map(|r| r.y));
                if !(s > 0.0) {
                    return Err(Error::Data("column \"target\" has zero variance".into()));
                }
                Some((m, s))
            }
            Task::Classification => None,
        };
        Ok(Self { x_mean, x_sd, y_mean_sd })
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.dim() != self.x_mean.len() {
            return Err(Error::Shape { expected: self.x_mean.len(), got: data.dim() });
        }
        let rows = data
            .rows
            .iter()
            .map(|r| {
                let x = r.x.iter().zip(self.x_mean.iter().zip(&self.x_sd)).map(|(v, (m, s))| (v - m) / s).collect();
                let y = match self.y_mean_sd {
                    Some((m, s)) => (r.y - m) / s,
                    None => r.y,
                };
                Observation::new(x, y)
            })
            .collect();
        Ok(Dataset { feature_names: data.feature_names.clone(), rows, task: data.task })
    }
}

/// Fit on `data` and transform it; the returned statistics transform held-out sets.
pub fn standardize(data: &Dataset) -> Result<(Dataset, Standardizer)> {
    let s = Standardizer::fit(data)?;
    Ok((s.apply(data)?, s))
}
