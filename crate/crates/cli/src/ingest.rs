//! CSV ingestion with optional covariate standardisation.

use std::io::Read;
use std::path::Path;

use curemc_core::model::Dataset;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// `x_std = (x - mean) / sd` for one covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    pub sd: f64,
}

impl Standardization {
    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mean) / self.sd
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub data: Dataset,
    pub covariates: Vec<String>,
    /// One entry per covariate; `None` for columns left as they are.
    pub transforms: Vec<Option<Standardization>>,
}

pub fn ingest_csv(path: &Path, standardize: bool) -> Result<Ingested> {
    let file = std::fs::File::open(path).map_err(CliError::io(path))?;
    parse_csv(file, standardize)
        .map_err(|e| match e {
            CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
            other => other,
        })
}

/// Parses `y, delta, covariates…`. Column order is free; every column other
/// than `y` and `delta` is a covariate. Errors name the file line.
pub fn parse_csv<R: Read>(reader: R, standardize: bool) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| CliError::Validation(format!("cannot read header: {e}")))?
        .clone();
    let find = |name: &str| header.iter().position(|h| h == name);
    let (Some(iy), Some(id)) = (find("y"), find("delta")) else {
        return Err(CliError::Validation(
            "header must contain columns `y` and `delta`".into(),
        ));
    };
    let cov_idx: Vec<usize> = (0..header.len()).filter(|&c| c != iy && c != id).collect();
    let covariates: Vec<String> = cov_idx.iter().map(|&c| header[c].to_string()).collect();

    let (mut y, mut delta, mut rows) = (Vec::new(), Vec::new(), Vec::new());
    for (r, record) in rdr.records().enumerate() {
        let line = r + 2;
        let record =
            record.map_err(|e| CliError::Validation(format!("line {line}: {e}")))?;
        let cell = |c: usize| -> Result<f64> {
            let s = &record[c];
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    CliError::Validation(format!(
                        "line {line}: column `{}` is not a finite number: `{s}`",
                        &header[c]
                    ))
                })
        };
        let yi = cell(iy)?;
        if yi <= 0.0 {
            return Err(CliError::Validation(format!(
                "line {line}: y must be positive, got {yi}"
            )));
        }
        let di = cell(id)?;
        if di != 0.0 && di != 1.0 {
            return Err(CliError::Validation(format!(
                "line {line}: delta must be 0 or 1, got {}",
                &record[id]
            )));
        }
        y.push(yi);
        delta.push(di == 1.0);
        rows.push(cov_idx.iter().map(|&c| cell(c)).collect::<Result<Vec<f64>>>()?);
    }
    if y.is_empty() {
        return Err(CliError::Validation("no data rows".into()));
    }

    let k = covariates.len();
    let transforms: Vec<Option<Standardization>> = (0..k)
        .map(|j| {
            if !standardize {
                return None;
            }
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            standardization_for(&col, &covariates[j])
        })
        .collect();
    for row in &mut rows {
        for (v, t) in row.iter_mut().zip(&transforms) {
            if let Some(t) = t {
                *v = t.apply(*v);
            }
        }
    }
    Ok(Ingested {
        data: Dataset::new(y, delta, rows, k)?,
        covariates,
        transforms,
    })
}

/// Binary (0/1) columns are left alone, as are constant ones.
fn standardization_for(col: &[f64], name: &str) -> Option<Standardization> {
    if col.iter().all(|&v| v == 0.0 || v == 1.0) {
        return None;
    }
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    if !(sd > 0.0 && sd.is_finite()) {
        log::warn!("covariate `{name}` has no spread; left unstandardised");
        return None;
    }
    Some(Standardization { mean, sd })
}
