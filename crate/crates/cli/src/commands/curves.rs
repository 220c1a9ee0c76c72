use std::collections::BTreeMap;
use std::path::Path;

use curemc_core::posterior::{cure_curve, CureCurve};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::store::{load_fit, pooled};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveReport {
    /// Covariate values as given, on the original scale.
    pub x: BTreeMap<String, f64>,
    #[serde(flatten)]
    pub curve: CureCurve,
}

/// Parses `name=value,name=value`.
pub fn parse_assignments(spec: &str) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, value) = part.split_once('=').ok_or_else(|| {
            CliError::Validation(format!("expected name=value, got `{part}`"))
        })?;
        let v: f64 = value
            .trim()
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| CliError::Validation(format!("`{value}` is not a number")))?;
        if out.insert(name.trim().to_string(), v).is_some() {
            return Err(CliError::Validation(format!("`{name}` given twice")));
        }
    }
    Ok(out)
}

/// Posterior cure probability given survival to each time in `t_grid`, for
/// one covariate profile. The default grid has `points` times from 0 to the
/// largest observed time.
pub fn curves(
    dir: &Path,
    x: &BTreeMap<String, f64>,
    t_grid: Option<Vec<f64>>,
    points: usize,
    level: f64,
) -> Result<CurveReport> {
    let (fit, traces) = load_fit(dir, false)?;
    if let Some(extra) = x.keys().find(|k| !fit.covariates.contains(k)) {
        return Err(CliError::Validation(format!(
            "unknown covariate `{extra}`; expected {:?}",
            fit.covariates
        )));
    }
    let row = fit
        .covariates
        .iter()
        .zip(&fit.standardization)
        .map(|(name, t)| {
            let v = *x
                .get(name)
                .ok_or_else(|| CliError::Validation(format!("missing covariate `{name}`")))?;
            Ok(t.as_ref().map_or(v, |t| t.apply(v)))
        })
        .collect::<Result<Vec<f64>>>()?;
    let grid = match t_grid {
        Some(g) => g,
        None => {
            if points < 2 {
                return Err(CliError::Validation("need at least 2 grid points".into()));
            }
            let step = fit.max_time / (points - 1) as f64;
            (0..points).map(|i| i as f64 * step).collect()
        }
    };
    let draws: Vec<_> = pooled(&traces)
        .retained()
        .iter()
        .map(|d| d.params.clone())
        .collect();
    let curve = cure_curve(&draws, &row, &grid, level)?;
    if curve.skipped > 0 {
        log::warn!("{} draws could not be evaluated and were skipped", curve.skipped);
    }
    Ok(CurveReport { x: x.clone(), curve })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assignments() {
        let a = parse_assignments("age=35, sex=1").unwrap();
        assert_eq!(a["age"], 35.0);
        assert_eq!(a["sex"], 1.0);
        assert!(parse_assignments("age").is_err());
        assert!(parse_assignments("age=x").is_err());
        assert!(parse_assignments("age=1,age=2").is_err());
    }
}
