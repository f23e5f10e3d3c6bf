use std::path::PathBuf;

use serde_json::json;

use crate::config::Resolved;
use crate::error::CliError;
use crate::jobs::{self, Engine, Job, Labelled, Row};
use crate::output;

/// 26 points on `[0, 0.5]`.
pub fn default_n_b_grid() -> Vec<f64> {
    (0..26).map(|i| 0.02 * i as f64).collect()
}

pub fn check_values(values: &[f64]) -> Result<(), CliError> {
    if values.is_empty() {
        return Err(CliError::Validation("sweep needs at least one value".into()));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(CliError::Validation(format!("sweep value {v} is not finite")));
    }
    Ok(())
}

/// Rows for every engine at every value, engine-major.
pub fn sweep_rows(resolved: &Resolved, engines: &[Engine], param: &str, values: &[f64], with_free_energy: bool) -> Result<Vec<(Row, Option<jobs::Detail>)>, CliError> {
    jobs::check_param(param)?;
    check_values(values)?;
    let mut items = Vec::new();
    for &engine in engines {
        for &value in values {
            items.push(Labelled {
                engine,
                param: param.to_string(),
                value,
                job: Job::build(engine, resolved, &[(param, value)], with_free_energy)?,
            });
        }
    }
    Ok(jobs::run_all(&items))
}

pub fn failures(rows: &[Row]) -> usize {
    rows.iter().filter(|r| r.error.is_some()).count()
}

pub fn run(resolved: &Resolved, engines: &[Engine], param: &str, values: Option<Vec<f64>>, output: Option<PathBuf>) -> Result<(), CliError> {
    let values = match values {
        Some(v) => v,
        None if param == "n_b" => default_n_b_grid(),
        None => return Err(CliError::Validation(format!("--values is required when sweeping `{param}`"))),
    };
    let rows: Vec<Row> = sweep_rows(resolved, engines, param, &values, true)?
        .into_iter()
        .map(|(r, _)| r)
        .collect();
    let path = output.unwrap_or_else(|| resolved.out_dir.join(format!("sweep_{param}.csv")));
    let meta = output::metadata(
        "sweep",
        resolved,
        json!({ "param": param, "values": values, "engines": engines }),
    );
    output::write_csv(&path, &meta, &rows)?;
    output::say(&path.display().to_string());
    match failures(&rows) {
        0 => Ok(()),
        n => Err(CliError::Solver(format!("{n} of {} sweep points failed", rows.len()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_spans_zero_to_half() {
        let g = default_n_b_grid();
        assert_eq!(g.len(), 26);
        assert_eq!(g[0], 0.0);
        assert!((g[25] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn value_lists_are_checked() {
        assert!(check_values(&[]).is_err());
        assert!(check_values(&[0.1, f64::NAN]).is_err());
        assert!(check_values(&[0.1]).is_ok());
    }
}
