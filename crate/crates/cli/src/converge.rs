//! Re-solve at enlarged Fock dimensions and compare every figure of merit.

use optopiston::observables::{evaluate_engine, FigureOfMerit};
use optopiston::EngineConfig;
use serde::Serialize;
use serde_json::json;

use crate::config::Resolved;
use crate::error::CliError;
use crate::jobs::Engine;
use crate::output;

/// Enlargement used when no target dims are given.
pub const DEFAULT_STEP: [usize; 3] = [1, 1, 5];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Delta {
    pub engine: &'static str,
    pub observable: &'static str,
    pub base: Option<f64>,
    pub enlarged: Option<f64>,
    pub abs_delta: Option<f64>,
    pub rel_delta: Option<f64>,
}

fn observables(f: &FigureOfMerit) -> [(&'static str, Option<f64>); 6] {
    [
        ("g2", f.g2),
        ("P", Some(f.power)),
        ("P_L", f.power_under_load),
        ("deltaF", Some(f.delta_f)),
        ("entropy", Some(f.entropy)),
        ("mean_phonons", Some(f.mean_phonons)),
    ]
}

pub fn compare(engine: &'static str, base: &FigureOfMerit, enlarged: &FigureOfMerit) -> Vec<Delta> {
    observables(base)
        .into_iter()
        .zip(observables(enlarged))
        .map(|((name, a), (_, b))| {
            let (abs_delta, rel_delta) = match (a, b) {
                (Some(a), Some(b)) => {
                    let d = (b - a).abs();
                    let scale = a.abs().max(b.abs());
                    (Some(d), Some(if scale > 0.0 { d / scale } else { 0.0 }))
                }
                _ => (None, None),
            };
            Delta {
                engine,
                observable: name,
                base: a,
                enlarged: b,
                abs_delta,
                rel_delta,
            }
        })
        .collect()
}

pub fn target_dims(base: [usize; 3], to: Option<Vec<usize>>) -> Result<[usize; 3], CliError> {
    match to {
        None => Ok([0, 1, 2].map(|i| base[i] + DEFAULT_STEP[i])),
        Some(v) => <[usize; 3]>::try_from(v.as_slice())
            .map_err(|_| CliError::Validation(format!("--to needs three dims, got {}", v.len()))),
    }
}

pub fn run(resolved: &Resolved, engines: &[Engine], to: Option<Vec<usize>>) -> Result<Vec<Delta>, CliError> {
    let options = resolved.solve_options();
    let mut deltas = Vec::new();
    let mut targets = Vec::new();
    for &engine in engines {
        let Some(variant) = engine.variant() else {
            return Err(CliError::Validation("converge applies to the quantum engines only".into()));
        };
        let base: &EngineConfig = resolved.engine(variant);
        let dims = target_dims(base.dims, to.clone())?;
        let enlarged = EngineConfig { dims, ..base.clone() };
        enlarged.validate()?;
        log::info!("{}: {:?} -> {:?}", engine.name(), base.dims, dims);
        let a = evaluate_engine(base, &options)?;
        let b = evaluate_engine(&enlarged, &options)?;
        deltas.extend(compare(engine.name(), &a.figures, &b.figures));
        targets.push(json!({ "engine": engine.name(), "base": base.dims, "enlarged": dims }));
    }
    let meta = output::metadata("converge", resolved, json!({ "dims": targets }));
    output::write_csv(&resolved.out_dir.join("converge.csv"), &meta, &deltas)?;
    Ok(deltas)
}
