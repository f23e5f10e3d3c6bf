//! One engine evaluated at one parameter value, as a CSV row.

use std::collections::BTreeMap;

use clap::ValueEnum;
use optopiston::classical::{self, ClassicalConfig, DEFAULT_BIN_STEP};
use optopiston::observables::evaluate_engine;
use optopiston::{EngineConfig, EngineVariant, SolveOptions};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Resolved;
use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Single,
    Cascade,
    Classical,
}

impl Engine {
    pub const ALL: [Engine; 3] = [Engine::Single, Engine::Cascade, Engine::Classical];

    pub fn variant(self) -> Option<EngineVariant> {
        match self {
            Engine::Single => Some(EngineVariant::SingleCavity),
            Engine::Cascade => Some(EngineVariant::Cascade),
            Engine::Classical => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Engine::Single => "single",
            Engine::Cascade => "cascade",
            Engine::Classical => "classical",
        }
    }
}

/// Parameters a sweep may vary, shared by the quantum and classical configs.
pub const SWEEP_PARAMS: [&str; 8] = ["n_a", "n_b", "n_c", "kappa_l", "g", "kappa_a", "kappa_b", "kappa_c"];

pub fn check_param(name: &str) -> Result<(), CliError> {
    if SWEEP_PARAMS.contains(&name) {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "unknown sweep parameter `{name}` (expected one of {})",
            SWEEP_PARAMS.join(", ")
        )))
    }
}

fn slot<'a>(name: &str, fields: [&'a mut f64; 8]) -> &'a mut f64 {
    let i = SWEEP_PARAMS.iter().position(|p| *p == name).expect("checked parameter");
    fields.into_iter().nth(i).unwrap()
}

pub fn set_quantum(config: &EngineConfig, name: &str, value: f64) -> EngineConfig {
    let mut c = config.clone();
    *slot(
        name,
        [&mut c.n_a, &mut c.n_b, &mut c.n_c, &mut c.kappa_l, &mut c.g, &mut c.kappa_a, &mut c.kappa_b, &mut c.kappa_c],
    ) = value;
    c
}

pub fn set_classical(config: &ClassicalConfig, name: &str, value: f64) -> ClassicalConfig {
    let mut c = config.clone();
    *slot(
        name,
        [&mut c.n_a, &mut c.n_b, &mut c.n_c, &mut c.kappa_l, &mut c.g, &mut c.kappa_a, &mut c.kappa_b, &mut c.kappa_c],
    ) = value;
    c
}

/// A fully specified evaluation.
#[derive(Clone, Debug)]
pub enum Job {
    Quantum { config: EngineConfig, options: SolveOptions },
    /// `with_free_energy` also runs the `g = 0` reference ensemble.
    Classical { config: ClassicalConfig, with_free_energy: bool },
}

impl Job {
    pub fn build(engine: Engine, resolved: &Resolved, overrides: &[(&str, f64)], with_free_energy: bool) -> Result<Self, CliError> {
        match engine.variant() {
            Some(v) => {
                let mut config = resolved.engine(v).clone();
                for (k, x) in overrides {
                    config = set_quantum(&config, k, *x);
                }
                config
                    .validate()
                    .map_err(|e| CliError::Validation(format!("{}: {e}", engine.name())))?;
                Ok(Job::Quantum {
                    config,
                    options: resolved.solve_options(),
                })
            }
            None => {
                let mut config = resolved.classical.clone();
                for (k, x) in overrides {
                    config = set_classical(&config, k, *x);
                }
                config
                    .validate()
                    .map_err(|e| CliError::Validation(format!("classical: {e}")))?;
                Ok(Job::Classical { config, with_free_energy })
            }
        }
    }

    fn reference(&self) -> Option<ClassicalConfig> {
        match self {
            Job::Classical {
                config,
                with_free_energy: true,
            } => Some(config.clone().with_coupling(0.0)),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub engine: &'static str,
    pub param: String,
    pub value: f64,
    #[serde(rename = "N_b")]
    pub n_b: f64,
    #[serde(rename = "N_c")]
    pub n_c: f64,
    #[serde(rename = "kappa_L")]
    pub kappa_l: f64,
    pub g2: Option<f64>,
    #[serde(rename = "P")]
    pub power: Option<f64>,
    #[serde(rename = "P_L")]
    pub power_under_load: Option<f64>,
    #[serde(rename = "deltaF")]
    pub delta_f: Option<f64>,
    #[serde(rename = "deltaF_se")]
    pub delta_f_se: Option<f64>,
    pub mean_phonons: Option<f64>,
    pub entropy: Option<f64>,
    pub residual: Option<f64>,
    pub error: Option<String>,
}

impl Row {
    fn blank(engine: Engine, param: &str, value: f64, job: &Job) -> Self {
        let (n_b, n_c, kappa_l) = match job {
            Job::Quantum { config, .. } => (config.n_b, config.n_c, config.kappa_l),
            Job::Classical { config, .. } => (config.n_b, config.n_c, config.kappa_l),
        };
        Row {
            engine: engine.name(),
            param: param.to_string(),
            value,
            n_b,
            n_c,
            kappa_l,
            g2: None,
            power: None,
            power_under_load: None,
            delta_f: None,
            delta_f_se: None,
            mean_phonons: None,
            entropy: None,
            residual: None,
            error: None,
        }
    }
}

/// Evaluation product kept alongside the row for figure output.
#[derive(Clone, Debug)]
pub enum Detail {
    Quantum(optopiston::observables::EvaluatedEngine),
    Classical(classical::ClassicalEnsemble),
}

pub struct Labelled {
    pub engine: Engine,
    pub param: String,
    pub value: f64,
    pub job: Job,
}

fn run_one(item: &Labelled, references: &BTreeMap<String, Result<classical::ClassicalEnsemble, String>>) -> (Row, Option<Detail>) {
    let mut row = Row::blank(item.engine, &item.param, item.value, &item.job);
    let outcome: Result<Detail, String> = match &item.job {
        Job::Quantum { config, options } => match evaluate_engine(config, options) {
            Ok(eval) => {
                let f = &eval.figures;
                row.g2 = f.g2;
                row.power = Some(f.power);
                row.power_under_load = f.power_under_load;
                row.delta_f = Some(f.delta_f);
                row.mean_phonons = Some(f.mean_phonons);
                row.entropy = Some(f.entropy);
                row.residual = Some(eval.steady.residual);
                Ok(Detail::Quantum(eval))
            }
            Err(e) => Err(e.to_string()),
        },
        Job::Classical { config, .. } => classical::run_ensemble(config)
            .map_err(|e| e.to_string())
            .and_then(|ens| {
                let reference = match item.job.reference() {
                    Some(r) => match &references[&key(&r)] {
                        Ok(ensemble) => Some(ensemble),
                        Err(e) => return Err(format!("reference ensemble: {e}")),
                    },
                    None => None,
                };
                let figs = classical::classical_figures(&ens, reference.unwrap_or(&ens), config, DEFAULT_BIN_STEP)
                    .map_err(|e| e.to_string())?;
                row.g2 = figs.figures.g2;
                row.power = Some(figs.figures.power);
                row.power_under_load = figs.figures.power_under_load;
                if reference.is_some() {
                    row.delta_f = Some(figs.figures.delta_f);
                    row.delta_f_se = Some(figs.delta_f_std_error);
                }
                row.mean_phonons = Some(figs.figures.mean_phonons);
                row.entropy = Some(figs.figures.entropy);
                Ok(Detail::Classical(ens))
            }),
    };
    match outcome {
        Ok(d) => (row, Some(d)),
        Err(e) => {
            log::warn!("{} at {} = {}: {e}", item.engine.name(), item.param, item.value);
            row.error = Some(e);
            (row, None)
        }
    }
}

fn key(config: &ClassicalConfig) -> String {
    serde_json::to_string(config).expect("config serializes")
}

/// Runs every job in parallel on the current pool. Rows come back in input
/// order; a failing job fills the `error` column and leaves the others alone.
pub fn run_all(items: &[Labelled]) -> Vec<(Row, Option<Detail>)> {
    let mut refs: BTreeMap<String, ClassicalConfig> = BTreeMap::new();
    for item in items {
        if let Some(r) = item.job.reference() {
            refs.insert(key(&r), r);
        }
    }
    let references: BTreeMap<String, Result<classical::ClassicalEnsemble, String>> = refs
        .into_par_iter()
        .map(|(k, c)| (k, classical::run_ensemble(&c).map_err(|e| e.to_string())))
        .collect();
    items.par_iter().map(|item| run_one(item, &references)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_parameter_reaches_its_field() {
        let base = EngineConfig::single_cavity();
        let cbase = ClassicalConfig::from_engine(&base);
        for (i, name) in SWEEP_PARAMS.iter().enumerate() {
            let value = 0.125 + i as f64;
            let q = set_quantum(&base, name, value);
            let c = set_classical(&cbase, name, value);
            let qv = serde_json::to_value(&q).unwrap();
            let cv = serde_json::to_value(&c).unwrap();
            assert_eq!(qv[name], value);
            assert_eq!(cv[name], value);
        }
    }

    #[test]
    fn unknown_parameter_is_rejected() {
        assert!(check_param("n_b").is_ok());
        assert!(matches!(check_param("omega_q"), Err(CliError::Validation(_))));
    }
}
