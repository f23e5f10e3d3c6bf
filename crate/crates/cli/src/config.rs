//! Run configuration: built-in defaults, then the config file, then flags.
//!
//! Config file (TOML), every table optional:
//!
//! ```toml
//! [engine]         # shared by both quantum engines and the classical one
//! n_b = 0.33
//! dims = [4, 4, 21]
//!
//! [single_cavity]  # per-variant overrides, any EngineConfig key
//! g = 0.06
//!
//! [cascade]
//! gamma_1 = 0.15
//!
//! [classical]      # any ClassicalConfig key; physical keys default to the
//! n_traj = 500     # resolved single-cavity engine
//! seed = 7
//!
//! [run]
//! method = "direct"
//! threads = 4
//! out_dir = "out"
//! ```

use std::path::{Path, PathBuf};

use optopiston::classical::ClassicalConfig;
use optopiston::{EngineConfig, EngineVariant, SolveOptions, SolverMethod};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::CliError;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub engine: Table,
    #[serde(default)]
    pub single_cavity: Table,
    #[serde(default)]
    pub cascade: Table,
    #[serde(default)]
    pub classical: Table,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub method: Option<SolverMethod>,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }
}

/// Command-line values that override the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    /// `key=value` pairs applied to every engine.
    pub set: Vec<String>,
    pub dims: Option<Vec<usize>>,
    pub method: Option<SolverMethod>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub n_traj: Option<usize>,
    pub n_steps: Option<usize>,
    pub full_profile: bool,
}

/// Fully resolved settings of one invocation.
#[derive(Clone, Debug, Serialize)]
pub struct Resolved {
    pub single_cavity: EngineConfig,
    pub cascade: EngineConfig,
    pub classical: ClassicalConfig,
    pub method: Option<SolverMethod>,
    pub threads: usize,
    pub out_dir: PathBuf,
}

impl Resolved {
    pub fn engine(&self, variant: EngineVariant) -> &EngineConfig {
        match variant {
            EngineVariant::SingleCavity => &self.single_cavity,
            EngineVariant::Cascade => &self.cascade,
        }
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            method: self.method,
            ..SolveOptions::default()
        }
    }
}

fn parse_assignment(pair: &str) -> Result<(String, Value), CliError> {
    let (key, raw) = pair
        .split_once('=')
        .ok_or_else(|| CliError::Validation(format!("expected key=value, got `{pair}`")))?;
    let key = key.trim().to_string();
    // bare words are read as strings, everything else as a TOML value
    let parsed: Table = toml::from_str(&format!("v = {}", raw.trim()))
        .or_else(|_| toml::from_str(&format!("v = \"{}\"", raw.trim())))
        .map_err(|e| CliError::Validation(format!("value of `{key}`: {e}")))?;
    Ok((key, parsed["v"].clone()))
}

fn merge<T>(base: &T, layers: &[&Table], what: &str) -> Result<T, CliError>
where
    T: Serialize + for<'de> Deserialize<'de>,
{
    let mut table = match Value::try_from(base) {
        Ok(Value::Table(t)) => t,
        _ => unreachable!("configs serialize to tables"),
    };
    for layer in layers {
        for (k, v) in layer.iter() {
            table.insert(k.clone(), v.clone());
        }
    }
    Value::Table(table)
        .try_into()
        .map_err(|e| CliError::Validation(format!("{what}: {e}")))
}

pub fn resolve(file: Option<&ConfigFile>, flags: &Overrides) -> Result<Resolved, CliError> {
    let empty = ConfigFile::default();
    let file = file.unwrap_or(&empty);
    if file.engine.contains_key("variant") {
        return Err(CliError::Validation("`variant` cannot be set in [engine]".into()));
    }

    let mut flag_layer = Table::new();
    for pair in &flags.set {
        let (k, v) = parse_assignment(pair)?;
        if k == "variant" {
            return Err(CliError::Validation("`variant` is chosen with --engines".into()));
        }
        flag_layer.insert(k, v);
    }
    if let Some(d) = &flags.dims {
        if d.len() != 3 {
            return Err(CliError::Validation(format!("--dims needs three values, got {}", d.len())));
        }
        flag_layer.insert(
            "dims".into(),
            Value::Array(d.iter().map(|&x| Value::Integer(x as i64)).collect()),
        );
    }

    let single = merge(
        &EngineConfig::single_cavity(),
        &[&file.engine, &file.single_cavity, &flag_layer],
        "single_cavity",
    )?;
    let cascade = merge(
        &EngineConfig::cascade(),
        &[&file.engine, &file.cascade, &flag_layer],
        "cascade",
    )?;
    for cfg in [&single, &cascade] {
        cfg.validate()
            .map_err(|e| CliError::Validation(format!("{}: {e}", cfg.variant.name())))?;
    }
    if single.variant != EngineVariant::SingleCavity || cascade.variant != EngineVariant::Cascade {
        return Err(CliError::Validation("engine tables cannot change `variant`".into()));
    }

    let mut classical_flags = Table::new();
    if let Some(seed) = flags.seed {
        classical_flags.insert("seed".into(), Value::Integer(seed as i64));
    }
    if let Some(n) = flags.n_traj {
        classical_flags.insert("n_traj".into(), Value::Integer(n as i64));
    }
    if let Some(n) = flags.n_steps {
        classical_flags.insert("n_steps".into(), Value::Integer(n as i64));
    }
    let mut classical: ClassicalConfig = merge(
        &ClassicalConfig::from_engine(&single),
        &[&file.classical, &classical_flags],
        "classical",
    )?;
    if flags.full_profile {
        classical = classical.full_profile();
    }
    classical
        .validate()
        .map_err(|e| CliError::Validation(format!("classical: {e}")))?;

    let threads = flags.threads.or(file.run.threads).unwrap_or(0);
    Ok(Resolved {
        single_cavity: single,
        cascade,
        classical,
        method: flags.method.or(file.run.method),
        threads,
        out_dir: flags
            .out_dir
            .clone()
            .or_else(|| file.run.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out")),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(text: &str) -> ConfigFile {
        toml::from_str(text).unwrap()
    }

    #[test]
    fn defaults_reproduce_the_library_defaults() {
        let r = resolve(None, &Overrides::default()).unwrap();
        assert_eq!(r.single_cavity, EngineConfig::single_cavity());
        assert_eq!(r.cascade, EngineConfig::cascade());
        assert_eq!(r.classical, ClassicalConfig::from_engine(&EngineConfig::single_cavity()));
    }

    #[test]
    fn flags_beat_file_beats_defaults() {
        let f = file("[engine]\nn_b = 0.2\nn_c = 0.1\n[cascade]\nn_b = 0.4\n[classical]\nseed = 3\nn_traj = 9");
        let flags = Overrides {
            set: vec!["n_c=0.3".into()],
            seed: Some(5),
            ..Overrides::default()
        };
        let r = resolve(Some(&f), &flags).unwrap();
        assert_eq!(r.single_cavity.n_b, 0.2);
        assert_eq!(r.cascade.n_b, 0.4);
        assert_eq!(r.single_cavity.n_c, 0.3);
        assert_eq!(r.classical.n_c, 0.3);
        assert_eq!(r.classical.seed, 5);
        assert_eq!(r.classical.n_traj, 9);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let f = file("[engine]\nnb = 0.2");
        assert!(matches!(resolve(Some(&f), &Overrides::default()), Err(CliError::Validation(_))));
        assert!(toml::from_str::<ConfigFile>("[engines]\nn_b = 1").is_err());
        let flags = Overrides {
            set: vec!["kappa = 1".into()],
            ..Overrides::default()
        };
        assert!(resolve(None, &flags).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        let flags = Overrides {
            set: vec!["n_b=-1".into()],
            ..Overrides::default()
        };
        assert!(matches!(resolve(None, &flags), Err(CliError::Validation(_))));
        let flags = Overrides {
            dims: Some(vec![2, 2]),
            ..Overrides::default()
        };
        assert!(resolve(None, &flags).is_err());
    }

    #[test]
    fn assignments_parse_numbers_arrays_and_words() {
        assert_eq!(parse_assignment("g=0.1").unwrap().1, Value::Float(0.1));
        assert_eq!(
            parse_assignment("dims=[2,2,3]").unwrap().1,
            Value::Array(vec![Value::Integer(2), Value::Integer(2), Value::Integer(3)])
        );
        assert_eq!(parse_assignment("x=abc").unwrap().1, Value::String("abc".into()));
        assert!(parse_assignment("novalue").is_err());
    }
}
