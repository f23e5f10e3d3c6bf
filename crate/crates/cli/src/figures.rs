//! Data files behind each figure panel, at desk scale.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use optopiston::classical::{self, PhaseHistogram, TailSpec, DEFAULT_BIN_STEP};
use optopiston::observables::{default_load_grid, optimal_load, wigner, WignerGrid};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::Resolved;
use crate::error::CliError;
use crate::jobs::{self, Detail, Engine, Job, Labelled, Row};
use crate::output;
use crate::sweep;

pub const FIGURE_IDS: [&str; 10] = [
    "fig2", "fig3a", "fig3b", "fig3c", "fig3d", "fig3e", "fig3f", "fig4a", "fig4b", "fig5",
];

/// N_b of the population / Wigner panels.
pub const PANEL_N_B: [f64; 3] = [0.17, 0.33, 0.5];
/// N_b held fixed by the N_c and load panels.
pub const FIXED_N_B: f64 = 0.33;
pub const TRAJECTORY_N_B: f64 = 0.5;
pub const TRAJECTORY_COUNT: usize = 5;
pub const TRAJECTORY_TAIL: usize = 20_000;

/// 11 points on `[0, 1]`.
pub fn n_c_grid() -> Vec<f64> {
    (0..11).map(|i| 0.1 * i as f64).collect()
}

pub fn parse_ids(id: &str) -> Result<Vec<&'static str>, CliError> {
    if id == "all" {
        return Ok(FIGURE_IDS.to_vec());
    }
    FIGURE_IDS
        .iter()
        .find(|f| **f == id)
        .map(|f| vec![*f])
        .ok_or_else(|| CliError::Validation(format!("unknown figure `{id}` (expected all or one of {})", FIGURE_IDS.join(", "))))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Dataset {
    NbSweep,
    NcSweep,
    Load,
}

fn dataset(id: &str) -> Option<Dataset> {
    match id {
        "fig3a" | "fig3b" | "fig4a" => Some(Dataset::NbSweep),
        "fig3c" | "fig3d" | "fig4b" => Some(Dataset::NcSweep),
        "fig3e" | "fig3f" => Some(Dataset::Load),
        _ => None,
    }
}

#[derive(Serialize)]
struct Optimum {
    engine: &'static str,
    kappa_l_star: f64,
    power_star: f64,
    on_boundary: bool,
}

struct Computed {
    rows: Vec<Row>,
    optima: Vec<Optimum>,
    extra: serde_json::Value,
}

fn load_curves(resolved: &Resolved, engines: &[Engine]) -> Result<Computed, CliError> {
    let mut rows = Vec::new();
    let mut optima = Vec::new();
    for &engine in engines {
        let job = Job::build(engine, resolved, &[("n_b", FIXED_N_B)], false)?;
        match job {
            Job::Quantum { config, options } => {
                let grid = default_load_grid(config.kappa_c);
                let best = optimal_load(&config, &grid, &options)?;
                for p in &best.curve {
                    rows.push(Row {
                        engine: engine.name(),
                        param: "kappa_l".into(),
                        value: p.kappa_l,
                        n_b: config.n_b,
                        n_c: config.n_c,
                        kappa_l: p.kappa_l,
                        g2: p.g2,
                        power: None,
                        power_under_load: Some(p.power_under_load),
                        delta_f: None,
                        delta_f_se: None,
                        mean_phonons: Some(p.mean_phonons),
                        entropy: None,
                        residual: None,
                        error: None,
                    });
                }
                optima.push(Optimum {
                    engine: engine.name(),
                    kappa_l_star: best.kappa_l_star,
                    power_star: best.power_star,
                    on_boundary: best.on_boundary,
                });
            }
            Job::Classical { config, .. } => {
                let grid = default_load_grid(config.kappa_c);
                let items: Vec<Labelled> = grid
                    .iter()
                    .map(|&k| {
                        Ok(Labelled {
                            engine,
                            param: "kappa_l".into(),
                            value: k,
                            job: Job::build(engine, resolved, &[("n_b", FIXED_N_B), ("kappa_l", k)], false)?,
                        })
                    })
                    .collect::<Result<_, CliError>>()?;
                let curve: Vec<Row> = jobs::run_all(&items).into_iter().map(|(r, _)| r).collect();
                let best = curve
                    .iter()
                    .enumerate()
                    .filter_map(|(i, r)| r.power_under_load.map(|p| (i, p)))
                    .fold(None, |acc: Option<(usize, f64)>, (i, p)| match acc {
                        Some((_, bp)) if bp >= p => acc,
                        _ => Some((i, p)),
                    });
                if let Some((i, p)) = best {
                    optima.push(Optimum {
                        engine: engine.name(),
                        kappa_l_star: grid[i],
                        power_star: p,
                        on_boundary: i == 0 || i == grid.len() - 1,
                    });
                }
                rows.extend(curve);
            }
        }
    }
    Ok(Computed {
        rows,
        optima,
        extra: json!({ "n_b": FIXED_N_B, "grid": "30 log-spaced points over [1e-2, 1e3] kappa_c" }),
    })
}

fn compute(which: Dataset, resolved: &Resolved, engines: &[Engine]) -> Result<Computed, CliError> {
    match which {
        Dataset::NbSweep => {
            let values = sweep::default_n_b_grid();
            let rows = sweep::sweep_rows(resolved, engines, "n_b", &values, true)?;
            Ok(Computed {
                rows: rows.into_iter().map(|(r, _)| r).collect(),
                optima: Vec::new(),
                extra: json!({ "param": "n_b", "values": values }),
            })
        }
        Dataset::NcSweep => {
            let values = n_c_grid();
            let mut items = Vec::new();
            for &engine in engines {
                for &v in &values {
                    items.push(Labelled {
                        engine,
                        param: "n_c".into(),
                        value: v,
                        job: Job::build(engine, resolved, &[("n_b", FIXED_N_B), ("n_c", v)], true)?,
                    });
                }
            }
            Ok(Computed {
                rows: jobs::run_all(&items).into_iter().map(|(r, _)| r).collect(),
                optima: Vec::new(),
                extra: json!({ "param": "n_c", "values": values, "n_b": FIXED_N_B }),
            })
        }
        Dataset::Load => load_curves(resolved, engines),
    }
}

#[derive(Serialize)]
struct PopulationRow {
    engine: &'static str,
    #[serde(rename = "N_b")]
    n_b: f64,
    n: usize,
    p: f64,
}

#[derive(Serialize)]
struct PointRow {
    #[serde(rename = "N_b")]
    n_b: f64,
    trajectory: usize,
    x_gamma: f64,
    y_gamma: f64,
}

#[derive(Serialize)]
struct WignerPanel {
    engine: &'static str,
    n_b: f64,
    wigner: optopiston::observables::WignerMap,
}

#[derive(Serialize)]
struct HistogramPanel {
    n_b: f64,
    histogram: PhaseHistogram,
}

fn figure_two(resolved: &Resolved, engines: &[Engine]) -> Result<usize, CliError> {
    let mut items = Vec::new();
    for &engine in engines {
        for &n_b in &PANEL_N_B {
            items.push(Labelled {
                engine,
                param: "n_b".into(),
                value: n_b,
                job: Job::build(engine, resolved, &[("n_b", n_b)], false)?,
            });
        }
    }
    let results = jobs::run_all(&items);
    let mut populations = Vec::new();
    let mut wigners = Vec::new();
    let mut points = Vec::new();
    let mut histograms = Vec::new();
    for (item, (_, detail)) in items.iter().zip(&results) {
        match detail {
            Some(Detail::Quantum(eval)) => {
                for (n, &p) in eval.marginal.populations().iter().enumerate() {
                    populations.push(PopulationRow {
                        engine: item.engine.name(),
                        n_b: item.value,
                        n,
                        p,
                    });
                }
                wigners.push(WignerPanel {
                    engine: item.engine.name(),
                    n_b: item.value,
                    wigner: wigner(&eval.marginal, &WignerGrid::default()),
                });
            }
            Some(Detail::Classical(ens)) => {
                let pts = ens.mechanical_points();
                for (t, p) in ens.trajectories.iter().zip(&pts) {
                    points.push(PointRow {
                        n_b: item.value,
                        trajectory: t.index,
                        x_gamma: p[0],
                        y_gamma: p[1],
                    });
                }
                histograms.push(HistogramPanel {
                    n_b: item.value,
                    histogram: PhaseHistogram::new(&pts, DEFAULT_BIN_STEP)?,
                });
            }
            None => {}
        }
    }
    let rows: Vec<Row> = results.into_iter().map(|(r, _)| r).collect();
    let meta = output::metadata("figure", resolved, json!({ "figure": "fig2", "n_b": PANEL_N_B }));
    let dir = &resolved.out_dir;
    output::write_csv(&dir.join("fig2.csv"), &meta, &rows)?;
    if engines.iter().any(|e| e.variant().is_some()) {
        output::write_csv(&dir.join("fig2_populations.csv"), &meta, &populations)?;
        output::write_json(&dir.join("fig2_wigner.json"), &meta, &wigners)?;
    }
    if engines.contains(&Engine::Classical) {
        output::write_csv(&dir.join("fig2_classical_points.csv"), &meta, &points)?;
        output::write_json(&dir.join("fig2_classical_histogram.json"), &meta, &histograms)?;
    }
    Ok(sweep::failures(&rows))
}

#[derive(Serialize)]
struct TrajectoryRow {
    trajectory: usize,
    step: usize,
    x_a: f64,
    y_a: f64,
    x_b: f64,
    y_b: f64,
    x_gamma: f64,
    y_gamma: f64,
}

fn figure_five(resolved: &Resolved) -> Result<usize, CliError> {
    let mut config = jobs::set_classical(&resolved.classical, "n_b", TRAJECTORY_N_B);
    config.n_traj = TRAJECTORY_COUNT;
    config.tail = Some(TailSpec {
        last_steps: TRAJECTORY_TAIL,
        stride: 1,
    });
    config
        .validate()
        .map_err(|e| CliError::Validation(format!("classical: {e}")))?;
    let first = config.n_steps.saturating_sub(TRAJECTORY_TAIL);
    let trajectories = config
        .trajectory_seeds()
        .into_par_iter()
        .enumerate()
        .map(|(i, seed)| classical::run_trajectory(&config, i, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    for t in &trajectories {
        for (k, s) in t.tail.iter().enumerate() {
            rows.push(TrajectoryRow {
                trajectory: t.index,
                step: first + k,
                x_a: s[0],
                y_a: s[1],
                x_b: s[2],
                y_b: s[3],
                x_gamma: s[4],
                y_gamma: s[5],
            });
        }
    }
    let meta = output::metadata(
        "figure",
        resolved,
        json!({ "figure": "fig5", "trajectory_config": config }),
    );
    output::write_csv(&resolved.out_dir.join("fig5.csv"), &meta, &rows)?;
    Ok(0)
}

/// Writes the files of every requested figure; returns the number of failed
/// rows.
pub fn run(resolved: &Resolved, engines: &[Engine], id: &str) -> Result<usize, CliError> {
    let ids = parse_ids(id)?;
    let mut cache: BTreeMap<Dataset, Computed> = BTreeMap::new();
    let mut failed = 0;
    for id in ids {
        log::info!("figure {id}");
        match id {
            "fig2" => failed += figure_two(resolved, engines)?,
            "fig5" => failed += figure_five(resolved)?,
            _ => {
                let which = dataset(id).expect("known figure");
                let c = match cache.entry(which) {
                    Entry::Occupied(e) => e.into_mut(),
                    Entry::Vacant(e) => {
                        let computed = compute(which, resolved, engines)?;
                        failed += sweep::failures(&computed.rows);
                        e.insert(computed)
                    }
                };
                let mut extra = c.extra.clone();
                extra["figure"] = json!(id);
                let meta = output::metadata("figure", resolved, extra);
                output::write_csv(&resolved.out_dir.join(format!("{id}.csv")), &meta, &c.rows)?;
                if which == Dataset::Load {
                    output::write_json(&resolved.out_dir.join(format!("{id}_optimum.json")), &meta, &c.optima)?;
                }
            }
        }
    }
    Ok(failed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure_ids_resolve() {
        assert_eq!(parse_ids("all").unwrap().len(), 10);
        assert_eq!(parse_ids("fig3f").unwrap(), vec!["fig3f"]);
        assert!(matches!(parse_ids("fig6"), Err(CliError::Validation(_))));
        for id in FIGURE_IDS {
            assert!(id == "fig2" || id == "fig5" || dataset(id).is_some());
        }
    }

    #[test]
    fn n_c_grid_spans_unit_interval() {
        let g = n_c_grid();
        assert_eq!(g.len(), 11);
        assert!((g[10] - 1.0).abs() < 1e-15);
    }
}
