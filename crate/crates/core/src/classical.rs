//! Classical single-cavity engine: Euler–Maruyama ensembles of the real
//! Langevin equations in the frame rotating with mode `b`.
//!
//! Coordinates are ordered `[X_α, Y_α, X_β, Y_β, X_γ, Y_γ]` with
//! `α = (X_α + iY_α)/√2` and likewise for `β`, `γ`. Each real quadrature of
//! mode `ν` receives a Gaussian increment of variance `κ_ν N_ν dt`, so a lone
//! damped mode relaxes to `⟨X²⟩ = ⟨Y²⟩ = N_ν`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::EngineConfig;
use crate::observables::{FigureOfMerit, VACUUM_TOL};

/// Histogram lattice step used unless another is given.
pub const DEFAULT_BIN_STEP: f64 = 0.25;
/// Largest tolerated fraction of aborted trajectories.
pub const MAX_ABORTED_FRACTION: f64 = 0.01;
pub const BOOTSTRAP_RESAMPLES: usize = 200;

const SQRT_2: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassicalError {
    #[error("parameter `{name}` must be finite and non-negative, got {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("omega_c must be positive, got {0}")]
    NonPositiveOmegaC(f64),
    #[error("time step {dt} outside (0, {limit}]")]
    TimeStep { dt: f64, limit: f64 },
    #[error("ensemble needs at least one trajectory and one step")]
    EmptyRun,
    #[error("burn-in fraction must lie in [0, 1), got {0}")]
    BurnIn(f64),
    #[error("state became non-finite")]
    NonFinite,
    #[error("trajectory {trajectory} (seed {seed}) blew up at step {step}")]
    BlowUp { trajectory: usize, seed: u64, step: usize },
    #[error("{aborted} of {n_traj} trajectories aborted")]
    TooManyAborted { aborted: usize, n_traj: usize },
    #[error("ensemble has no surviving trajectories")]
    EmptyEnsemble,
    #[error("histogram step must be positive and finite, got {0}")]
    BinStep(f64),
}

/// Recording window for the last steps of each trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TailSpec {
    pub last_steps: usize,
    pub stride: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassicalConfig {
    /// `ω_a − ω_b`
    pub delta: f64,
    pub omega_c: f64,
    pub g: f64,
    pub kappa_a: f64,
    pub kappa_b: f64,
    pub kappa_c: f64,
    pub n_a: f64,
    pub n_b: f64,
    pub n_c: f64,
    pub kappa_l: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub n_traj: usize,
    pub seed: u64,
    /// Fraction of each trajectory excluded from the time averages.
    pub burn_in_fraction: f64,
    pub tail: Option<TailSpec>,
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        Self::from_engine(&EngineConfig::single_cavity())
    }
}

impl ClassicalConfig {
    pub const DESK_STEPS: usize = 1_000_000;
    pub const DESK_TRAJ: usize = 500;
    pub const FULL_STEPS: usize = 10_000_000;
    pub const FULL_TRAJ: usize = 10_000;

    /// Counterpart of a single-cavity engine, desk-scale profile.
    pub fn from_engine(engine: &EngineConfig) -> Self {
        Self {
            delta: engine.omega_a - engine.omega_b,
            omega_c: engine.omega_c,
            g: engine.g,
            kappa_a: engine.kappa_a,
            kappa_b: engine.kappa_b,
            kappa_c: engine.kappa_c,
            n_a: engine.n_a,
            n_b: engine.n_b,
            n_c: engine.n_c,
            kappa_l: engine.kappa_l,
            dt: 1e-3 / engine.omega_c,
            n_steps: Self::DESK_STEPS,
            n_traj: Self::DESK_TRAJ,
            seed: 0,
            burn_in_fraction: 0.5,
            tail: None,
        }
    }

    /// 10⁴ trajectories of 10⁷ steps. Roughly 10¹¹ steps: not desk-scale.
    pub fn full_profile(mut self) -> Self {
        self.n_steps = Self::FULL_STEPS;
        self.n_traj = Self::FULL_TRAJ;
        self
    }

    pub fn with_coupling(mut self, g: f64) -> Self {
        self.g = g;
        self
    }

    pub fn total_kappa_c(&self) -> f64 {
        self.kappa_c + self.kappa_l
    }

    /// Classical temperature of the mechanical bath, `k_B T = ħω_c N_c`,
    /// the value for which `⟨|γ|²⟩ = N_c` in equilibrium.
    pub fn temperature(&self) -> f64 {
        self.omega_c * self.n_c
    }

    pub fn validate(&self) -> Result<(), ClassicalError> {
        let non_negative = [
            ("g", self.g),
            ("kappa_a", self.kappa_a),
            ("kappa_b", self.kappa_b),
            ("kappa_c", self.kappa_c),
            ("n_a", self.n_a),
            ("n_b", self.n_b),
            ("n_c", self.n_c),
            ("kappa_l", self.kappa_l),
        ];
        for (name, value) in non_negative {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ClassicalError::InvalidParameter { name, value });
            }
        }
        if !self.delta.is_finite() {
            return Err(ClassicalError::InvalidParameter {
                name: "delta",
                value: self.delta,
            });
        }
        if !(self.omega_c.is_finite() && self.omega_c > 0.0) {
            return Err(ClassicalError::NonPositiveOmegaC(self.omega_c));
        }
        let limit = 1e-2 / self.omega_c;
        if !(self.dt > 0.0 && self.dt <= limit) {
            return Err(ClassicalError::TimeStep { dt: self.dt, limit });
        }
        if self.n_traj == 0 || self.n_steps == 0 {
            return Err(ClassicalError::EmptyRun);
        }
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return Err(ClassicalError::BurnIn(self.burn_in_fraction));
        }
        Ok(())
    }

    /// Standard deviation of the increment of each real quadrature.
    pub fn noise_std(&self) -> [f64; 6] {
        let a = (self.kappa_a * self.n_a * self.dt).sqrt();
        let b = (self.kappa_b * self.n_b * self.dt).sqrt();
        let c = (self.total_kappa_c() * self.n_c * self.dt).sqrt();
        [a, a, b, b, c, c]
    }

    /// Per-trajectory seeds drawn from the master seed.
    pub fn trajectory_seeds(&self) -> Vec<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.n_traj).map(|_| rng.random()).collect()
    }
}

/// Drift of the six real equations.
fn drift(s: &[f64; 6], c: &ClassicalConfig) -> [f64; 6] {
    let [xa, ya, xb, yb, xg, yg] = *s;
    let (sx, sy) = (xa + xb, ya + yb);
    let kc = c.total_kappa_c();
    let push = c.g * SQRT_2 * xg;
    [
        c.delta * ya - push * sy - 0.5 * c.kappa_a * xa,
        -c.delta * xa + push * sx - 0.5 * c.kappa_a * ya,
        -push * sy - 0.5 * c.kappa_b * xb,
        push * sx - 0.5 * c.kappa_b * yb,
        c.omega_c * yg - 0.5 * kc * xg,
        -c.omega_c * xg + c.g / SQRT_2 * (sx * sx + sy * sy) - 0.5 * kc * yg,
    ]
}

/// One Euler–Maruyama step with the given noise increments.
pub fn step(state: &[f64; 6], config: &ClassicalConfig, noise: &[f64; 6]) -> Result<[f64; 6], ClassicalError> {
    let f = drift(state, config);
    let mut next = [0.0; 6];
    for k in 0..6 {
        next[k] = state[k] + f[k] * config.dt + noise[k];
    }
    if next.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(ClassicalError::NonFinite)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub index: usize,
    pub seed: u64,
    pub final_point: [f64; 6],
    /// Post-burn-in time averages of `|γ|²` and `|γ|⁴`.
    pub time_average: [f64; 2],
    pub tail: Vec<[f64; 6]>,
}

/// Integrates one trajectory from the origin.
pub fn run_trajectory(config: &ClassicalConfig, index: usize, seed: u64) -> Result<Trajectory, ClassicalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = config.noise_std();
    let burn = (config.burn_in_fraction * config.n_steps as f64) as usize;
    let tail_start = config
        .tail
        .map(|t| config.n_steps.saturating_sub(t.last_steps))
        .unwrap_or(usize::MAX);
    let stride = config.tail.map(|t| t.stride.max(1)).unwrap_or(1);
    let mut s = [0.0; 6];
    let mut noise = [0.0; 6];
    let mut sums = [0.0; 2];
    let mut tail = Vec::new();
    for n in 0..config.n_steps {
        for k in 0..6 {
            noise[k] = if sd[k] > 0.0 {
                sd[k] * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
        }
        s = step(&s, config, &noise).map_err(|_| ClassicalError::BlowUp {
            trajectory: index,
            seed,
            step: n,
        })?;
        if n >= burn {
            let m = 0.5 * (s[4] * s[4] + s[5] * s[5]);
            sums[0] += m;
            sums[1] += m * m;
        }
        if n >= tail_start && (n - tail_start).is_multiple_of(stride) {
            tail.push(s);
        }
    }
    let counted = (config.n_steps - burn) as f64;
    Ok(Trajectory {
        index,
        seed,
        final_point: s,
        time_average: [sums[0] / counted, sums[1] / counted],
        tail,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbortReport {
    pub trajectory: usize,
    pub seed: u64,
    pub step: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub dt: f64,
    pub n_steps: usize,
    pub n_traj: usize,
    pub aborted: usize,
}

/// Surviving trajectories in index order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalEnsemble {
    pub trajectories: Vec<Trajectory>,
    pub aborted: Vec<AbortReport>,
    pub metadata: RunMetadata,
}

impl ClassicalEnsemble {
    /// Ensemble built from given final points, for analysis only.
    pub fn from_points(points: Vec<[f64; 6]>) -> Self {
        let n = points.len();
        let trajectories = points
            .into_iter()
            .enumerate()
            .map(|(index, p)| Trajectory {
                index,
                seed: 0,
                final_point: p,
                time_average: [f64::NAN; 2],
                tail: Vec::new(),
            })
            .collect();
        Self {
            trajectories,
            aborted: Vec::new(),
            metadata: RunMetadata {
                seed: 0,
                dt: 0.0,
                n_steps: 0,
                n_traj: n,
                aborted: 0,
            },
        }
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn final_points(&self) -> impl Iterator<Item = &[f64; 6]> {
        self.trajectories.iter().map(|t| &t.final_point)
    }

    /// `(X_γ, Y_γ)` of every final point.
    pub fn mechanical_points(&self) -> Vec<[f64; 2]> {
        self.final_points().map(|p| [p[4], p[5]]).collect()
    }

    /// Sample mean and unbiased variance of one coordinate.
    pub fn coordinate_moments(&self, k: usize) -> (f64, f64) {
        let n = self.len() as f64;
        let mean = self.final_points().map(|p| p[k]).sum::<f64>() / n;
        let var = self.final_points().map(|p| (p[k] - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        (mean, var)
    }
}

pub fn run_ensemble(config: &ClassicalConfig) -> Result<ClassicalEnsemble, ClassicalError> {
    config.validate()?;
    let seeds = config.trajectory_seeds();
    let results: Vec<Result<Trajectory, ClassicalError>> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &seed)| run_trajectory(config, i, seed))
        .collect();
    let mut trajectories = Vec::with_capacity(results.len());
    let mut aborted = Vec::new();
    for r in results {
        match r {
            Ok(t) => trajectories.push(t),
            Err(ClassicalError::BlowUp { trajectory, seed, step }) => {
                log::warn!("trajectory {trajectory} (seed {seed}) blew up at step {step}");
                aborted.push(AbortReport { trajectory, seed, step });
            }
            Err(e) => return Err(e),
        }
    }
    if aborted.len() as f64 > MAX_ABORTED_FRACTION * config.n_traj as f64 {
        return Err(ClassicalError::TooManyAborted {
            aborted: aborted.len(),
            n_traj: config.n_traj,
        });
    }
    Ok(ClassicalEnsemble {
        trajectories,
        metadata: RunMetadata {
            seed: config.seed,
            dt: config.dt,
            n_steps: config.n_steps,
            n_traj: config.n_traj,
            aborted: aborted.len(),
        },
        aborted,
    })
}

/// Counts of points on the square lattice `[iΔ, (i+1)Δ) × [jΔ, (j+1)Δ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseHistogram {
    pub step: f64,
    pub total: usize,
    pub cells: Vec<HistogramCell>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramCell {
    pub i: i64,
    pub j: i64,
    pub count: usize,
}

impl PhaseHistogram {
    pub fn new(points: &[[f64; 2]], step: f64) -> Result<Self, ClassicalError> {
        if !(step.is_finite() && step > 0.0) {
            return Err(ClassicalError::BinStep(step));
        }
        let mut counts: BTreeMap<(i64, i64), usize> = BTreeMap::new();
        for p in points {
            let key = ((p[0] / step).floor() as i64, (p[1] / step).floor() as i64);
            *counts.entry(key).or_default() += 1;
        }
        Ok(Self {
            step,
            total: points.len(),
            cells: counts
                .into_iter()
                .map(|((i, j), count)| HistogramCell { i, j, count })
                .collect(),
        })
    }

    /// Shannon entropy `−Σ p ln p` of the cell frequencies.
    pub fn entropy(&self) -> f64 {
        let n = self.total as f64;
        -self
            .cells
            .iter()
            .map(|c| {
                let p = c.count as f64 / n;
                p * p.ln()
            })
            .sum::<f64>()
    }
}

/// `(mean, std)` of `√(X_γ² + Y_γ²)` over final points.
pub fn ring_statistics(ensemble: &ClassicalEnsemble) -> (f64, f64) {
    let r: Vec<f64> = ensemble
        .final_points()
        .map(|p| p[4].hypot(p[5]))
        .collect();
    let n = r.len() as f64;
    let mean = r.iter().sum::<f64>() / n;
    let var = r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// `|γ|² = (X_γ² + Y_γ²)/2` per final point.
fn intensities(points: &[[f64; 2]]) -> Vec<f64> {
    points.iter().map(|p| 0.5 * (p[0] * p[0] + p[1] * p[1])).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// `⟨|γ|⁴⟩ / ⟨|γ|²⟩²`, `None` when the mode sits at the origin.
pub fn classical_g2(points: &[[f64; 2]]) -> Option<f64> {
    let i = intensities(points);
    let m1 = mean(&i);
    if m1 <= VACUUM_TOL {
        return None;
    }
    let m2 = i.iter().map(|x| x * x).sum::<f64>() / i.len() as f64;
    Some(m2 / (m1 * m1))
}

/// `F − F_G = (E − E_G) − k_B T (H − H_G)` from two point clouds binned
/// with the same step.
pub fn histogram_free_energy(points: &[[f64; 2]], reference: &[[f64; 2]], config: &ClassicalConfig, step: f64) -> Result<f64, ClassicalError> {
    let w = config.omega_c;
    let e = w * mean(&intensities(points));
    let e_g = w * mean(&intensities(reference));
    let t = config.temperature();
    if t == 0.0 {
        if !(step.is_finite() && step > 0.0) {
            return Err(ClassicalError::BinStep(step));
        }
        return Ok(e - e_g);
    }
    let h = PhaseHistogram::new(points, step)?.entropy();
    let h_g = PhaseHistogram::new(reference, step)?.entropy();
    Ok((e - e_g) - t * (h - h_g))
}

/// Bootstrap standard error of [`histogram_free_energy`], resampling both
/// clouds with a fixed seed.
pub fn free_energy_std_error(points: &[[f64; 2]], reference: &[[f64; 2]], config: &ClassicalConfig, step: f64, seed: u64) -> Result<f64, ClassicalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let p: Vec<[f64; 2]> = (0..points.len())
            .map(|_| points[rng.random_range(0..points.len())])
            .collect();
        let r: Vec<[f64; 2]> = (0..reference.len())
            .map(|_| reference[rng.random_range(0..reference.len())])
            .collect();
        draws.push(histogram_free_energy(&p, &r, config, step)?);
    }
    let m = mean(&draws);
    let var = draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
    Ok(var.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalFigures {
    pub figures: FigureOfMerit,
    pub delta_f_std_error: f64,
    pub bin_step: f64,
    pub ring_mean: f64,
    pub ring_std: f64,
}

/// Figures of merit from ensemble-final points. `reference` is the matching
/// `g = 0` ensemble against which the free energy is measured.
pub fn classical_figures(ensemble: &ClassicalEnsemble, reference: &ClassicalEnsemble, config: &ClassicalConfig, bin_step: f64) -> Result<ClassicalFigures, ClassicalError> {
    if ensemble.is_empty() || reference.is_empty() {
        return Err(ClassicalError::EmptyEnsemble);
    }
    let points = ensemble.mechanical_points();
    let ref_points = reference.mechanical_points();
    let n = mean(&intensities(&points));
    let w = config.omega_c;
    let delta_f = histogram_free_energy(&points, &ref_points, config, bin_step)?;
    let delta_f_std_error = free_energy_std_error(&points, &ref_points, config, bin_step, config.seed ^ 0x5eed)?;
    let (ring_mean, ring_std) = ring_statistics(ensemble);
    Ok(ClassicalFigures {
        figures: FigureOfMerit {
            g2: classical_g2(&points),
            power: w * config.kappa_c * (n - config.n_c),
            power_under_load: Some(w * config.kappa_l * (n - config.n_c)),
            delta_f,
            entropy: PhaseHistogram::new(&points, bin_step)?.entropy(),
            mean_phonons: n,
        },
        delta_f_std_error,
        bin_step,
        ring_mean,
        ring_std,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(n_steps: usize, n_traj: usize) -> ClassicalConfig {
        ClassicalConfig {
            n_steps,
            n_traj,
            seed: 7,
            ..ClassicalConfig::default()
        }
    }

    #[test]
    fn pure_damping_factor() {
        let mut c = short(1, 1);
        c.g = 0.0;
        c.delta = 0.0;
        c.dt = 1e-3;
        c.omega_c = 1.0;
        let s = [1.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        let next = step(&s, &c, &[0.0; 6]).unwrap();
        assert!((next[0] - (1.0 - c.kappa_a * c.dt / 2.0)).abs() < 1e-16);
        assert!((next[2] - (1.0 - c.kappa_b * c.dt / 2.0)).abs() < 1e-16);
    }

    #[test]
    fn origin_is_fixed_without_noise() {
        let c = short(1, 1).with_coupling(0.3);
        assert_eq!(step(&[0.0; 6], &c, &[0.0; 6]).unwrap(), [0.0; 6]);
    }

    #[test]
    fn blowup_is_reported() {
        let c = short(1, 1);
        let s = [f64::MAX, 0.0, f64::MAX, 0.0, f64::MAX, 0.0];
        assert_eq!(step(&s, &c, &[0.0; 6]), Err(ClassicalError::NonFinite));
    }

    #[test]
    fn validation() {
        let mut c = short(10, 1);
        c.dt = 0.1;
        assert!(matches!(c.validate(), Err(ClassicalError::TimeStep { .. })));
        c.dt = 1e-3;
        c.n_traj = 0;
        assert_eq!(c.validate(), Err(ClassicalError::EmptyRun));
        c.n_traj = 1;
        c.kappa_b = -1.0;
        assert!(matches!(c.validate(), Err(ClassicalError::InvalidParameter { name: "kappa_b", .. })));
    }

    #[test]
    fn same_seed_same_ensemble() {
        let mut c = short(2000, 8);
        c.n_b = 0.5;
        let a = run_ensemble(&c).unwrap();
        let b = run_ensemble(&c).unwrap();
        assert_eq!(a, b);
        c.seed += 1;
        assert_ne!(a, run_ensemble(&c).unwrap());
    }

    #[test]
    fn trajectory_reproducible_from_recorded_seed() {
        let mut c = short(500, 4);
        c.n_b = 0.5;
        let e = run_ensemble(&c).unwrap();
        let t = &e.trajectories[2];
        assert_eq!(run_trajectory(&c, 2, t.seed).unwrap(), *t);
    }

    #[test]
    fn tails_are_thinned() {
        let mut c = short(1000, 1);
        c.n_b = 0.5;
        c.tail = Some(TailSpec { last_steps: 100, stride: 10 });
        let e = run_ensemble(&c).unwrap();
        assert_eq!(e.trajectories[0].tail.len(), 10);
        assert_eq!(*e.trajectories[0].tail.last().unwrap(), {
            let mut c2 = c.clone();
            c2.n_steps = 991;
            c2.tail = None;
            run_trajectory(&c2, 0, e.trajectories[0].seed).unwrap().final_point
        });
    }

    #[test]
    fn ring_has_unit_g2() {
        let points: Vec<[f64; 2]> = (0..360)
            .map(|k| {
                let t = (k as f64).to_radians();
                [3.0 * t.cos(), 3.0 * t.sin()]
            })
            .collect();
        assert!((classical_g2(&points).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(classical_g2(&[[0.0, 0.0]]), None);
    }

    #[test]
    fn histogram_entropy_of_uniform_cells() {
        let points = [[0.1, 0.1], [0.3, 0.1], [-0.1, 0.1], [0.1, -0.1]];
        let h = PhaseHistogram::new(&points, 0.25).unwrap();
        assert_eq!(h.cells.len(), 4);
        assert!((h.entropy() - 4f64.ln()).abs() < 1e-15);
        assert!(PhaseHistogram::new(&points, 0.0).is_err());
    }

    #[test]
    fn identical_clouds_have_zero_free_energy() {
        let mut c = short(1, 1);
        c.n_c = 0.3;
        let points: Vec<[f64; 2]> = (0..100).map(|k| [(k as f64).sin(), (k as f64 * 0.7).cos()]).collect();
        assert_eq!(histogram_free_energy(&points, &points, &c, 0.25).unwrap(), 0.0);
    }
}
