//! Figures of merit of a stationary state.
//!
//! Everything here depends on the mechanical mode `c` only. The "ħω" of the
//! power formulas is the mechanical quantum `ħω_c`, so powers come out in
//! units of `ħω_c` per unit time and free energies in units of `ħω_c`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fock::MODE_C;
use crate::model::{bath_temperature, liouvillian, EngineConfig, ModelError};
use crate::steady::{solve_steady_state_with, DensityMatrix, SolveOptions, SolverError, SteadyState};

/// Agreement required between the two power evaluations.
pub const POWER_ROUTE_TOL: f64 = 1e-10;
/// `g₂` is undefined below this mean occupation.
pub const VACUUM_TOL: f64 = 1e-12;

const GOLDEN_TOL: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservableError {
    #[error("g2 is undefined for a state with mean occupation {mean:.3e}")]
    UndefinedG2 { mean: f64 },
    #[error("mode index {mode} out of range for a {n_modes}-mode space")]
    InvalidMode { mode: usize, n_modes: usize },
    #[error("power routes disagree: dissipator trace {via_dissipator:.15e} vs closed form {closed_form:.15e}")]
    RouteDisagreement { via_dissipator: f64, closed_form: f64 },
    #[error("load damping must be finite and non-negative, got {0}")]
    InvalidLoad(f64),
    #[error("load grid is empty")]
    EmptyGrid,
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Reduced state of a single mode.
#[derive(Clone, Debug, PartialEq)]
pub struct MechanicalMarginal {
    matrix: DMatrix<Complex64>,
    eigenvalues: Vec<f64>,
    populations: Vec<f64>,
    clamped_mass: f64,
}

impl MechanicalMarginal {
    pub fn from_matrix(matrix: DMatrix<Complex64>) -> Self {
        assert!(matrix.is_square(), "marginal must be square");
        let herm = (&matrix + matrix.adjoint()).scale(0.5);
        let raw = SymmetricEigen::new(herm.clone()).eigenvalues;
        let clamped_mass = raw.iter().filter(|&&l| l < 0.0).map(|l| -l).sum();
        let mut eigenvalues: Vec<f64> = raw.iter().map(|&l| l.max(0.0)).collect();
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        let populations = (0..herm.nrows()).map(|k| herm[(k, k)].re).collect();
        Self {
            matrix: herm,
            eigenvalues,
            populations,
            clamped_mass,
        }
    }

    /// Diagonal state with the given number distribution.
    pub fn from_populations(populations: &[f64]) -> Self {
        let diag: Vec<Complex64> = populations.iter().map(|&p| Complex64::new(p, 0.0)).collect();
        Self::from_matrix(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// Eigenvalues with negatives clamped to zero, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Fock-basis number distribution `p(n)`.
    pub fn populations(&self) -> &[f64] {
        &self.populations
    }

    /// Total weight of negative eigenvalues removed by clamping.
    pub fn clamped_mass(&self) -> f64 {
        self.clamped_mass
    }

    pub fn mean_number(&self) -> f64 {
        self.populations
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }

    /// `e^{−iθ c†c} ρ e^{iθ c†c}`
    pub fn rotated(&self, theta: f64) -> Self {
        let d = self.dim();
        let m = DMatrix::from_fn(d, d, |j, k| {
            self.matrix[(j, k)] * Complex64::from_polar(1.0, -theta * (j as f64 - k as f64))
        });
        Self::from_matrix(m)
    }
}

/// Thermal number distribution with mean `n_mean`, truncated to `dim` levels
/// and renormalized. This is the exact stationary distribution of a thermal
/// dissipator on a truncated mode.
pub fn thermal_populations(n_mean: f64, dim: usize) -> Vec<f64> {
    if n_mean <= 0.0 {
        let mut p = vec![0.0; dim];
        p[0] = 1.0;
        return p;
    }
    let q = n_mean / (n_mean + 1.0);
    let raw: Vec<f64> = (0..dim).map(|k| q.powi(k as i32)).collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|p| p / z).collect()
}

/// Reduced density matrix of mode `keep`.
pub fn partial_trace(rho: &DensityMatrix, keep: usize) -> Result<MechanicalMarginal, ObservableError> {
    let space = rho.space();
    if keep >= space.n_modes() {
        return Err(ObservableError::InvalidMode {
            mode: keep,
            n_modes: space.n_modes(),
        });
    }
    let d = space.dim(keep);
    let after = space.stride(keep);
    let before = space.total_dim() / (d * after);
    let m = rho.matrix();
    let mut out = DMatrix::zeros(d, d);
    for j in 0..d {
        for k in 0..d {
            let mut acc = Complex64::new(0.0, 0.0);
            for b in 0..before {
                for a in 0..after {
                    let base = b * d * after + a;
                    acc += m[(base + j * after, base + k * after)];
                }
            }
            out[(j, k)] = acc;
        }
    }
    Ok(MechanicalMarginal::from_matrix(out))
}

/// `g₂ = ⟨c†c†cc⟩ / ⟨c†c⟩²`
pub fn g2(marginal: &MechanicalMarginal) -> Result<f64, ObservableError> {
    let mean = marginal.mean_number();
    if mean <= VACUUM_TOL {
        return Err(ObservableError::UndefinedG2 { mean });
    }
    let pairs: f64 = marginal
        .populations()
        .iter()
        .enumerate()
        .map(|(n, p)| (n * n.saturating_sub(1)) as f64 * p)
        .sum();
    Ok(pairs / (mean * mean))
}

/// `−Σ λ ln λ` in nats over the clamped eigenvalues.
pub fn von_neumann_entropy(marginal: &MechanicalMarginal) -> f64 {
    -marginal
        .eigenvalues()
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| l * l.ln())
        .sum::<f64>()
}

/// `ΔF = F(ρ_c) − F(ρ^G)` for the local Hamiltonian `ħω_c c†c` at the
/// temperature of the mechanical bath. At `N_c = 0` this is the mean energy.
pub fn free_energy_difference(config: &EngineConfig, marginal: &MechanicalMarginal) -> f64 {
    let omega = config.omega_c;
    let energy = omega * marginal.mean_number();
    let t = bath_temperature(omega, config.n_c);
    if t == 0.0 {
        return energy;
    }
    let free = energy - t * von_neumann_entropy(marginal);
    // F(ρ^G) = k_B T ln(1 − e^{−ħω/k_B T})
    let gibbs = t * (-(-omega / t).exp_m1()).ln();
    free - gibbs
}

/// Both evaluations of the dissipated power.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerRoutes {
    /// `−Tr{ħω_c c†c [κ(N_c+1)D_c(ρ) + κN_c D_{c†}(ρ)]}`
    pub via_dissipator: f64,
    /// `ħω_c κ (⟨c†c⟩ − N_c)`
    pub closed_form: f64,
    pub truncation_leak: f64,
}

impl PowerRoutes {
    pub fn disagreement(&self) -> f64 {
        (self.via_dissipator - self.closed_form).abs()
    }
}

/// `(Tr[c†c D_c(ρ)], Tr[c†c D_{c†}(ρ)])` for a single-mode state embedded in
/// `dim` levels.
fn number_fluxes(rho: &DMatrix<Complex64>, dim: usize) -> (f64, f64) {
    let d0 = rho.nrows();
    let mut r = DMatrix::zeros(dim, dim);
    r.view_mut((0, 0), (d0, d0)).copy_from(rho);
    let c = DMatrix::from_fn(dim, dim, |j, k| {
        if k == j + 1 {
            Complex64::new((k as f64).sqrt(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let n = DMatrix::from_fn(dim, dim, |j, k| {
        if j == k {
            Complex64::new(j as f64, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    // D_x(ρ) = xρx† − ½(x†xρ + ρx†x)
    let flux = |x: &DMatrix<Complex64>| {
        let xd = x.adjoint();
        let xdx = &xd * x;
        let d = x * &r * &xd - (&xdx * &r + &r * &xdx).scale(0.5);
        (&n * d).trace().re
    };
    (flux(&c), flux(&c.adjoint()))
}

/// Both evaluations of the power into a thermal channel of rate `rate` at
/// the mechanical bath occupation.
///
/// The dissipator route applies `D_c` and `D_{c†}` to the mechanical marginal
/// embedded one level above the truncation, where the image of the
/// dissipators is represented exactly. `truncation_leak` is the difference to
/// the same evaluation inside the truncated space, `ħω_c κ N_c d p(d−1)`; it
/// measures how much weight the truncation cuts off.
pub fn power_routes(config: &EngineConfig, rho: &DensityMatrix, rate: f64) -> PowerRoutes {
    let marginal = partial_trace(rho, MODE_C).expect("mode c exists");
    power_routes_from_marginal(config, &marginal, rate)
}

pub fn power_routes_from_marginal(config: &EngineConfig, marginal: &MechanicalMarginal, rate: f64) -> PowerRoutes {
    let n_c = config.n_c;
    let scale = -config.omega_c * rate;
    let d = marginal.dim();
    let (emission, absorption) = number_fluxes(marginal.matrix(), d + 1);
    let (emission_in, absorption_in) = number_fluxes(marginal.matrix(), d);
    let via_dissipator = scale * ((n_c + 1.0) * emission + n_c * absorption);
    let in_space = scale * ((n_c + 1.0) * emission_in + n_c * absorption_in);
    PowerRoutes {
        via_dissipator,
        closed_form: config.omega_c * rate * (marginal.mean_number() - n_c),
        truncation_leak: in_space - via_dissipator,
    }
}

fn checked_power(config: &EngineConfig, rho: &DensityMatrix, rate: f64) -> Result<f64, ObservableError> {
    let routes = power_routes(config, rho, rate);
    if routes.disagreement() > POWER_ROUTE_TOL {
        return Err(ObservableError::RouteDisagreement {
            via_dissipator: routes.via_dissipator,
            closed_form: routes.closed_form,
        });
    }
    Ok(routes.closed_form)
}

/// Net power dissipated by the mechanical mode into its own bath.
pub fn dissipated_power(config: &EngineConfig, rho: &DensityMatrix) -> Result<f64, ObservableError> {
    checked_power(config, rho, config.kappa_c)
}

/// All figures of merit of one stationary state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FigureOfMerit {
    /// `None` when the mode is in its vacuum.
    pub g2: Option<f64>,
    pub power: f64,
    /// Power through the load channel; zero without a load.
    pub power_under_load: Option<f64>,
    pub delta_f: f64,
    pub entropy: f64,
    pub mean_phonons: f64,
}

pub fn figures_of_merit(config: &EngineConfig, rho: &DensityMatrix) -> Result<FigureOfMerit, ObservableError> {
    let marginal = partial_trace(rho, MODE_C)?;
    let power = dissipated_power(config, rho)?;
    let power_under_load = if config.kappa_l > 0.0 {
        checked_power(config, rho, config.kappa_l)?
    } else {
        0.0
    };
    Ok(FigureOfMerit {
        g2: g2(&marginal).ok(),
        power,
        power_under_load: Some(power_under_load),
        delta_f: free_energy_difference(config, &marginal),
        entropy: von_neumann_entropy(&marginal),
        mean_phonons: marginal.mean_number(),
    })
}

/// A solved engine with its mechanical marginal and figures of merit.
#[derive(Clone, Debug)]
pub struct EvaluatedEngine {
    pub steady: SteadyState,
    pub marginal: MechanicalMarginal,
    pub figures: FigureOfMerit,
}

pub fn evaluate_engine(config: &EngineConfig, options: &SolveOptions) -> Result<EvaluatedEngine, ObservableError> {
    config.validate()?;
    let l = liouvillian(config)?;
    let steady = solve_steady_state_with(&l, options)?;
    let marginal = partial_trace(&steady.rho, MODE_C)?;
    let figures = figures_of_merit(config, &steady.rho)?;
    Ok(EvaluatedEngine {
        steady,
        marginal,
        figures,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadPoint {
    pub kappa_l: f64,
    pub power_under_load: f64,
    pub mean_phonons: f64,
    pub g2: Option<f64>,
}

/// Power `ħω_c κ_L (⟨c†c⟩ − N_c)` drawn by a load of damping `κ_L`, with the
/// state solved at total friction `κ_c + κ_L`.
pub fn power_under_load(config: &EngineConfig, kappa_l: f64, options: &SolveOptions) -> Result<LoadPoint, ObservableError> {
    if !(kappa_l.is_finite() && kappa_l >= 0.0) {
        return Err(ObservableError::InvalidLoad(kappa_l));
    }
    let loaded = config.with_load(kappa_l);
    let eval = evaluate_engine(&loaded, options)?;
    Ok(LoadPoint {
        kappa_l,
        power_under_load: eval.figures.power_under_load.unwrap_or(0.0),
        mean_phonons: eval.figures.mean_phonons,
        g2: eval.figures.g2,
    })
}

/// `n` log-spaced values spanning `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                .collect()
        }
    }
}

/// 30 points over `[10⁻² κ_c, 10³ κ_c]`.
pub fn default_load_grid(kappa_c: f64) -> Vec<f64> {
    log_grid(1e-2 * kappa_c, 1e3 * kappa_c, 30)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimalLoad {
    pub kappa_l_star: f64,
    pub power_star: f64,
    /// Grid evaluations in grid order.
    pub curve: Vec<LoadPoint>,
    /// The grid maximum sits on an end point; the grid is too narrow.
    pub on_boundary: bool,
}

/// Maximum power under load over a grid, refined by golden-section search
/// in `ln κ_L` between the neighbours of the grid argmax.
pub fn optimal_load(config: &EngineConfig, grid: &[f64], options: &SolveOptions) -> Result<OptimalLoad, ObservableError> {
    if grid.is_empty() {
        return Err(ObservableError::EmptyGrid);
    }
    let curve: Vec<LoadPoint> = grid
        .par_iter()
        .map(|&k| power_under_load(config, k, options))
        .collect::<Result<_, _>>()?;
    let (best, _) = curve
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, p)| {
            if p.power_under_load > bv {
                (i, p.power_under_load)
            } else {
                (bi, bv)
            }
        });
    let on_boundary = grid.len() > 1 && (best == 0 || best == grid.len() - 1);
    if on_boundary {
        log::warn!(
            "power under load peaks at the grid boundary (kappa_L = {:.3e}); widen the grid",
            grid[best]
        );
    }
    let mut star = (curve[best].kappa_l, curve[best].power_under_load);
    if !on_boundary && grid.len() > 2 && grid[best - 1] > 0.0 {
        let refined = golden_section_max(grid[best - 1].ln(), grid[best + 1].ln(), |u| {
            power_under_load(config, u.exp(), options).map(|p| p.power_under_load)
        })?;
        if refined.1 > star.1 {
            star = (refined.0.exp(), refined.1);
        }
    }
    Ok(OptimalLoad {
        kappa_l_star: star.0,
        power_star: star.1,
        curve,
        on_boundary,
    })
}

fn golden_section_max<F>(mut lo: f64, mut hi: f64, mut f: F) -> Result<(f64, f64), ObservableError>
where
    F: FnMut(f64) -> Result<f64, ObservableError>,
{
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > GOLDEN_TOL {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
}

/// Square phase-space grid in the quadratures `x = √2 Re α`, `p = √2 Im α`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub resolution: usize,
}

impl Default for WignerGrid {
    fn default() -> Self {
        Self {
            x_min: -6.0,
            x_max: 6.0,
            p_min: -6.0,
            p_max: 6.0,
            resolution: 121,
        }
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![(lo + hi) / 2.0];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Wigner function sampled on a grid, `values[ip][ix]`, normalized so that
/// `∫ W dx dp = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerMap {
    pub xs: Vec<f64>,
    pub ps: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl WignerMap {
    /// Riemann sum of `W dx dp`.
    pub fn integral(&self) -> f64 {
        let dx = if self.xs.len() > 1 { self.xs[1] - self.xs[0] } else { 0.0 };
        let dp = if self.ps.len() > 1 { self.ps[1] - self.ps[0] } else { 0.0 };
        self.values.iter().flatten().sum::<f64>() * dx * dp
    }

    pub fn at(&self, ix: usize, ip: usize) -> f64 {
        self.values[ip][ix]
    }
}

/// Fock matrix elements `⟨m|D(β)|n⟩` for `m, n < dim`.
///
/// Column 0 is the coherent state; the rest follows from
/// `c† D = D (c† + β*)`, which only references lower rows.
pub fn displacement_elements(beta: Complex64, dim: usize) -> DMatrix<Complex64> {
    let mut d = DMatrix::zeros(dim, dim);
    d[(0, 0)] = Complex64::new((-0.5 * beta.norm_sqr()).exp(), 0.0);
    for m in 1..dim {
        d[(m, 0)] = d[(m - 1, 0)] * beta / (m as f64).sqrt();
    }
    for n in 0..dim.saturating_sub(1) {
        let scale = 1.0 / ((n + 1) as f64).sqrt();
        for m in 0..dim {
            let up = if m > 0 { d[(m - 1, n)] * (m as f64).sqrt() } else { Complex64::new(0.0, 0.0) };
            d[(m, n + 1)] = (up - beta.conj() * d[(m, n)]) * scale;
        }
    }
    d
}

/// Wigner function by displaced parity,
/// `W(x, p) = (1/π) Tr[ρ D(α) Π D(−α)] = (1/π) Tr[ρ D(2α) Π]`
/// with `α = (x + ip)/√2`.
pub fn wigner(marginal: &MechanicalMarginal, grid: &WignerGrid) -> WignerMap {
    let xs = linspace(grid.x_min, grid.x_max, grid.resolution);
    let ps = linspace(grid.p_min, grid.p_max, grid.resolution);
    let dim = marginal.dim();
    let rho = marginal.matrix();
    let values = ps
        .par_iter()
        .map(|&p| {
            xs.iter()
                .map(|&x| {
                    let two_alpha = Complex64::new(x, p) * std::f64::consts::SQRT_2;
                    let d = displacement_elements(two_alpha, dim);
                    let mut acc = Complex64::new(0.0, 0.0);
                    for m in 0..dim {
                        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                        for n in 0..dim {
                            acc += rho[(m, n)] * d[(n, m)] * sign;
                        }
                    }
                    acc.re / std::f64::consts::PI
                })
                .collect()
        })
        .collect();
    WignerMap { xs, ps, values }
}
