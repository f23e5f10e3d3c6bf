//! Hamiltonians and Liouvillians of the single-cavity and cascade engines.
//!
//! Units are `ħ = k_B = ω_c = 1` throughout. The quantum models are built in
//! the laboratory frame exactly as written, without a rotating-wave
//! approximation.
//!
//! Density matrices are vectorized by column stacking,
//! `vec(ρ)[i + j·n] = ρ_ij`, so that
//!
//! ```text
//! vec(A ρ B) = (Bᵀ ⊗ A) vec(ρ)
//! ```
//!
//! Left multiplication by `A` is `I ⊗ A`, right multiplication by `B` is
//! `Bᵀ ⊗ I`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fock::{AlgebraError, ModeOperator, TruncatedSpace, DEFAULT_DIMS, MODE_A, MODE_B, MODE_C};
use crate::sparse::CsrMatrix;

const RESONANCE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{name} must be finite and non-negative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("{name} must be finite, got {value}")]
    NotFinite { name: &'static str, value: f64 },
    #[error("omega_c must be positive, got {0}")]
    NonPositiveOmegaC(f64),
    #[error("resonance condition violated: omega_b - omega_a = {detuning} but omega_c = {omega_c}")]
    OffResonance { detuning: f64, omega_c: f64 },
    #[error("operation needs a {expected:?} engine, config is {found:?}")]
    WrongVariant {
        expected: EngineVariant,
        found: EngineVariant,
    },
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineVariant {
    SingleCavity,
    Cascade,
}

impl EngineVariant {
    pub fn name(self) -> &'static str {
        match self {
            EngineVariant::SingleCavity => "single_cavity",
            EngineVariant::Cascade => "cascade",
        }
    }
}

/// Physical parameters of one quantum engine.
///
/// Only `omega_b - omega_a` enters the steady state: the total photon number
/// `a†a + b†b` is conserved by the Hamiltonian and every dissipator is
/// phase covariant, so the default places mode `a` at zero frequency.
/// `kappa_b` is unused by the cascade engine, whose mode `b` is damped
/// through `gamma_1` alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub variant: EngineVariant,
    pub omega_a: f64,
    pub omega_b: f64,
    pub omega_c: f64,
    pub g: f64,
    pub kappa_a: f64,
    pub kappa_b: f64,
    pub kappa_c: f64,
    pub n_a: f64,
    pub n_b: f64,
    pub n_c: f64,
    /// Cascade feeding rates; `None` means `kappa_a`.
    pub gamma_1: Option<f64>,
    pub gamma_2: Option<f64>,
    /// Load damping, added to `kappa_c` in the Liouvillian.
    pub kappa_l: f64,
    pub dims: [usize; 3],
    pub enforce_resonance: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self::single_cavity()
    }
}

impl EngineConfig {
    /// Single-cavity parameters of the phonon-distribution figure
    /// (`N_b` left at zero).
    pub fn single_cavity() -> Self {
        Self {
            variant: EngineVariant::SingleCavity,
            omega_a: 0.0,
            omega_b: 1.0,
            omega_c: 1.0,
            g: 0.06,
            kappa_a: 0.2,
            kappa_b: 0.2,
            kappa_c: 0.005,
            n_a: 0.0,
            n_b: 0.0,
            n_c: 0.0,
            gamma_1: None,
            gamma_2: None,
            kappa_l: 0.0,
            dims: DEFAULT_DIMS,
            enforce_resonance: true,
        }
    }

    /// Cascade parameters of the same figure: `κ_a = γ₁ = γ₂ = 0.15`.
    pub fn cascade() -> Self {
        Self {
            variant: EngineVariant::Cascade,
            g: 0.1,
            kappa_a: 0.15,
            kappa_b: 0.15,
            kappa_c: 0.003,
            ..Self::single_cavity()
        }
    }

    pub fn for_variant(variant: EngineVariant) -> Self {
        match variant {
            EngineVariant::SingleCavity => Self::single_cavity(),
            EngineVariant::Cascade => Self::cascade(),
        }
    }

    pub fn gamma_1(&self) -> f64 {
        self.gamma_1.unwrap_or(self.kappa_a)
    }

    pub fn gamma_2(&self) -> f64 {
        self.gamma_2.unwrap_or(self.kappa_a)
    }

    /// Total mechanical friction `κ_c + κ_L`.
    pub fn total_kappa_c(&self) -> f64 {
        self.kappa_c + self.kappa_l
    }

    pub fn with_load(&self, kappa_l: f64) -> Self {
        Self {
            kappa_l,
            ..self.clone()
        }
    }

    pub fn space(&self) -> Result<TruncatedSpace, AlgebraError> {
        TruncatedSpace::new(&self.dims)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let finite = [
            ("omega_a", self.omega_a),
            ("omega_b", self.omega_b),
            ("g", self.g),
        ];
        for (name, value) in finite {
            if !value.is_finite() {
                return Err(ModelError::NotFinite { name, value });
            }
        }
        let mut nonneg = vec![
            ("kappa_a", self.kappa_a),
            ("kappa_b", self.kappa_b),
            ("kappa_c", self.kappa_c),
            ("n_a", self.n_a),
            ("n_b", self.n_b),
            ("n_c", self.n_c),
            ("kappa_l", self.kappa_l),
        ];
        if let Some(v) = self.gamma_1 {
            nonneg.push(("gamma_1", v));
        }
        if let Some(v) = self.gamma_2 {
            nonneg.push(("gamma_2", v));
        }
        for (name, value) in nonneg {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ModelError::Negative { name, value });
            }
        }
        if !(self.omega_c.is_finite() && self.omega_c > 0.0) {
            return Err(ModelError::NonPositiveOmegaC(self.omega_c));
        }
        if self.enforce_resonance {
            let detuning = self.omega_b - self.omega_a;
            let scale = self.omega_a.abs().max(self.omega_b.abs()).max(self.omega_c).max(1.0);
            if (detuning - self.omega_c).abs() > RESONANCE_TOL * scale {
                return Err(ModelError::OffResonance {
                    detuning,
                    omega_c: self.omega_c,
                });
            }
        }
        self.space()?;
        Ok(())
    }

    fn expect_variant(&self, expected: EngineVariant) -> Result<(), ModelError> {
        if self.variant == expected {
            Ok(())
        } else {
            Err(ModelError::WrongVariant {
                expected,
                found: self.variant,
            })
        }
    }
}

/// Bath temperature for mean occupation `n` at frequency `omega`:
/// `k_B T = ħω / ln(1 + 1/N)`, zero for `N = 0`.
pub fn bath_temperature(omega: f64, n: f64) -> f64 {
    if n <= 0.0 {
        0.0
    } else {
        omega / (1.0 / n).ln_1p()
    }
}

/// Bose–Einstein occupation at temperature `t`; inverse of [`bath_temperature`].
pub fn bath_occupation(omega: f64, t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        1.0 / (omega / t).exp_m1()
    }
}

/// A linear map on column-stacked density matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct Superoperator {
    space: TruncatedSpace,
    matrix: CsrMatrix,
}

impl Superoperator {
    pub fn from_matrix(space: &TruncatedSpace, matrix: CsrMatrix) -> Self {
        let n2 = space.total_dim() * space.total_dim();
        assert_eq!(matrix.shape(), (n2, n2), "superoperator shape mismatch");
        Self {
            space: space.clone(),
            matrix,
        }
    }

    pub fn zero(space: &TruncatedSpace) -> Self {
        let n2 = space.total_dim() * space.total_dim();
        Self::from_matrix(space, CsrMatrix::zeros(n2, n2))
    }

    /// `ρ ↦ A ρ`
    pub fn left(op: &ModeOperator) -> Self {
        let n = op.space().total_dim();
        Self::from_matrix(op.space(), CsrMatrix::identity(n).kron(op.matrix()))
    }

    /// `ρ ↦ ρ B`
    pub fn right(op: &ModeOperator) -> Self {
        let n = op.space().total_dim();
        Self::from_matrix(op.space(), op.matrix().transpose().kron(&CsrMatrix::identity(n)))
    }

    /// `ρ ↦ A ρ B`
    pub fn sandwich(left: &ModeOperator, right: &ModeOperator) -> Result<Self, ModelError> {
        if left.space() != right.space() {
            return Err(AlgebraError::SpaceMismatch {
                left: left.space().dims().to_vec(),
                right: right.space().dims().to_vec(),
            }
            .into());
        }
        Ok(Self::from_matrix(
            left.space(),
            right.matrix().transpose().kron(left.matrix()),
        ))
    }

    /// `ρ ↦ −i[H, ρ]`
    pub fn unitary(hamiltonian: &ModeOperator) -> Self {
        let minus_i = Complex64::new(0.0, -1.0);
        Self::left(hamiltonian)
            .sub(&Self::right(hamiltonian))
            .expect("same space")
            .scale(minus_i)
    }

    pub fn space(&self) -> &TruncatedSpace {
        &self.space
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    fn check(&self, other: &Self) -> Result<(), ModelError> {
        if self.space == other.space {
            Ok(())
        } else {
            Err(AlgebraError::SpaceMismatch {
                left: self.space.dims().to_vec(),
                right: other.space.dims().to_vec(),
            }
            .into())
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, ModelError> {
        self.check(other)?;
        Ok(Self::from_matrix(&self.space, self.matrix.add(&other.matrix)))
    }

    pub fn sub(&self, other: &Self) -> Result<Self, ModelError> {
        self.check(other)?;
        Ok(Self::from_matrix(&self.space, self.matrix.sub(&other.matrix)))
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self::from_matrix(&self.space, self.matrix.scale(factor))
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(Complex64::new(factor, 0.0))
    }

    /// Sum of `weight · term` with all entries merged in a single pass.
    pub fn weighted_sum(space: &TruncatedSpace, terms: &[(f64, &Superoperator)]) -> Self {
        let n2 = space.total_dim() * space.total_dim();
        let triplets = terms
            .iter()
            .filter(|(w, _)| *w != 0.0)
            .flat_map(|(w, s)| {
                assert_eq!(s.space(), space, "superoperator space mismatch");
                s.matrix.triplets().map(move |(i, j, v)| (i, j, v * *w))
            });
        Self::from_matrix(space, CsrMatrix::from_triplets(n2, n2, triplets))
    }

    /// Applies the map to a dense density matrix.
    pub fn apply(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let n = self.space.total_dim();
        assert_eq!(rho.shape(), (n, n), "density matrix shape mismatch");
        let out = self.matrix.mul_vec(rho.as_slice());
        DMatrix::from_vec(n, n, out)
    }
}

/// Column-stacked vectorization.
pub fn vectorize(rho: &DMatrix<Complex64>) -> Vec<Complex64> {
    // nalgebra stores column-major, which is exactly column stacking
    rho.as_slice().to_vec()
}

pub fn unvectorize(vec: &[Complex64], n: usize) -> DMatrix<Complex64> {
    assert_eq!(vec.len(), n * n);
    DMatrix::from_column_slice(n, n, vec)
}

/// `D_x(ρ) = x ρ x† − ½{x†x, ρ}`.
pub fn lindblad_dissipator(op: &ModeOperator) -> Superoperator {
    let xd = op.adjoint();
    let xdx = xd.compose(op).expect("same space");
    let jump = Superoperator::sandwich(op, &xd).expect("same space");
    let anti = Superoperator::left(&xdx)
        .add(&Superoperator::right(&xdx))
        .expect("same space");
    jump.sub(&anti.scale_real(0.5)).expect("same space")
}

/// `ρ ↦ [[X, ρ], Y] = XρY − ρXY − YXρ + YρX`.
pub fn double_commutator(x: &ModeOperator, y: &ModeOperator) -> Result<Superoperator, ModelError> {
    let xy = x.compose(y)?;
    let yx = y.compose(x)?;
    Superoperator::sandwich(x, y)?
        .sub(&Superoperator::right(&xy))?
        .sub(&Superoperator::left(&yx))?
        .add(&Superoperator::sandwich(y, x)?)
}

struct Modes {
    a: ModeOperator,
    b: ModeOperator,
    c: ModeOperator,
}

impl Modes {
    fn new(space: &TruncatedSpace) -> Result<Self, ModelError> {
        Ok(Self {
            a: ModeOperator::annihilation(space, MODE_A)?,
            b: ModeOperator::annihilation(space, MODE_B)?,
            c: ModeOperator::annihilation(space, MODE_C)?,
        })
    }

    fn free_hamiltonian(&self, config: &EngineConfig) -> Result<ModeOperator, ModelError> {
        let space = self.a.space();
        let na = ModeOperator::number(space, MODE_A)?;
        let nb = ModeOperator::number(space, MODE_B)?;
        let nc = ModeOperator::number(space, MODE_C)?;
        Ok(na
            .scale_real(config.omega_a)
            .add(&nb.scale_real(config.omega_b))?
            .add(&nc.scale_real(config.omega_c))?)
    }

    fn position_c(&self) -> Result<ModeOperator, ModelError> {
        Ok(self.c.add(&self.c.adjoint())?)
    }
}

/// `H = ω_a a†a + ω_b b†b + ω_c c†c − g (a+b)†(a+b)(c+c†)`
pub fn hamiltonian_single(config: &EngineConfig) -> Result<ModeOperator, ModelError> {
    config.expect_variant(EngineVariant::SingleCavity)?;
    config.validate()?;
    let modes = Modes::new(&config.space()?)?;
    let field = modes.a.add(&modes.b)?;
    let intensity = field.adjoint().compose(&field)?;
    let coupling = intensity.compose(&modes.position_c()?)?;
    Ok(modes.free_hamiltonian(config)?.sub(&coupling.scale_real(config.g))?)
}

/// `H₁ + H₂ = ω_b b†b + ω_a a†a + ω_c c†c − g a†a (c+c†)`
pub fn hamiltonian_cascade(config: &EngineConfig) -> Result<ModeOperator, ModelError> {
    config.expect_variant(EngineVariant::Cascade)?;
    config.validate()?;
    let modes = Modes::new(&config.space()?)?;
    let na = ModeOperator::number(modes.a.space(), MODE_A)?;
    let coupling = na.compose(&modes.position_c()?)?;
    Ok(modes.free_hamiltonian(config)?.sub(&coupling.scale_real(config.g))?)
}

/// Thermal damping `κ(N+1)D_x + κN D_{x†}`.
fn thermal_terms(x: &ModeOperator, kappa: f64, n: f64) -> [(f64, Superoperator); 2] {
    [
        (kappa * (n + 1.0), lindblad_dissipator(x)),
        (kappa * n, lindblad_dissipator(&x.adjoint())),
    ]
}

/// Single-cavity master equation with `κ_c → κ_c + κ_L`.
pub fn liouvillian_single(config: &EngineConfig) -> Result<Superoperator, ModelError> {
    let h = hamiltonian_single(config)?;
    let space = h.space().clone();
    let modes = Modes::new(&space)?;
    let kappa_c = config.total_kappa_c();

    let mut terms = vec![(1.0, Superoperator::unitary(&h))];
    terms.extend(thermal_terms(&modes.a, config.kappa_a, config.n_a));
    terms.extend(thermal_terms(&modes.b, config.kappa_b, config.n_b));
    terms.extend(thermal_terms(&modes.c, kappa_c, config.n_c));
    let refs: Vec<(f64, &Superoperator)> = terms.iter().map(|(w, s)| (*w, s)).collect();
    Ok(Superoperator::weighted_sum(&space, &refs))
}

/// Cascade master equation: mode `b` is a filter cavity whose output feeds
/// mode `a` one way, with the thermal input of `b` entering through the
/// collective operator `√γ₁ b + √γ₂ a`.
pub fn liouvillian_cascade(config: &EngineConfig) -> Result<Superoperator, ModelError> {
    let h = hamiltonian_cascade(config)?;
    let space = h.space().clone();
    let modes = Modes::new(&space)?;
    let (g1, g2) = (config.gamma_1(), config.gamma_2());
    let kappa_c = config.total_kappa_c();

    let mut terms = vec![(1.0, Superoperator::unitary(&h))];
    terms.extend(thermal_terms(&modes.a, config.kappa_a, config.n_a));
    terms.extend(thermal_terms(&modes.c, kappa_c, config.n_c));
    terms.push((g1, lindblad_dissipator(&modes.b)));
    terms.push((g2, lindblad_dissipator(&modes.a)));
    terms.push(((g1 * g2).sqrt(), cascade_feed(&modes)?));
    let collective = modes.b.scale_real(g1.sqrt()).add(&modes.a.scale_real(g2.sqrt()))?;
    let collective_dag = collective.adjoint();
    terms.push((
        config.n_b / 2.0,
        double_commutator(&collective, &collective_dag)?,
    ));
    terms.push((
        config.n_b / 2.0,
        double_commutator(&collective_dag, &collective)?,
    ));
    let refs: Vec<(f64, &Superoperator)> = terms.iter().map(|(w, s)| (*w, s)).collect();
    Ok(Superoperator::weighted_sum(&space, &refs))
}

/// `ρ ↦ −([a†, bρ] + [ρb†, a])`
fn cascade_feed(modes: &Modes) -> Result<Superoperator, ModelError> {
    let ad = modes.a.adjoint();
    let bd = modes.b.adjoint();
    let adb = ad.compose(&modes.b)?;
    let bda = bd.compose(&modes.a)?;
    // [a†, bρ] = a†bρ − bρa†,  [ρb†, a] = ρb†a − aρb†
    let forward = Superoperator::left(&adb)
        .sub(&Superoperator::sandwich(&modes.b, &ad)?)?
        .add(&Superoperator::right(&bda))?
        .sub(&Superoperator::sandwich(&modes.a, &bd)?)?;
    Ok(forward.scale_real(-1.0))
}

pub fn hamiltonian(config: &EngineConfig) -> Result<ModeOperator, ModelError> {
    match config.variant {
        EngineVariant::SingleCavity => hamiltonian_single(config),
        EngineVariant::Cascade => hamiltonian_cascade(config),
    }
}

pub fn liouvillian(config: &EngineConfig) -> Result<Superoperator, ModelError> {
    match config.variant {
        EngineVariant::SingleCavity => liouvillian_single(config),
        EngineVariant::Cascade => liouvillian_cascade(config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        EngineConfig::single_cavity().validate().unwrap();
        EngineConfig::cascade().validate().unwrap();
        assert_eq!(EngineConfig::cascade().gamma_1(), 0.15);
        assert_eq!(EngineConfig::cascade().gamma_2(), 0.15);
    }

    #[test]
    fn validation_errors() {
        let mut c = EngineConfig::single_cavity();
        c.kappa_b = -0.1;
        assert!(matches!(c.validate(), Err(ModelError::Negative { name: "kappa_b", .. })));
        let mut c = EngineConfig::single_cavity();
        c.omega_b = 1.3;
        assert!(matches!(c.validate(), Err(ModelError::OffResonance { .. })));
        c.enforce_resonance = false;
        c.validate().unwrap();
        let mut c = EngineConfig::single_cavity();
        c.omega_c = 0.0;
        c.enforce_resonance = false;
        assert!(matches!(c.validate(), Err(ModelError::NonPositiveOmegaC(_))));
        let mut c = EngineConfig::single_cavity();
        c.dims = [4, 0, 3];
        assert!(matches!(c.validate(), Err(ModelError::Algebra(_))));
    }

    #[test]
    fn wrong_variant_rejected() {
        assert!(matches!(
            hamiltonian_cascade(&EngineConfig::single_cavity()),
            Err(ModelError::WrongVariant { .. })
        ));
        assert!(matches!(
            liouvillian_single(&EngineConfig::cascade()),
            Err(ModelError::WrongVariant { .. })
        ));
    }

    #[test]
    fn temperature_round_trip() {
        assert_eq!(bath_temperature(1.0, 0.0), 0.0);
        for n in [0.01, 0.33, 0.5, 3.0] {
            let t = bath_temperature(1.0, n);
            assert!((bath_occupation(1.0, t) - n).abs() < 1e-12);
        }
        assert!((bath_temperature(1.0, 1.0) - 1.0 / 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn single_mode_dissipator_on_maximally_mixed() {
        let s = TruncatedSpace::new(&[2]).unwrap();
        let x = ModeOperator::annihilation(&s, 0).unwrap();
        let d = lindblad_dissipator(&x);
        let rho = DMatrix::<Complex64>::identity(2, 2).scale(0.5);
        let out = d.apply(&rho);
        assert!((out[(0, 0)] - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!((out[(1, 1)] + Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert_eq!(out[(0, 1)], Complex64::new(0.0, 0.0));
        let mut vac = DMatrix::<Complex64>::zeros(2, 2);
        vac[(0, 0)] = Complex64::new(1.0, 0.0);
        assert!(d.apply(&vac).iter().all(|z| z.norm() == 0.0));
    }
}
