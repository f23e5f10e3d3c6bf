//! Stationary states of a Liouvillian.
//!
//! Both engines conserve the total photon number `a†a + b†b` up to a phase,
//! so the vectorized Liouvillian splits into invariant blocks. The solver
//! finds the connected block that holds the populations (the diagonal of
//! `ρ`) and works there; every other block carries no stationary weight when
//! the steady state is unique. For the default truncation this shrinks the
//! system from 112 896 to 19 404 unknowns.
//!
//! Two routes are provided:
//!
//! * [`SolverMethod::Direct`] replaces the vacuum-population equation by
//!   `ρ_00 = 1`, solves the square system and rescales to unit trace.
//! * [`SolverMethod::Eigen`] runs shift-invert inverse iteration towards the
//!   zero eigenvalue.
//!
//! The linear algebra is a block LU over breadth-first level sets of the
//! coupling graph, which for these Liouvillians keeps fill-in far below that
//! of a general sparse LU. Both routes symmetrize and normalize the result and are checked against the
//! full Liouvillian residual `‖L(ρ)‖₁ / ‖ρ‖₁ ≤ 1e−9`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blocktri::BlockTridiagonalLu;
use crate::fock::{ModeOperator, TruncatedSpace};
use crate::model::{vectorize, Superoperator};

/// Relative residual every returned state must meet.
pub const RESIDUAL_TOL: f64 = 1e-9;
/// A second stationary direction is reported below `DEGENERACY_TOL · ‖L‖₁`.
pub const DEGENERACY_TOL: f64 = 1e-12;
/// Spaces up to this size default to the direct method.
pub const DIRECT_LIMIT: usize = 400;

const EIGEN_SHIFT: f64 = 1e-10;
const EIGEN_MAX_ITER: usize = 60;
const EIGEN_STEP_TOL: f64 = 1e-12;
/// Relative residual `‖L x‖₁ / (‖L‖₁ ‖x‖₁)` accepted outright.
const EIGEN_RESIDUAL_TOL: f64 = 1e-14;
/// Accepted once the iteration stops improving.
const EIGEN_STALL_TOL: f64 = 1e-12;
const PROBE_ITER: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("multiple steady states detected ({reason})")]
    MultipleSteadyStates { reason: String },
    #[error("inverse iteration did not converge after {iterations} iterations (last step {last_step:.3e})")]
    NonConvergence { iterations: usize, last_step: f64 },
    #[error("steady-state residual {relative:.3e} exceeds tolerance {tolerance:.1e}")]
    ResidualTooLarge { relative: f64, tolerance: f64 },
    #[error("sparse factorization failed: {0}")]
    Factorization(String),
    #[error("matrix of shape {found:?} does not fit a space of dimension {expected}")]
    ShapeMismatch { expected: usize, found: (usize, usize) },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    Direct,
    Eigen,
}

impl SolverMethod {
    /// Direct LU for small spaces, inverse iteration above [`DIRECT_LIMIT`].
    pub fn default_for(space: &TruncatedSpace) -> Self {
        if space.total_dim() <= DIRECT_LIMIT {
            SolverMethod::Direct
        } else {
            SolverMethod::Eigen
        }
    }
}

/// Starting vector of the inverse iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EigenStart {
    MaximallyMixed,
    Random(u64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    /// `None` picks [`SolverMethod::default_for`].
    pub method: Option<SolverMethod>,
    pub eigen_start: EigenStart,
    /// Skip the smallest-singular-value probe.
    pub skip_degeneracy_probe: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            method: None,
            eigen_start: EigenStart::MaximallyMixed,
            skip_degeneracy_probe: false,
        }
    }
}

impl SolveOptions {
    pub fn with_method(method: SolverMethod) -> Self {
        Self {
            method: Some(method),
            ..Self::default()
        }
    }
}

/// Hermitian, unit-trace state on a truncated space.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    space: TruncatedSpace,
    matrix: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn new(space: &TruncatedSpace, matrix: DMatrix<Complex64>) -> Result<Self, SolverError> {
        let n = space.total_dim();
        if matrix.shape() != (n, n) {
            return Err(SolverError::ShapeMismatch {
                expected: n,
                found: matrix.shape(),
            });
        }
        Ok(Self {
            space: space.clone(),
            matrix,
        })
    }

    /// `(ρ + ρ†)/2` rescaled to unit trace.
    pub fn normalized(space: &TruncatedSpace, matrix: DMatrix<Complex64>) -> Result<Self, SolverError> {
        let herm = (&matrix + matrix.adjoint()).scale(0.5);
        let tr = herm.trace().re;
        Self::new(space, herm.unscale(tr))
    }

    pub fn pure(space: &TruncatedSpace, state: &[Complex64]) -> Result<Self, SolverError> {
        let v = nalgebra::DVector::from_column_slice(state);
        let norm2 = v.norm_squared();
        Self::new(space, (&v * v.adjoint()).unscale(norm2))
    }

    /// Diagonal product state with the given per-mode populations.
    pub fn product_diagonal(space: &TruncatedSpace, populations: &[Vec<f64>]) -> Result<Self, SolverError> {
        assert_eq!(populations.len(), space.n_modes());
        let n = space.total_dim();
        let mut m = DMatrix::zeros(n, n);
        for idx in 0..n {
            let occ = space.occupations(idx);
            let p: f64 = occ.iter().zip(populations).map(|(&k, pops)| pops[k]).product();
            m[(idx, idx)] = Complex64::new(p, 0.0);
        }
        Self::new(space, m)
    }

    pub fn space(&self) -> &TruncatedSpace {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// `max |ρ − ρ†|`
    pub fn hermiticity_defect(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).camax()
    }

    /// `Tr[ρ A]`
    pub fn expectation(&self, op: &ModeOperator) -> Complex64 {
        assert_eq!(op.space(), &self.space, "operator lives on another space");
        op.matrix()
            .triplets()
            .map(|(i, j, v)| v * self.matrix[(j, i)])
            .sum()
    }

    /// Entrywise 1-norm of the vectorized matrix.
    pub fn entry_norm_one(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm()).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (&self.matrix - &other.matrix).camax()
    }

    pub fn dump(&self) -> DensityDump {
        let n = self.space.total_dim();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let z = self.matrix[(i, j)];
                entries.push([z.re, z.im]);
            }
        }
        DensityDump {
            dims: self.space.dims().to_vec(),
            entries,
        }
    }
}

/// Serializable density matrix: row-major `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityDump {
    pub dims: Vec<usize>,
    pub entries: Vec<[f64; 2]>,
}

impl DensityDump {
    pub fn into_density(self) -> Result<DensityMatrix, SolverError> {
        let space = TruncatedSpace::new(&self.dims)
            .map_err(|e| SolverError::Factorization(e.to_string()))?;
        let n = space.total_dim();
        if self.entries.len() != n * n {
            return Err(SolverError::ShapeMismatch {
                expected: n,
                found: (self.entries.len(), 1),
            });
        }
        let m = DMatrix::from_row_iterator(
            n,
            n,
            self.entries.iter().map(|&[re, im]| Complex64::new(re, im)),
        );
        DensityMatrix::new(&space, m)
    }
}

/// Outcome of a stationary solve with diagnostics.
#[derive(Clone, Debug)]
pub struct SteadyState {
    pub rho: DensityMatrix,
    pub method: SolverMethod,
    /// `‖L(ρ)‖₁` on the full space.
    pub residual: f64,
    pub relative_residual: f64,
    /// Unknowns in the solved block.
    pub sector_dim: usize,
    pub iterations: usize,
    /// Distance from a second stationary state: the smallest singular value
    /// of the pinned system (direct) or the magnitude of the slowest decaying
    /// eigenvalue (eigen). `None` when the probe was skipped.
    pub degeneracy_margin: Option<f64>,
}

/// `‖L(ρ)‖₁`, the entrywise 1-norm of the vectorized image.
pub fn residual(l: &Superoperator, rho: &DensityMatrix) -> f64 {
    assert_eq!(l.space(), rho.space(), "residual: space mismatch");
    l.matrix()
        .mul_vec(&vectorize(rho.matrix()))
        .iter()
        .map(|z| z.norm())
        .sum()
}

pub fn solve_steady_state(l: &Superoperator, method: SolverMethod) -> Result<DensityMatrix, SolverError> {
    Ok(solve_steady_state_with(l, &SolveOptions::with_method(method))?.rho)
}

pub fn solve_steady_state_with(l: &Superoperator, options: &SolveOptions) -> Result<SteadyState, SolverError> {
    let space = l.space().clone();
    let method = options.method.unwrap_or_else(|| SolverMethod::default_for(&space));
    let block = PopulationBlock::find(l)?;
    let local = block.restrict(l);
    let norm = local.norm_one.max(f64::MIN_POSITIVE);

    let (solution, iterations, margin) = match method {
        SolverMethod::Direct => {
            let lu = BlockTridiagonalLu::factor(local.dim, &local.pinned(&block));
            if !(lu.min_pivot() > 0.0) {
                return Err(SolverError::MultipleSteadyStates {
                    reason: "zero pivot in the pinned system".into(),
                });
            }
            let mut rhs = vec![Complex64::new(0.0, 0.0); local.dim];
            rhs[block.pinned_row] = Complex64::new(1.0, 0.0);
            let mut x = lu.solve(&rhs);
            normalize_by_trace(&mut x, &block.diagonal);
            let margin = (!options.skip_degeneracy_probe).then(|| smallest_singular_estimate(&lu, local.dim));
            (x, 1, margin)
        }
        SolverMethod::Eigen => inverse_iteration(&local, &block, options, norm)?,
    };

    if let Some(m) = margin {
        if !(m.is_finite() && m >= DEGENERACY_TOL * norm) {
            return Err(SolverError::MultipleSteadyStates {
                reason: format!("degeneracy margin {m:.3e} vs ‖L‖₁ = {norm:.3e}"),
            });
        }
    }
    if solution.iter().any(|z| !z.is_finite()) {
        return Err(SolverError::MultipleSteadyStates {
            reason: "singular stationary system".into(),
        });
    }

    let n = space.total_dim();
    let mut full = vec![Complex64::new(0.0, 0.0); n * n];
    for (&g, &v) in block.members.iter().zip(&solution) {
        full[g] = v;
    }
    let rho = DensityMatrix::normalized(&space, DMatrix::from_vec(n, n, full))?;
    let res = residual(l, &rho);
    let relative = res / rho.entry_norm_one();
    if !(relative <= RESIDUAL_TOL) {
        return Err(SolverError::ResidualTooLarge {
            relative,
            tolerance: RESIDUAL_TOL,
        });
    }
    Ok(SteadyState {
        rho,
        method,
        residual: res,
        relative_residual: relative,
        sector_dim: local.dim,
        iterations,
        degeneracy_margin: margin,
    })
}

/// Connected component of the Liouvillian graph that contains the populations.
struct PopulationBlock {
    /// Global vectorized indices, ascending.
    members: Vec<usize>,
    /// Local index of every member that is a population `ρ_kk`.
    diagonal: Vec<usize>,
    /// Local row replaced by the trace constraint (the vacuum population).
    pinned_row: usize,
}

impl PopulationBlock {
    fn find(l: &Superoperator) -> Result<Self, SolverError> {
        let n = l.space().total_dim();
        let mut uf = UnionFind::new(n * n);
        for (i, j, _) in l.matrix().triplets() {
            uf.union(i, j);
        }
        let diag_global: Vec<usize> = (0..n).map(|k| k + k * n).collect();
        let root = uf.find(diag_global[0]);
        let stray = diag_global.iter().filter(|&&d| uf.find(d) != root).count();
        if stray > 0 {
            // every block holding populations is trace-annihilating on its own
            return Err(SolverError::MultipleSteadyStates {
                reason: format!("{stray} populations decouple from the vacuum population"),
            });
        }
        let members: Vec<usize> = (0..n * n).filter(|&g| uf.find(g) == root).collect();
        let mut diagonal = Vec::with_capacity(n);
        for (local, &g) in members.iter().enumerate() {
            if g % n == g / n {
                diagonal.push(local);
            }
        }
        Ok(Self {
            pinned_row: diagonal[0],
            members,
            diagonal,
        })
    }

    fn local_index(&self, n2: usize) -> Vec<usize> {
        let mut map = vec![usize::MAX; n2];
        for (local, &g) in self.members.iter().enumerate() {
            map[g] = local;
        }
        map
    }

    fn restrict(&self, l: &Superoperator) -> LocalSystem {
        let n = l.space().total_dim();
        let map = self.local_index(n * n);
        let mut triplets = Vec::new();
        for (local_row, &g) in self.members.iter().enumerate() {
            for (col, v) in l.matrix().row(g) {
                let local_col = map[col];
                debug_assert_ne!(local_col, usize::MAX, "block is not invariant");
                triplets.push((local_row, local_col, v));
            }
        }
        let dim = self.members.len();
        let mut col_sums = vec![0.0; dim];
        for &(_, c, v) in &triplets {
            col_sums[c] += v.norm();
        }
        LocalSystem {
            dim,
            triplets,
            norm_one: col_sums.into_iter().fold(0.0, f64::max),
        }
    }
}

struct LocalSystem {
    dim: usize,
    triplets: Vec<(usize, usize, Complex64)>,
    norm_one: f64,
}

impl LocalSystem {
    /// The block with the vacuum-population equation replaced by `ρ_00 = 1`.
    ///
    /// Because `Tr L(ρ) = 0`, this system is regular exactly when the
    /// stationary state is unique and has a nonzero vacuum population; its
    /// solution is the steady state up to normalization. Unlike a dense trace
    /// row it keeps the level structure of `L`.
    fn pinned(&self, block: &PopulationBlock) -> Vec<(usize, usize, Complex64)> {
        let mut out: Vec<_> = self
            .triplets
            .iter()
            .copied()
            .filter(|&(r, _, _)| r != block.pinned_row)
            .collect();
        out.push((block.pinned_row, block.pinned_row, Complex64::new(1.0, 0.0)));
        out
    }

    fn shifted(&self, shift: f64) -> Vec<(usize, usize, Complex64)> {
        let mut out = self.triplets.clone();
        out.extend((0..self.dim).map(|i| (i, i, Complex64::new(-shift, 0.0))));
        out
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.dim];
        for &(r, c, v) in &self.triplets {
            y[r] += v * x[c];
        }
        y
    }
}

fn inverse_iteration(
    local: &LocalSystem,
    block: &PopulationBlock,
    options: &SolveOptions,
    norm: f64,
) -> Result<(Vec<Complex64>, usize, Option<f64>), SolverError> {
    let shift = -EIGEN_SHIFT * norm;
    let lu = BlockTridiagonalLu::factor(local.dim, &local.shifted(shift));

    let mut x: Vec<Complex64> = match options.eigen_start {
        EigenStart::MaximallyMixed => {
            let mut v = vec![Complex64::new(0.0, 0.0); local.dim];
            for &d in &block.diagonal {
                v[d] = Complex64::new(1.0, 0.0);
            }
            v
        }
        EigenStart::Random(seed) => random_vector(local.dim, seed),
    };
    normalize_by_trace(&mut x, &block.diagonal);

    let mut last_step = f64::INFINITY;
    for iter in 1..=EIGEN_MAX_ITER {
        let mut next = lu.solve(&x);
        normalize_by_trace(&mut next, &block.diagonal);
        let step = next
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        x = next;
        let res: f64 = local.apply(&x).iter().map(|z| z.norm()).sum();
        let size: f64 = x.iter().map(|z| z.norm()).sum();
        let relative = res / (norm * size);
        // round-off floor: the step stops shrinking
        let stalled = iter > 2 && step >= 0.5 * last_step;
        last_step = step;
        if step <= EIGEN_STEP_TOL
            || relative <= EIGEN_RESIDUAL_TOL
            || (stalled && relative <= EIGEN_STALL_TOL)
        {
            let margin = (!options.skip_degeneracy_probe).then(|| spectral_gap_estimate(&lu, block, &x));
            return Ok((x, iter, margin));
        }
    }
    Err(SolverError::NonConvergence {
        iterations: EIGEN_MAX_ITER,
        last_step,
    })
}

fn random_vector(dim: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        })
        .collect()
}

fn norm_two(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `|λ|` of the slowest decaying mode, by inverse iteration restricted to
/// traceless matrices. `L` maps everything into that subspace, so a second
/// stationary state would show up as a vanishing estimate.
fn spectral_gap_estimate(lu: &BlockTridiagonalLu, block: &PopulationBlock, steady: &[Complex64]) -> f64 {
    let project = |v: &mut Vec<Complex64>| {
        let tr: Complex64 = block.diagonal.iter().map(|&d| v[d]).sum();
        v.iter_mut().zip(steady).for_each(|(z, s)| *z -= tr * s);
    };
    let mut v = random_vector(steady.len(), 0);
    project(&mut v);
    let mut growth = 0.0;
    for _ in 0..PROBE_ITER {
        let n = norm_two(&v);
        v.iter_mut().for_each(|z| *z /= n);
        let mut w = lu.solve(&v);
        project(&mut w);
        growth = norm_two(&w);
        if !(growth.is_finite() && growth > 0.0) {
            return 0.0;
        }
        v = w;
    }
    1.0 / growth
}

/// Smallest singular value by inverse power iteration on `(A^H A)^{-1}`.
fn smallest_singular_estimate(lu: &BlockTridiagonalLu, dim: usize) -> f64 {
    let inv = 1.0 / (dim as f64).sqrt();
    let mut v = vec![Complex64::new(inv, 0.0); dim];
    let mut growth = 0.0;
    for _ in 0..PROBE_ITER {
        let w = lu.solve(&lu.solve_adjoint(&v));
        growth = norm_two(&w);
        if !(growth.is_finite() && growth > 0.0) {
            return 0.0;
        }
        v = w.into_iter().map(|z| z / growth).collect();
    }
    1.0 / growth.sqrt()
}

/// Scales `x` to unit trace, or to unit max-norm when the trace vanishes.
fn normalize_by_trace(x: &mut [Complex64], diagonal: &[usize]) {
    let tr: Complex64 = diagonal.iter().map(|&d| x[d]).sum();
    let amax = x.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let scale = if tr.norm() > 1e-8 * amax {
        tr
    } else {
        Complex64::new(amax, 0.0)
    };
    if scale.norm() > 0.0 && scale.is_finite() {
        x.iter_mut().for_each(|z| *z /= scale);
    }
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}
