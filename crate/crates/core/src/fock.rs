//! Bosonic operators on truncated tensor-product Fock spaces.
//!
//! Modes are ordered `(a, b, c)` and the basis index runs with the last mode
//! fastest: `index = Σ_k n_k · stride_k` with `stride_last = 1`. Mode `c`
//! carries the largest truncation, so its levels are contiguous in memory.
//! Operators are stored as [`CsrMatrix`] (compressed rows).

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sparse::CsrMatrix;

/// Mode indices of the three-mode engines.
pub const MODE_A: usize = 0;
pub const MODE_B: usize = 1;
pub const MODE_C: usize = 2;

/// Truncation used for all published quantum runs: 3 photons in `a` and `b`,
/// 20 phonons in `c`.
pub const DEFAULT_DIMS: [usize; 3] = [4, 4, 21];

/// Spaces at or below this size may be expanded to dense matrices.
pub const DENSE_LIMIT: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("a truncated space needs at least one mode")]
    NoModes,
    #[error("mode {mode} has dimension 0")]
    ZeroDimension { mode: usize },
    #[error("mode index {mode} out of range for a {n_modes}-mode space")]
    ModeOutOfRange { mode: usize, n_modes: usize },
    #[error("operators live on different spaces: {left:?} vs {right:?}")]
    SpaceMismatch { left: Vec<usize>, right: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct TruncatedSpace {
    dims: Vec<usize>,
    total_dim: usize,
}

impl TruncatedSpace {
    pub fn new(dims: &[usize]) -> Result<Self, AlgebraError> {
        if dims.is_empty() {
            return Err(AlgebraError::NoModes);
        }
        if let Some(mode) = dims.iter().position(|&d| d == 0) {
            return Err(AlgebraError::ZeroDimension { mode });
        }
        Ok(Self {
            dims: dims.to_vec(),
            total_dim: dims.iter().product(),
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn n_modes(&self) -> usize {
        self.dims.len()
    }

    pub fn dim(&self, mode: usize) -> usize {
        self.dims[mode]
    }

    fn check_mode(&self, mode: usize) -> Result<(), AlgebraError> {
        if mode < self.n_modes() {
            Ok(())
        } else {
            Err(AlgebraError::ModeOutOfRange {
                mode,
                n_modes: self.n_modes(),
            })
        }
    }

    /// Distance in the flat basis between consecutive levels of `mode`.
    pub fn stride(&self, mode: usize) -> usize {
        self.dims[mode + 1..].iter().product()
    }

    pub fn index_of(&self, occupations: &[usize]) -> usize {
        assert_eq!(occupations.len(), self.n_modes());
        occupations
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&n, &d)| {
                assert!(n < d, "occupation {n} exceeds truncation {d}");
                acc * d + n
            })
    }

    pub fn occupations(&self, mut index: usize) -> Vec<usize> {
        let mut occ = vec![0; self.n_modes()];
        for k in (0..self.n_modes()).rev() {
            occ[k] = index % self.dims[k];
            index /= self.dims[k];
        }
        occ
    }

    /// Embeds a single-mode matrix at position `mode`, identities elsewhere.
    fn embed(&self, mode: usize, factor: &CsrMatrix) -> CsrMatrix {
        let before: usize = self.dims[..mode].iter().product();
        let after = self.stride(mode);
        CsrMatrix::identity(before)
            .kron(factor)
            .kron(&CsrMatrix::identity(after))
    }
}

impl TryFrom<Vec<usize>> for TruncatedSpace {
    type Error = AlgebraError;

    fn try_from(dims: Vec<usize>) -> Result<Self, Self::Error> {
        Self::new(&dims)
    }
}

impl From<TruncatedSpace> for Vec<usize> {
    fn from(space: TruncatedSpace) -> Self {
        space.dims
    }
}

/// Single-mode lowering operator on `dim` levels: `⟨n−1|x|n⟩ = √n`.
pub fn lowering_matrix(dim: usize) -> CsrMatrix {
    CsrMatrix::from_triplets(
        dim,
        dim,
        (1..dim).map(|n| (n - 1, n, Complex64::new((n as f64).sqrt(), 0.0))),
    )
}

/// A sparse operator tagged with the space it acts on.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeOperator {
    space: TruncatedSpace,
    matrix: CsrMatrix,
}

impl ModeOperator {
    pub fn from_matrix(space: &TruncatedSpace, matrix: CsrMatrix) -> Self {
        assert_eq!(
            matrix.shape(),
            (space.total_dim(), space.total_dim()),
            "matrix shape does not match the space"
        );
        Self {
            space: space.clone(),
            matrix,
        }
    }

    pub fn identity(space: &TruncatedSpace) -> Self {
        Self::from_matrix(space, CsrMatrix::identity(space.total_dim()))
    }

    pub fn zero(space: &TruncatedSpace) -> Self {
        Self::from_matrix(space, CsrMatrix::zeros(space.total_dim(), space.total_dim()))
    }

    pub fn annihilation(space: &TruncatedSpace, mode: usize) -> Result<Self, AlgebraError> {
        space.check_mode(mode)?;
        Ok(Self::from_matrix(
            space,
            space.embed(mode, &lowering_matrix(space.dim(mode))),
        ))
    }

    pub fn creation(space: &TruncatedSpace, mode: usize) -> Result<Self, AlgebraError> {
        Ok(Self::annihilation(space, mode)?.adjoint())
    }

    /// `x†x` for the given mode, built directly as a diagonal.
    pub fn number(space: &TruncatedSpace, mode: usize) -> Result<Self, AlgebraError> {
        space.check_mode(mode)?;
        let diag: Vec<Complex64> = (0..space.dim(mode))
            .map(|n| Complex64::new(n as f64, 0.0))
            .collect();
        Ok(Self::from_matrix(
            space,
            space.embed(mode, &CsrMatrix::diagonal(&diag)),
        ))
    }

    pub fn space(&self) -> &TruncatedSpace {
        &self.space
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CsrMatrix {
        self.matrix
    }

    fn same_space(&self, other: &Self) -> Result<(), AlgebraError> {
        if self.space == other.space {
            Ok(())
        } else {
            Err(AlgebraError::SpaceMismatch {
                left: self.space.dims.clone(),
                right: other.space.dims.clone(),
            })
        }
    }

    pub fn adjoint(&self) -> Self {
        Self {
            space: self.space.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    /// Operator product `self · other`.
    pub fn compose(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.same_space(other)?;
        Ok(Self {
            space: self.space.clone(),
            matrix: self.matrix.matmul(&other.matrix),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.same_space(other)?;
        Ok(Self {
            space: self.space.clone(),
            matrix: self.matrix.add(&other.matrix),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.same_space(other)?;
        Ok(Self {
            space: self.space.clone(),
            matrix: self.matrix.sub(&other.matrix),
        })
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            space: self.space.clone(),
            matrix: self.matrix.scale(factor),
        }
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(Complex64::new(factor, 0.0))
    }

    /// `[self, other] = self·other − other·self`.
    pub fn commutator(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.compose(other)?.sub(&other.compose(self)?)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.matrix.is_hermitian(tol)
    }

    pub fn apply(&self, state: &[Complex64]) -> Vec<Complex64> {
        self.matrix.mul_vec(state)
    }

    /// Dense copy. Only allowed for spaces of at most [`DENSE_LIMIT`] states.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        assert!(
            self.space.total_dim() <= DENSE_LIMIT,
            "dense expansion is reserved for spaces of at most {DENSE_LIMIT} states"
        );
        self.matrix.to_dense()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn single(d: usize) -> TruncatedSpace {
        TruncatedSpace::new(&[d]).unwrap()
    }

    #[test]
    fn space_validation() {
        assert_eq!(TruncatedSpace::new(&[]), Err(AlgebraError::NoModes));
        assert_eq!(
            TruncatedSpace::new(&[2, 0]),
            Err(AlgebraError::ZeroDimension { mode: 1 })
        );
        let s = TruncatedSpace::new(&[4, 4, 21]).unwrap();
        assert_eq!(s.total_dim(), 336);
        assert_eq!(s.stride(0), 84);
        assert_eq!(s.index_of(&[1, 2, 3]), 84 + 42 + 3);
        assert_eq!(s.occupations(84 + 42 + 3), vec![1, 2, 3]);
    }

    #[test]
    fn lowering_on_dim_three() {
        let s = single(3);
        let a = ModeOperator::annihilation(&s, 0).unwrap();
        assert_eq!(a.matrix().nnz(), 2);
        assert_eq!(a.matrix().get(0, 1), c(1.0));
        assert_eq!(a.matrix().get(1, 2), c(2f64.sqrt()));
    }

    #[test]
    fn lowering_kills_vacuum() {
        let s = TruncatedSpace::new(&[3, 2]).unwrap();
        let mut vac = vec![Complex64::new(0.0, 0.0); s.total_dim()];
        vac[0] = c(1.0);
        for mode in 0..2 {
            let out = ModeOperator::annihilation(&s, mode).unwrap().apply(&vac);
            assert!(out.iter().all(|z| z.norm() == 0.0));
        }
    }

    #[test]
    fn two_mode_pattern_matches_dense_kron() {
        let s = TruncatedSpace::new(&[2, 2]).unwrap();
        let a = ModeOperator::annihilation(&s, 0).unwrap();
        // dense oracle: lowering ⊗ identity
        let low = DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]);
        let oracle = low.kronecker(&DMatrix::<Complex64>::identity(2, 2));
        assert_eq!(a.to_dense(), oracle);
        assert_eq!(a.matrix().nnz(), 2);
    }

    #[test]
    fn adjoint_of_lowering_is_raising() {
        let s = single(4);
        let ad = ModeOperator::creation(&s, 0).unwrap();
        for n in 1..4 {
            assert_eq!(ad.matrix().get(n, n - 1), c((n as f64).sqrt()));
        }
        let i = ModeOperator::identity(&s).scale(Complex64::i());
        assert_eq!(i.adjoint(), ModeOperator::identity(&s).scale(-Complex64::i()));
    }

    #[test]
    fn commutator_has_truncation_defect_on_top_level() {
        for d in 1..7 {
            let s = single(d);
            let a = ModeOperator::annihilation(&s, 0).unwrap();
            let comm = a.commutator(&a.adjoint()).unwrap().to_dense();
            // dense oracle: I − d |d−1⟩⟨d−1|
            let mut oracle = DMatrix::<Complex64>::identity(d, d);
            oracle[(d - 1, d - 1)] -= c(d as f64);
            assert!((comm - oracle).iter().all(|z| z.norm() < 1e-12), "d = {d}");
        }
    }

    #[test]
    fn number_operator_diagonal() {
        let s = TruncatedSpace::new(&[3, 5]).unwrap();
        for mode in 0..2 {
            let a = ModeOperator::annihilation(&s, mode).unwrap();
            let n = a.adjoint().compose(&a).unwrap();
            let direct = ModeOperator::number(&s, mode).unwrap();
            assert!((n.to_dense() - direct.to_dense()).iter().all(|z| z.norm() < 1e-12));
            for idx in 0..s.total_dim() {
                let occ = s.occupations(idx);
                assert_eq!(direct.matrix().get(idx, idx), c(occ[mode] as f64));
            }
        }
        let n0 = ModeOperator::number(&s, 0).unwrap();
        let n1 = ModeOperator::number(&s, 1).unwrap();
        assert_eq!(n0.commutator(&n1).unwrap().matrix().nnz(), 0);
    }

    #[test]
    fn space_mismatch_is_an_error() {
        let a = ModeOperator::annihilation(&single(3), 0).unwrap();
        let b = ModeOperator::annihilation(&single(4), 0).unwrap();
        assert!(matches!(a.compose(&b), Err(AlgebraError::SpaceMismatch { .. })));
        assert!(matches!(a.add(&b), Err(AlgebraError::SpaceMismatch { .. })));
        assert!(matches!(
            ModeOperator::annihilation(&single(3), 1),
            Err(AlgebraError::ModeOutOfRange { mode: 1, n_modes: 1 })
        ));
    }

    #[test]
    fn sum_of_optical_modes_number_is_hermitian() {
        let s = TruncatedSpace::new(&[3, 3, 2]).unwrap();
        let a = ModeOperator::annihilation(&s, MODE_A).unwrap();
        let b = ModeOperator::annihilation(&s, MODE_B).unwrap();
        let sum = a.add(&b).unwrap();
        let n = sum.adjoint().compose(&sum).unwrap();
        assert!(n.is_hermitian(0.0));
    }
}
