//! Compressed sparse row storage for complex matrices.
//!
//! Every operator and superoperator in the crate is stored as a [`CsrMatrix`].
//! Rows are kept with strictly increasing column indices and no explicit
//! zeros, so two matrices built from the same arithmetic compare equal
//! entry-for-entry.

use nalgebra::DMatrix;
use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<Complex64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![Complex64::new(1.0, 0.0); n])
    }

    pub fn diagonal(diag: &[Complex64]) -> Self {
        Self::from_triplets(
            diag.len(),
            diag.len(),
            diag.iter().enumerate().map(|(i, &v)| (i, i, v)),
        )
    }

    /// Builds a matrix from `(row, col, value)` triplets.
    ///
    /// Duplicates are summed in insertion order and exact zeros are dropped.
    pub fn from_triplets<I>(nrows: usize, ncols: usize, triplets: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, Complex64)>,
    {
        let mut entries: Vec<(usize, usize, Complex64)> = triplets.into_iter().collect();
        for &(r, c, _) in &entries {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) outside {nrows}x{ncols}");
        }
        // stable sort keeps the duplicate summation order deterministic
        entries.sort_by_key(|&(r, c, _)| (r, c));

        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut iter = entries.into_iter().peekable();
        while let Some((r, c, mut v)) = iter.next() {
            while let Some(&(r2, c2, v2)) = iter.peek() {
                if r2 == r && c2 == c {
                    v += v2;
                    iter.next();
                } else {
                    break;
                }
            }
            if v != ZERO {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn from_dense(dense: &DMatrix<Complex64>) -> Self {
        let mut triplets = Vec::new();
        for i in 0..dense.nrows() {
            for j in 0..dense.ncols() {
                let v = dense[(i, j)];
                if v != ZERO {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(dense.nrows(), dense.ncols(), triplets)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let range = self.indptr[i]..self.indptr[i + 1];
        self.indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    /// All stored entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let range = self.indptr[i]..self.indptr[i + 1];
        match self.indices[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => ZERO,
        }
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        if factor == ZERO {
            return Self::zeros(self.nrows, self.ncols);
        }
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(Complex64::new(factor, 0.0))
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(
            self.ncols,
            self.nrows,
            self.triplets().map(|(i, j, v)| (j, i, v)),
        )
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_triplets(
            self.ncols,
            self.nrows,
            self.triplets().map(|(i, j, v)| (j, i, v.conj())),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in sparse add");
        Self::from_triplets(self.nrows, self.ncols, self.triplets().chain(other.triplets()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in sparse sub");
        Self::from_triplets(
            self.nrows,
            self.ncols,
            self.triplets()
                .chain(other.triplets().map(|(i, j, v)| (i, j, -v))),
        )
    }

    /// Sparse product `self * other` using a dense row accumulator.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows, "inner dimension mismatch in sparse matmul");
        let mut acc = vec![ZERO; other.ncols];
        let mut touched = vec![false; other.ncols];
        let mut cols: Vec<usize> = Vec::new();
        let mut triplets = Vec::new();
        for i in 0..self.nrows {
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if !touched[j] {
                        touched[j] = true;
                        cols.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            cols.sort_unstable();
            for &j in &cols {
                triplets.push((i, j, acc[j]));
                acc[j] = ZERO;
                touched[j] = false;
            }
            cols.clear();
        }
        Self::from_triplets(self.nrows, other.ncols, triplets)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (p, q) = other.shape();
        let mut triplets = Vec::with_capacity(self.nnz() * other.nnz());
        for (i, j, a) in self.triplets() {
            for (k, l, b) in other.triplets() {
                triplets.push((i * p + k, j * q + l, a * b));
            }
        }
        Self::from_triplets(self.nrows * p, self.ncols * q, triplets)
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.ncols, "vector length mismatch");
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `self * dense`.
    pub fn mul_dense(&self, dense: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        assert_eq!(self.ncols, dense.nrows(), "inner dimension mismatch");
        let mut out = DMatrix::zeros(self.nrows, dense.ncols());
        for i in 0..self.nrows {
            for (k, a) in self.row(i) {
                for j in 0..dense.ncols() {
                    out[(i, j)] += a * dense[(k, j)];
                }
            }
        }
        out
    }

    /// `dense * self`.
    pub fn left_mul_dense(&self, dense: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        assert_eq!(dense.ncols(), self.nrows, "inner dimension mismatch");
        let mut out = DMatrix::zeros(dense.nrows(), self.ncols);
        for k in 0..self.nrows {
            for (j, b) in self.row(k) {
                for i in 0..dense.nrows() {
                    out[(i, j)] += dense[(i, k)] * b;
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            out[(i, j)] = v;
        }
        out
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Induced 1-norm (largest column sum of moduli).
    pub fn norm_one(&self) -> f64 {
        let mut sums = vec![0.0; self.ncols];
        for (_, j, v) in self.triplets() {
            sums[j] += v.norm();
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.nrows == self.ncols
            && self
                .triplets()
                .all(|(i, j, v)| (v - self.get(j, i).conj()).norm() <= tol)
            && self
                .adjoint()
                .triplets()
                .all(|(i, j, v)| (v - self.get(i, j)).norm() <= tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn duplicates_are_summed_and_zeros_dropped() {
        let m = CsrMatrix::from_triplets(
            2,
            2,
            vec![(0, 1, c(1.0, 0.0)), (0, 1, c(2.0, 1.0)), (1, 0, c(1.0, 0.0)), (1, 0, c(-1.0, 0.0))],
        );
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), c(3.0, 1.0));
        assert_eq!(m.get(1, 0), ZERO);
    }

    #[test]
    fn kron_and_matmul_match_dense() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 1, c(1.0, 2.0)), (1, 1, c(-0.5, 0.0))]);
        let b = CsrMatrix::from_triplets(3, 3, vec![(0, 0, c(1.0, 0.0)), (2, 1, c(0.0, 3.0))]);
        let k = a.kron(&b).to_dense();
        let ad = a.to_dense();
        let bd = b.to_dense();
        let kd = ad.kronecker(&bd);
        assert_eq!(k, kd);

        let sq = a.kron(&b).matmul(&a.kron(&b)).to_dense();
        assert!((sq - &kd * &kd).iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn adjoint_is_involutive() {
        let a = CsrMatrix::from_triplets(3, 2, vec![(0, 1, c(1.0, 2.0)), (2, 0, c(0.0, -1.0))]);
        assert_eq!(a.adjoint().adjoint(), a);
        assert_eq!(a.adjoint().get(1, 0), c(1.0, -2.0));
    }
}
