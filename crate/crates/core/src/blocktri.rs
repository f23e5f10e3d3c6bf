//! LU factorization of a sparse square matrix ordered into BFS level sets.
//!
//! With unknowns grouped by breadth-first levels of the symmetrized sparsity
//! graph, every nonzero couples a level to itself or to a neighbouring level,
//! so the matrix is block tridiagonal. The factorization keeps one dense
//! partially pivoted LU per level (the Schur complements of block Gaussian
//! elimination) and the sparse off-diagonal blocks; storage is `Σ s_k²` for
//! level sizes `s_k`. Pivoting happens only inside levels.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::lu::partial_pivoting::{factor, solve};
use faer::perm::PermRef;
use faer::{Conj, Mat, MatMut, Par};
use num_complex::Complex64;

type C64 = Complex64;

/// Dense partially pivoted LU stored in place.
struct DenseLu {
    lu: Mat<C64>,
    fwd: Vec<usize>,
    inv: Vec<usize>,
}

impl DenseLu {
    fn new(mut a: Mat<C64>) -> Self {
        let n = a.nrows();
        let mut fwd = vec![0usize; n];
        let mut inv = vec![0usize; n];
        let mut buf = MemBuffer::new(factor::lu_in_place_scratch::<usize, C64>(n, n, Par::Seq, Default::default()));
        factor::lu_in_place(a.as_mut(), &mut fwd, &mut inv, Par::Seq, MemStack::new(&mut buf), Default::default());
        Self { lu: a, fwd, inv }
    }

    fn min_pivot(&self) -> f64 {
        (0..self.lu.nrows())
            .map(|i| self.lu[(i, i)].norm())
            .fold(f64::INFINITY, f64::min)
    }

    fn solve_in_place(&self, rhs: MatMut<'_, C64>, adjoint: bool) {
        let n = self.lu.nrows();
        let ncols = rhs.ncols();
        let perm = PermRef::new_checked(&self.fwd, &self.inv, n);
        let mut buf = MemBuffer::new(solve::solve_in_place_scratch::<usize, C64>(n, ncols, Par::Seq));
        let stack = MemStack::new(&mut buf);
        let lu = self.lu.as_ref();
        if adjoint {
            solve::solve_transpose_in_place_with_conj(lu, lu, perm, Conj::Yes, rhs, Par::Seq, stack);
        } else {
            solve::solve_in_place_with_conj(lu, lu, perm, Conj::No, rhs, Par::Seq, stack);
        }
    }

    fn solve_vec(&self, v: &mut [C64], adjoint: bool) {
        let mut m = Mat::<C64>::from_fn(v.len(), 1, |i, _| v[i]);
        self.solve_in_place(m.as_mut(), adjoint);
        for (i, z) in v.iter_mut().enumerate() {
            *z = m[(i, 0)];
        }
    }
}

/// Entries `(row offset, column offset, value)` of one block.
type Entries = Vec<(usize, usize, C64)>;

pub(crate) struct BlockTridiagonalLu {
    dim: usize,
    /// Global unknowns of each level.
    levels: Vec<Vec<usize>>,
    /// Coupling of level `k` to level `k + 1`.
    upper: Vec<Entries>,
    /// Coupling of level `k` to level `k − 1`; empty for `k = 0`.
    lower: Vec<Entries>,
    factors: Vec<DenseLu>,
}

impl BlockTridiagonalLu {
    /// Factors the `dim × dim` matrix given by triplets; duplicates are summed.
    pub(crate) fn factor(dim: usize, triplets: &[(usize, usize, C64)]) -> Self {
        let levels = level_sets(dim, triplets);
        let mut position = vec![(0usize, 0usize); dim];
        for (k, level) in levels.iter().enumerate() {
            for (offset, &g) in level.iter().enumerate() {
                position[g] = (k, offset);
            }
        }
        let n_levels = levels.len();
        log::debug!(
            "block LU: {} levels, widest {}, {} stored entries",
            n_levels,
            levels.iter().map(Vec::len).max().unwrap_or(0),
            levels.iter().map(|l| l.len() * l.len()).sum::<usize>()
        );
        let mut diag: Vec<Entries> = vec![Vec::new(); n_levels];
        let mut upper: Vec<Entries> = vec![Vec::new(); n_levels];
        let mut lower: Vec<Entries> = vec![Vec::new(); n_levels];
        for &(r, c, v) in triplets {
            let (kr, or) = position[r];
            let (kc, oc) = position[c];
            if kc == kr {
                diag[kr].push((or, oc, v));
            } else if kc == kr + 1 {
                upper[kr].push((or, oc, v));
            } else if kr == kc + 1 {
                lower[kr].push((or, oc, v));
            } else {
                unreachable!("level sets of a symmetrized graph only touch neighbours");
            }
        }

        let mut factors = Vec::with_capacity(n_levels);
        let mut coupling: Option<Mat<C64>> = None;
        for k in 0..n_levels {
            let s = levels[k].len();
            let mut schur = Mat::<C64>::zeros(s, s);
            for &(i, j, v) in &diag[k] {
                schur[(i, j)] += v;
            }
            diag[k] = Vec::new();
            if let Some(x) = coupling.take() {
                // S_k = A_k − C_k S_{k−1}^{-1} B_{k−1}
                for &(i, j, v) in &lower[k] {
                    for col in 0..s {
                        schur[(i, col)] -= v * x[(j, col)];
                    }
                }
            }
            let lu = DenseLu::new(schur);
            if k + 1 < n_levels {
                let mut x = Mat::<C64>::zeros(s, levels[k + 1].len());
                for &(i, j, v) in &upper[k] {
                    x[(i, j)] += v;
                }
                lu.solve_in_place(x.as_mut(), false);
                coupling = Some(x);
            }
            factors.push(lu);
        }
        Self {
            dim,
            levels,
            upper,
            lower,
            factors,
        }
    }

    #[cfg(test)]
    pub(crate) fn level_sizes(&self) -> Vec<usize> {
        self.levels.iter().map(Vec::len).collect()
    }

    /// Smallest pivot magnitude over all level factorizations.
    pub(crate) fn min_pivot(&self) -> f64 {
        self.factors.iter().map(DenseLu::min_pivot).fold(f64::INFINITY, f64::min)
    }

    fn gather(&self, x: &[C64]) -> Vec<Vec<C64>> {
        self.levels
            .iter()
            .map(|l| l.iter().map(|&g| x[g]).collect())
            .collect()
    }

    fn scatter(&self, parts: Vec<Vec<C64>>) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        for (level, part) in self.levels.iter().zip(parts) {
            for (&g, v) in level.iter().zip(part) {
                out[g] = v;
            }
        }
        out
    }

    /// Solves `A x = b`.
    pub(crate) fn solve(&self, b: &[C64]) -> Vec<C64> {
        let n = self.levels.len();
        let mut w = self.gather(b);
        // forward: w_k = S_k^{-1}(b_k − C_k w_{k−1})
        for k in 0..n {
            if k > 0 {
                let (done, rest) = w.split_at_mut(k);
                for &(i, j, v) in &self.lower[k] {
                    rest[0][i] -= v * done[k - 1][j];
                }
            }
            self.factors[k].solve_vec(&mut w[k], false);
        }
        // backward: x_k = w_k − S_k^{-1} B_k x_{k+1}
        for k in (0..n.saturating_sub(1)).rev() {
            let mut t = vec![C64::new(0.0, 0.0); self.levels[k].len()];
            for &(i, j, v) in &self.upper[k] {
                t[i] += v * w[k + 1][j];
            }
            self.factors[k].solve_vec(&mut t, false);
            for (x, d) in w[k].iter_mut().zip(t) {
                *x -= d;
            }
        }
        self.scatter(w)
    }

    /// Solves `A^H y = f`.
    pub(crate) fn solve_adjoint(&self, f: &[C64]) -> Vec<C64> {
        let n = self.levels.len();
        let mut u = self.gather(f);
        // U^H u = f: u_k = S_k^{-H}(f_k − B_{k−1}^H u_{k−1})
        for k in 0..n {
            if k > 0 {
                let (done, rest) = u.split_at_mut(k);
                for &(i, j, v) in &self.upper[k - 1] {
                    rest[0][j] -= v.conj() * done[k - 1][i];
                }
            }
            self.factors[k].solve_vec(&mut u[k], true);
        }
        // L^H y = u: y_k = u_k − S_k^{-H} C_{k+1}^H y_{k+1}
        for k in (0..n.saturating_sub(1)).rev() {
            let mut t = vec![C64::new(0.0, 0.0); self.levels[k].len()];
            for &(i, j, v) in &self.lower[k + 1] {
                t[j] += v.conj() * u[k + 1][i];
            }
            self.factors[k].solve_vec(&mut t, true);
            for (y, d) in u[k].iter_mut().zip(t) {
                *y -= d;
            }
        }
        self.scatter(u)
    }
}

/// Breadth-first level sets of the symmetrized pattern, each connected
/// component rooted at a pseudo-peripheral vertex.
fn level_sets(dim: usize, triplets: &[(usize, usize, C64)]) -> Vec<Vec<usize>> {
    let mut degree = vec![0usize; dim + 1];
    for &(r, c, _) in triplets {
        if r != c {
            degree[r] += 1;
            degree[c] += 1;
        }
    }
    let mut start = vec![0usize; dim + 1];
    for i in 0..dim {
        start[i + 1] = start[i] + degree[i];
    }
    let mut fill = start.clone();
    let mut adj = vec![0usize; start[dim]];
    for &(r, c, _) in triplets {
        if r != c {
            adj[fill[r]] = c;
            fill[r] += 1;
            adj[fill[c]] = r;
            fill[c] += 1;
        }
    }
    let neighbours = |v: usize| &adj[start[v]..start[v + 1]];

    let mut depth = vec![usize::MAX; dim];
    let mut levels: Vec<Vec<usize>> = Vec::new();
    for seed in 0..dim {
        if depth[seed] != usize::MAX {
            continue;
        }
        let root = pseudo_peripheral(seed, dim, &neighbours);
        let component = bfs(root, dim, &neighbours);
        let base = levels.len();
        for (k, level) in component.into_iter().enumerate() {
            for &v in &level {
                depth[v] = base + k;
            }
            levels.push(level);
        }
    }
    levels
}

fn bfs<'a>(root: usize, dim: usize, neighbours: &impl Fn(usize) -> &'a [usize]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; dim];
    let mut levels = vec![vec![root]];
    seen[root] = true;
    loop {
        let mut next = Vec::new();
        for &v in levels.last().expect("nonempty") {
            for &w in neighbours(v) {
                if !seen[w] {
                    seen[w] = true;
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        levels.push(next);
    }
    levels
}

/// Repeatedly re-roots at a minimum-degree vertex of the deepest level while
/// the eccentricity grows.
fn pseudo_peripheral<'a>(seed: usize, dim: usize, neighbours: &impl Fn(usize) -> &'a [usize]) -> usize {
    let mut root = seed;
    let mut depth = bfs(root, dim, neighbours).len();
    for _ in 0..8 {
        let levels = bfs(root, dim, neighbours);
        let candidate = *levels
            .last()
            .expect("nonempty")
            .iter()
            .min_by_key(|&&v| neighbours(v).len())
            .expect("nonempty");
        let d = bfs(candidate, dim, neighbours).len();
        if d <= depth {
            break;
        }
        root = candidate;
        depth = d;
    }
    root
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_banded(n: usize, seed: u64) -> Vec<(usize, usize, C64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, C64::new(4.0 + rng.random::<f64>(), rng.random())));
            for _ in 0..3 {
                let j = rng.random_range(0..n);
                t.push((i, j, C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)));
            }
        }
        t
    }

    fn dense(n: usize, t: &[(usize, usize, C64)]) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(n, n);
        for &(i, j, v) in t {
            m[(i, j)] += v;
        }
        m
    }

    #[test]
    fn solves_match_dense_lu() {
        for seed in 0..4 {
            let n = 60;
            let t = random_banded(n, seed);
            let a = dense(n, &t);
            let lu = BlockTridiagonalLu::factor(n, &t);
            assert_eq!(lu.level_sizes().iter().sum::<usize>(), n);
            let b: Vec<C64> = (0..n).map(|i| C64::new(i as f64, 1.0)).collect();
            let x = lu.solve(&b);
            let r = &a * DVector::from_vec(x) - DVector::from_vec(b.clone());
            assert!(r.camax() < 1e-11, "residual {}", r.camax());
            let y = lu.solve_adjoint(&b);
            let r = a.adjoint() * DVector::from_vec(y) - DVector::from_vec(b);
            assert!(r.camax() < 1e-11, "adjoint residual {}", r.camax());
        }
    }

    #[test]
    fn path_graph_has_unit_levels() {
        let n = 10;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, C64::new(2.0, 0.0)));
            if i + 1 < n {
                t.push((i, i + 1, C64::new(-1.0, 0.0)));
                t.push((i + 1, i, C64::new(-1.0, 0.0)));
            }
        }
        let lu = BlockTridiagonalLu::factor(n, &t);
        assert_eq!(lu.level_sizes(), vec![1; n]);
    }

    #[test]
    fn disconnected_components() {
        let t = vec![
            (0, 0, C64::new(1.0, 0.0)),
            (1, 1, C64::new(2.0, 0.0)),
            (2, 2, C64::new(4.0, 0.0)),
            (1, 2, C64::new(1.0, 0.0)),
        ];
        let lu = BlockTridiagonalLu::factor(3, &t);
        let x = lu.solve(&[C64::new(1.0, 0.0), C64::new(3.0, 0.0), C64::new(4.0, 0.0)]);
        assert!((x[0] - 1.0).norm() < 1e-15 && (x[1] - 1.0).norm() < 1e-15 && (x[2] - 1.0).norm() < 1e-15);
    }
}
