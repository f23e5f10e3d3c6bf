//! Dense reference constructions shared by the integration tests. Nothing in
//! here goes through the sparse operators or the vectorized superoperators of
//! the library: operators are filled entry by entry from the occupation
//! numbers and master equations are evaluated as plain matrix products.

#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use optopiston::EngineConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type M = DMatrix<Complex64>;

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn occupations(dims: &[usize], mut index: usize) -> Vec<usize> {
    let mut occ = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        occ[k] = index % dims[k];
        index /= dims[k];
    }
    occ
}

pub fn index_of(dims: &[usize], occ: &[usize]) -> usize {
    occ.iter().zip(dims).fold(0, |acc, (&n, &d)| acc * d + n)
}

/// `⟨m|x_k|n⟩ = √n_k` when `m = n − e_k`.
pub fn lowering(dims: &[usize], mode: usize) -> M {
    let total: usize = dims.iter().product();
    let mut x = M::zeros(total, total);
    for col in 0..total {
        let mut occ = occupations(dims, col);
        if occ[mode] == 0 {
            continue;
        }
        let n = occ[mode];
        occ[mode] -= 1;
        x[(index_of(dims, &occ), col)] = c((n as f64).sqrt());
    }
    x
}

pub fn dissipator(x: &M, rho: &M) -> M {
    let xd = x.adjoint();
    let xdx = &xd * x;
    x * rho * &xd - (&xdx * rho + rho * &xdx) * c(0.5)
}

fn comm(x: &M, y: &M) -> M {
    x * y - y * x
}

pub struct Ops {
    pub a: M,
    pub b: M,
    pub c: M,
}

impl Ops {
    pub fn new(dims: &[usize]) -> Self {
        Self {
            a: lowering(dims, 0),
            b: lowering(dims, 1),
            c: lowering(dims, 2),
        }
    }
}

pub fn hamiltonian_single(cfg: &EngineConfig) -> M {
    let o = Ops::new(&cfg.dims);
    let field = &o.a + &o.b;
    let free = o.a.adjoint() * &o.a * c(cfg.omega_a)
        + o.b.adjoint() * &o.b * c(cfg.omega_b)
        + o.c.adjoint() * &o.c * c(cfg.omega_c);
    free - field.adjoint() * &field * (&o.c + o.c.adjoint()) * c(cfg.g)
}

pub fn hamiltonian_cascade(cfg: &EngineConfig) -> M {
    let o = Ops::new(&cfg.dims);
    let h1 = o.b.adjoint() * &o.b * c(cfg.omega_b);
    let h2 = o.a.adjoint() * &o.a * c(cfg.omega_a) + o.c.adjoint() * &o.c * c(cfg.omega_c)
        - o.a.adjoint() * &o.a * (&o.c + o.c.adjoint()) * c(cfg.g);
    h1 + h2
}

fn unitary(h: &M, rho: &M) -> M {
    (h * rho - rho * h) * Complex64::new(0.0, -1.0)
}

fn thermal(x: &M, kappa: f64, n: f64, rho: &M) -> M {
    dissipator(x, rho) * c(kappa * (n + 1.0)) + dissipator(&x.adjoint(), rho) * c(kappa * n)
}

/// Right-hand side of the single-cavity master equation.
pub fn rhs_single(cfg: &EngineConfig, rho: &M) -> M {
    let o = Ops::new(&cfg.dims);
    let h = hamiltonian_single(cfg);
    let kc = cfg.kappa_c + cfg.kappa_l;
    unitary(&h, rho)
        + thermal(&o.a, cfg.kappa_a, cfg.n_a, rho)
        + thermal(&o.b, cfg.kappa_b, cfg.n_b, rho)
        + thermal(&o.c, kc, cfg.n_c, rho)
}

/// Right-hand side of the cascade master equation, line by line.
pub fn rhs_cascade(cfg: &EngineConfig, rho: &M) -> M {
    let o = Ops::new(&cfg.dims);
    let g1 = cfg.gamma_1.unwrap_or(cfg.kappa_a);
    let g2 = cfg.gamma_2.unwrap_or(cfg.kappa_a);
    let kc = cfg.kappa_c + cfg.kappa_l;
    let line1 = unitary(&hamiltonian_cascade(cfg), rho);
    let line2 = thermal(&o.a, cfg.kappa_a, cfg.n_a, rho);
    let line3 = thermal(&o.c, kc, cfg.n_c, rho);
    let line4 = dissipator(&o.b, rho) * c(g1) + dissipator(&o.a, rho) * c(g2)
        - (comm(&o.a.adjoint(), &(&o.b * rho)) + comm(&(rho * o.b.adjoint()), &o.a)) * c((g1 * g2).sqrt());
    let j = &o.b * c(g1.sqrt()) + &o.a * c(g2.sqrt());
    let jd = j.adjoint();
    let line5 = comm(&comm(&j, rho), &jd) * c(cfg.n_b / 2.0);
    let line6 = comm(&comm(&jd, rho), &j) * c(cfg.n_b / 2.0);
    line1 + line2 + line3 + line4 + line5 + line6
}

pub fn rhs(cfg: &EngineConfig, rho: &M) -> M {
    match cfg.variant {
        optopiston::EngineVariant::SingleCavity => rhs_single(cfg, rho),
        optopiston::EngineVariant::Cascade => rhs_cascade(cfg, rho),
    }
}

/// Matrix of `f` on column-stacked `n × n` matrices, one basis matrix at a
/// time.
pub fn superoperator_matrix(n: usize, f: impl Fn(&M) -> M) -> M {
    let mut out = M::zeros(n * n, n * n);
    for j in 0..n {
        for i in 0..n {
            let mut e = M::zeros(n, n);
            e[(i, j)] = c(1.0);
            let image = f(&e);
            for q in 0..n {
                for p in 0..n {
                    out[(p + q * n, i + j * n)] = image[(p, q)];
                }
            }
        }
    }
    out
}

/// Unit-trace null vector of a dense Liouvillian from its full SVD, along
/// with the two smallest singular values.
pub fn null_space_state(l: &M, n: usize) -> (M, f64, f64) {
    let svd = l.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]));
    let k = order[0];
    let v: Vec<Complex64> = v_t.row(k).iter().map(|z| z.conj()).collect();
    let rho = M::from_column_slice(n, n, &v);
    let rho = (&rho + rho.adjoint()) * c(0.5);
    let tr = rho.trace();
    (rho / tr, svd.singular_values[k], svd.singular_values[order[1]])
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(n: usize, rng: &mut impl Rng) -> M {
    M::from_fn(n, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

pub fn random_hermitian(n: usize, rng: &mut impl Rng) -> M {
    let x = random_matrix(n, rng);
    (&x + x.adjoint()) * c(0.5)
}

/// `X X† / Tr` for a random `X`.
pub fn random_density(n: usize, rng: &mut impl Rng) -> M {
    let x = random_matrix(n, rng);
    let rho = &x * x.adjoint();
    let tr = rho.trace();
    rho / tr
}

/// Geometric distribution of mean `n` cut at `dim` levels and renormalized.
pub fn truncated_geometric(n: f64, dim: usize) -> Vec<f64> {
    if n == 0.0 {
        let mut p = vec![0.0; dim];
        p[0] = 1.0;
        return p;
    }
    let q = n / (n + 1.0);
    let raw: Vec<f64> = (0..dim).map(|k| q.powi(k as i32)).collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / z).collect()
}

pub fn max_abs(m: &M) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
