mod common;

use common::{c, lowering, max_abs};
use optopiston::fock::{ModeOperator, TruncatedSpace};
use proptest::prelude::*;

fn dims_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..5, 1..4)
}

proptest! {
    #[test]
    fn lowering_matches_occupation_oracle(dims in dims_strategy(), pick in 0usize..3) {
        let mode = pick % dims.len();
        let space = TruncatedSpace::new(&dims).unwrap();
        let x = ModeOperator::annihilation(&space, mode).unwrap();
        prop_assert_eq!(x.to_dense(), lowering(&dims, mode));
    }

    #[test]
    fn number_operators_commute(dims in dims_strategy()) {
        let space = TruncatedSpace::new(&dims).unwrap();
        for j in 0..dims.len() {
            for k in 0..dims.len() {
                let nj = ModeOperator::number(&space, j).unwrap();
                let nk = ModeOperator::number(&space, k).unwrap();
                prop_assert_eq!(nj.commutator(&nk).unwrap().matrix().nnz(), 0);
            }
        }
    }

    #[test]
    fn canonical_commutator_below_top_level(dims in dims_strategy(), pick in 0usize..3) {
        let mode = pick % dims.len();
        let space = TruncatedSpace::new(&dims).unwrap();
        let x = ModeOperator::annihilation(&space, mode).unwrap();
        let defect = x.commutator(&x.adjoint()).unwrap().to_dense()
            - nalgebra::DMatrix::identity(space.total_dim(), space.total_dim());
        for idx in 0..space.total_dim() {
            let occ = space.occupations(idx);
            let norm = defect.column(idx).iter().map(|z| z.norm()).fold(0.0, f64::max);
            if occ[mode] + 1 < dims[mode] {
                prop_assert!(norm < 1e-14);
            } else {
                // top level: [x, x†]|d−1⟩ = (1 − d)|d−1⟩
                let expected = dims[mode] as f64;
                prop_assert!((defect[(idx, idx)] + c(expected)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn construction_is_bit_reproducible(dims in dims_strategy()) {
        let space = TruncatedSpace::new(&dims).unwrap();
        for mode in 0..dims.len() {
            let first = ModeOperator::annihilation(&space, mode).unwrap();
            let second = ModeOperator::annihilation(&space, mode).unwrap();
            prop_assert_eq!(first.matrix(), second.matrix());
        }
    }

    #[test]
    fn adjoint_is_an_involution(dims in dims_strategy(), re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let space = TruncatedSpace::new(&dims).unwrap();
        let x = ModeOperator::annihilation(&space, 0).unwrap()
            .scale(num_complex::Complex64::new(re, im));
        prop_assert_eq!(x.adjoint().adjoint(), x);
    }
}

#[test]
fn adjoint_of_imaginary_identity() {
    let space = TruncatedSpace::new(&[3, 2]).unwrap();
    let i = num_complex::Complex64::new(0.0, 1.0);
    let op = ModeOperator::identity(&space).scale(i);
    let expected = ModeOperator::identity(&space).scale(-i);
    assert_eq!(op.adjoint(), expected);
}

#[test]
fn optical_intensity_is_hermitian() {
    let space = TruncatedSpace::new(&[3, 3, 4]).unwrap();
    let a = ModeOperator::annihilation(&space, 0).unwrap();
    let b = ModeOperator::annihilation(&space, 1).unwrap();
    let field = a.add(&b).unwrap();
    let intensity = field.adjoint().compose(&field).unwrap();
    assert!(intensity.is_hermitian(0.0));
    let dense = intensity.to_dense();
    assert_eq!(max_abs(&(&dense - dense.adjoint())), 0.0);
}
