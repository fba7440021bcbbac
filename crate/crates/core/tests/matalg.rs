use ncmaxerg::matalg::{
    apply_spectral, eigh, is_psd, max_eigenvalue, min_eigenvalue, op_norm, positive_part, schatten_norm,
    spectral_projection, BlockMatrix, CutRule, Hermitian, Interval, Mat, C64,
};
use ncmaxerg::random::{random_block_matrix, random_hermitian, random_psd, random_unitary, seeded_rng};
use proptest::prelude::*;

fn signature() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..=4, 1..=3)
}

fn exponent() -> impl Strategy<Value = f64> {
    prop_oneof![Just(1.0), Just(2.0), Just(f64::INFINITY), 1.0f64..6.0]
}

fn conjugate_exponent(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

/// Largest singular value by power iteration on `A*A`, block by block.
fn power_iteration_norm(a: &BlockMatrix) -> f64 {
    let mut best = 0.0f64;
    for b in a.blocks() {
        let g = b.adjoint() * b;
        let n = g.nrows();
        let mut v = nalgebra::DVector::from_fn(n, |i, _| C64::new(1.0 + 0.37 * i as f64, 0.11 * i as f64));
        let mut value = 0.0;
        for _ in 0..5000 {
            let w = &g * &v;
            let norm = w.norm();
            if norm == 0.0 {
                break;
            }
            value = norm;
            v = w / C64::new(norm, 0.0);
        }
        best = best.max(value.sqrt());
    }
    best
}

#[test]
fn trace_norm_of_a_diagonal() {
    let a = BlockMatrix::from_diagonals(&[vec![3.0, -4.0]]).unwrap();
    assert!((schatten_norm(&a, 1.0).unwrap() - 7.0).abs() < 1e-14);
    assert!((schatten_norm(&a, f64::INFINITY).unwrap() - 4.0).abs() < 1e-14);
    assert!((schatten_norm(&a, 2.0).unwrap() - 5.0).abs() < 1e-14);
}

#[test]
fn exponent_below_one_is_rejected() {
    let a = BlockMatrix::identity(&[2]);
    assert!(schatten_norm(&a, 0.5).is_err());
}

#[test]
fn operator_norm_matches_power_iteration() {
    let mut rng = seeded_rng(17);
    for _ in 0..20 {
        let a = random_block_matrix(&mut rng, &[3, 2]);
        let direct = schatten_norm(&a, f64::INFINITY).unwrap();
        assert!((direct - power_iteration_norm(&a)).abs() < 1e-8 * direct.max(1.0));
    }
}

#[test]
fn projection_onto_a_closed_interval() {
    let a = Hermitian::from_diagonals(&[vec![-1.0, 0.5, 2.0]]).unwrap();
    let p = spectral_projection(&a, &Interval::half_open(0.0, 1.0), 1e-9, CutRule::Conservative).unwrap();
    assert_eq!(p.blocks()[0][(1, 1)], C64::new(1.0, 0.0));
    assert!((p.trace() - 1.0).abs() < 1e-14);
}

#[test]
fn strict_cut_refuses_an_eigenvalue_at_the_endpoint() {
    let a = Hermitian::from_diagonals(&[vec![1e-12, 1.0]]).unwrap();
    let interval = Interval::above(0.0);
    assert!(spectral_projection(&a, &interval, 1e-9, CutRule::Strict).is_err());
    let p = spectral_projection(&a, &interval, 1e-9, CutRule::Conservative).unwrap();
    assert!((p.trace() - 1.0).abs() < 1e-14);
}

#[test]
fn psd_test_uses_the_tolerance() {
    let a = Hermitian::from_diagonals(&[vec![-1e-10, 1.0]]).unwrap();
    assert!(is_psd(&a, 1e-9).unwrap());
    assert!(!is_psd(&a, 1e-12).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigenvalues_are_sorted_and_reconstruct(sig in signature(), seed in any::<u64>()) {
        let a = random_hermitian(&mut seeded_rng(seed), &sig);
        let spec = eigh(&a).unwrap();
        for b in spec.blocks() {
            prop_assert!(b.values.as_slice().windows(2).all(|w| w[0] <= w[1]));
        }
        let back = spec.reconstruct(|s| s);
        prop_assert!(back.max_abs_diff(&a) <= 1e-12 * a.matrix().max_abs().max(1.0));
    }

    #[test]
    fn hermitian_splits_into_positive_parts(sig in signature(), seed in any::<u64>()) {
        let a = random_hermitian(&mut seeded_rng(seed), &sig);
        let plus = positive_part(&a).unwrap();
        let minus = positive_part(&a.scale(-1.0)).unwrap();
        let scale = a.matrix().max_abs().max(1.0);
        prop_assert!(plus.sub(&minus).max_abs_diff(&a) <= 1e-10 * scale);
        prop_assert!(min_eigenvalue(&plus).unwrap() >= -1e-12 * scale);
        prop_assert!(min_eigenvalue(&minus).unwrap() >= -1e-12 * scale);
        // disjoint supports
        let product = plus.matrix() * minus.matrix();
        prop_assert!(product.max_abs() <= 1e-10 * scale * scale);
    }

    #[test]
    fn spectral_calculus_is_multiplicative(sig in signature(), seed in any::<u64>()) {
        let a = random_psd(&mut seeded_rng(seed), &sig, None);
        let root = apply_spectral(&a, f64::sqrt).unwrap();
        let square = root.matrix() * root.matrix();
        prop_assert!(square.max_abs_diff(a.matrix()) <= 1e-10 * a.matrix().max_abs().max(1.0));
    }

    #[test]
    fn projections_are_idempotent_and_self_adjoint(sig in signature(), seed in any::<u64>(), cut in -1.0f64..1.0) {
        let a = random_hermitian(&mut seeded_rng(seed), &sig);
        let p = spectral_projection(&a, &Interval::above(cut), 1e-9, CutRule::Conservative).unwrap();
        let square = p.matrix() * p.matrix();
        prop_assert!(square.max_abs_diff(p.matrix()) <= 1e-9);
        prop_assert!(p.matrix().hermiticity_defect() <= 1e-9);
        let commutator = &(p.matrix() * a.matrix()) - &(a.matrix() * p.matrix());
        prop_assert!(commutator.max_abs() <= 1e-9 * a.matrix().max_abs().max(1.0));
    }

    #[test]
    fn extreme_eigenvalues_bound_the_operator_norm(sig in signature(), seed in any::<u64>()) {
        let a = random_hermitian(&mut seeded_rng(seed), &sig);
        let top = max_eigenvalue(&a).unwrap();
        let bottom = min_eigenvalue(&a).unwrap();
        prop_assert!(bottom <= top);
        prop_assert!((op_norm(&a).unwrap() - top.abs().max(bottom.abs())).abs() <= 1e-12 * top.abs().max(1.0));
    }

    #[test]
    fn schatten_triangle_inequality(sig in signature(), seed in any::<u64>(), p in exponent()) {
        let mut rng = seeded_rng(seed);
        let a = random_block_matrix(&mut rng, &sig);
        let b = random_block_matrix(&mut rng, &sig);
        let lhs = schatten_norm(&(&a + &b), p).unwrap();
        let rhs = schatten_norm(&a, p).unwrap() + schatten_norm(&b, p).unwrap();
        prop_assert!(lhs <= rhs + 1e-9);
    }

    #[test]
    fn schatten_unitary_invariance(n in 1usize..=4, seed in any::<u64>(), p in exponent()) {
        let mut rng = seeded_rng(seed);
        let a = random_block_matrix(&mut rng, &[n]);
        let u: Mat = random_unitary(&mut rng, n);
        let v: Mat = random_unitary(&mut rng, n);
        let rotated = BlockMatrix::new(vec![&u * a.block(0) * &v]).unwrap();
        let before = schatten_norm(&a, p).unwrap();
        prop_assert!((schatten_norm(&rotated, p).unwrap() - before).abs() <= 1e-9 * before.max(1.0));
    }

    #[test]
    fn holder_inequality(sig in signature(), seed in any::<u64>(), p in exponent()) {
        let mut rng = seeded_rng(seed);
        let a = random_block_matrix(&mut rng, &sig);
        let b = random_block_matrix(&mut rng, &sig);
        let q = conjugate_exponent(p);
        let lhs = a.trace_product(&b).norm();
        let rhs = schatten_norm(&a, p).unwrap() * schatten_norm(&b, q).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-12);
    }
}
