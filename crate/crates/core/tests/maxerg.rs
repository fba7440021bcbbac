use ncmaxerg::dynamics::{example_tensor_markov, extend_l1, random_certified_map, ExtendedMap, PositiveMapModel};
use ncmaxerg::matalg::{max_eigenvalue, min_eigenvalue, schatten_norm, BlockMatrix, Hermitian};
use ncmaxerg::maxerg::{
    commutative_oracle, dual_upper_bound, objective_g, pointwise_certificate, pre_weak_type_predicate, solve_blocks,
    uniform_projection, weak_type_predicate, yeadon_tracial, CertificateOptions, KPoint, PointwiseOutcome, SolveStatus,
    SolverOptions, UniformOptions,
};
use ncmaxerg::random::{derive_seed, random_density, random_hermitian, random_psd, seeded_rng};
use ncmaxerg::vna::{make_state, Algebra, LOneElement, State, Weight};
use ncmaxerg::Error;
use proptest::prelude::*;
use rand::Rng;

fn signature() -> impl Strategy<Value = Vec<usize>> {
    prop_oneof![Just(vec![2]), Just(vec![3]), Just(vec![2, 3])]
}

fn lambda() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.1), Just(1.0), Just(10.0)]
}

struct Setup {
    state: State,
    ext: ExtendedMap,
    input: LOneElement,
}

fn setup(seed: u64, sig: &[usize]) -> Setup {
    let algebra = Algebra::new(sig.to_vec()).unwrap();
    let mut rng = seeded_rng(seed);
    let state = make_state(&algebra, random_density(&mut rng, sig, 0.05)).unwrap();
    let map = random_certified_map(derive_seed(seed, 1), &algebra, &state).unwrap();
    let ext = extend_l1(&map, &state).unwrap();
    let x = random_psd(&mut rng, sig, None);
    let trace = 0.1 * 100f64.powf(rng.random::<f64>());
    let input = LOneElement::new(x.scale(trace / x.trace()).into_matrix());
    Setup { state, ext, input }
}

fn diag(values: &[f64]) -> Hermitian {
    Hermitian::from_diagonals(&[values.to_vec()]).unwrap()
}

/// Row-stochastic kernel with `μP = μ`.
fn metropolis(mu: &[f64]) -> Vec<Vec<f64>> {
    let k = mu.len();
    let mut p = vec![vec![0.0; k]; k];
    for i in 0..k {
        let mut off = 0.0;
        for j in 0..k {
            if i != j {
                p[i][j] = (mu[j] / mu[i]).min(1.0) / k as f64;
                off += p[i][j];
            }
        }
        p[i][i] = 1.0 - off;
    }
    p
}

/// `Σ (r+1) Tr(S_r(a) x_r) − λ Σ (r+1) Tr(d^{1/2} x_r d^{1/2})` with the averages
/// built from repeated single applications of `T₁`.
fn objective_by_hand(point: &KPoint, a: &BlockMatrix, lambda: f64, ext: &ExtendedMap) -> f64 {
    let d_half = ext.reference().power(0.5);
    let mut power = a.clone();
    let mut sum = BlockMatrix::zeros(&a.dims());
    let mut value = 0.0;
    for (r, x) in point.xs.iter().enumerate() {
        if r > 0 {
            power = ext.apply_l1(&power);
        }
        sum = &sum + &power;
        // (r+1) S_r(a) is the running sum
        value += sum.trace_product(x.matrix()).re;
        value -= lambda * (r as f64 + 1.0) * x.matrix().sandwich(d_half.matrix()).trace().re;
    }
    value
}

/// How far the solver pins the maximizer, and hence `e_n`: a duality gap `δ`
/// leaves directions of size `O(√δ)` undetermined on flat faces.
fn pinning(out: &PointwiseOutcome) -> f64 {
    10.0 * (out.solution.gap / out.solution.scale).sqrt() + 1e-7
}

fn same_kernel(a: &PointwiseOutcome, b: &PointwiseOutcome) -> Result<(), TestCaseError> {
    let (pa, pb) = (&a.certificate.projection, &b.certificate.projection);
    prop_assert!((pa.trace() - pb.trace()).abs() < 1e-9, "ranks {} and {}", pa.trace(), pb.trace());
    let diff = schatten_norm(&(pa.matrix() - pb.matrix()), f64::INFINITY).unwrap();
    prop_assert!(diff <= pinning(a).max(pinning(b)), "projections differ by {diff}");
    Ok(())
}

fn random_feasible_point(seed: u64, sig: &[usize], k: usize) -> KPoint {
    let mut rng = seeded_rng(seed);
    let xs: Vec<Hermitian> = (0..k).map(|_| random_psd(&mut rng, sig, None)).collect();
    let total = xs.iter().fold(Hermitian::zeros(sig), |acc, x| acc.add(x));
    let top = max_eigenvalue(&total).unwrap();
    KPoint { xs: xs.iter().map(|x| x.scale(0.9 / top)).collect() }
}

#[test]
fn density_as_input_is_below_threshold() {
    let algebra = Algebra::new(vec![3]).unwrap();
    let rho = diag(&[0.5, 0.3, 0.2]);
    let state = make_state(&algebra, rho.clone()).unwrap();
    let ext = extend_l1(&PositiveMapModel::identity(&algebra), &state).unwrap();
    let input = LOneElement::new(rho.into_matrix());
    let out = pointwise_certificate(&input, 2.0, 4, &ext, &CertificateOptions::default()).unwrap();
    assert_eq!(out.solution.status, SolveStatus::Trivial);
    assert_eq!(out.certificate.projection, Hermitian::identity(&[3]));
    assert!(out.certificate.pass);
}

#[test]
fn single_spike_matches_the_scalar_example() {
    let algebra = Algebra::new(vec![1, 1]).unwrap();
    let state = make_state(&algebra, Hermitian::identity(&[1, 1]).scale(0.5)).unwrap();
    let ext = extend_l1(&PositiveMapModel::identity(&algebra), &state).unwrap();
    let input = LOneElement::new(BlockMatrix::from_diagonals(&[vec![1.0], vec![0.0]]).unwrap());
    let out = pointwise_certificate(&input, 1.0, 0, &ext, &CertificateOptions::default()).unwrap();
    let oracle = commutative_oracle(&[1.0, 0.0], &[0.5, 0.5], None, 1.0, 0);
    assert_eq!(oracle.exceptional, vec![true, false]);
    assert!((out.solution.objective - oracle.optimum).abs() < 1e-12);
    let e: Vec<f64> = out.certificate.projection.blocks().iter().map(|b| b[(0, 0)].re).collect();
    assert_eq!(e, oracle.indicator);
    let mass = out.certificate.residual("mass", None).unwrap().slack;
    assert!((mass - (2.0 - 0.5)).abs() < 1e-12);
}

#[test]
fn yeadon_path_needs_the_trace() {
    let s = setup(4, &[2]);
    let err = yeadon_tracial(&s.input, 1.0, 6, &s.ext, &UniformOptions::default()).unwrap_err();
    assert!(matches!(err, Error::NotTracial));
}

#[test]
fn uniform_projection_with_the_provable_constant() {
    let mut certified = 0;
    for i in 0..12 {
        let s = setup(derive_seed(21, i), &[2, 3][..((i % 2) + 1) as usize]);
        let lambda = [0.1, 1.0, 10.0][(i % 3) as usize];
        let opts = UniformOptions { check_horizon: Some(40), ..Default::default() };
        let Ok(u) = uniform_projection(&s.input, lambda, 15, &s.ext, &opts) else { continue };
        assert!(u.certificate.pass, "instance {i}: worst slack {}", u.certificate.worst_gated_slack());
        // φ(1 − e) ≤ (2/λ)Tr a is (c‖a‖₁/(4λ)) with c = 8
        let pw = pre_weak_type_predicate(&u.certificate.projection, s.input.rep(), 4.0 * lambda, 8.0, 1.0, &s.ext, 40)
            .unwrap();
        assert!(pw.holds, "instance {i}: {pw:?}");
        certified += 1;
    }
    assert!(certified >= 8);
}

#[test]
fn weak_type_predicate_on_the_unit_projection() {
    let s = setup(9, &[3]);
    let e = Hermitian::identity(&[3]);
    let out = weak_type_predicate(&e, s.input.rep(), 1e6, 1.0, 1.0, &s.ext, 10).unwrap();
    assert!(out.holds);
    assert!((out.mass_slack - s.input.norm().unwrap() / 1e6).abs() < 1e-12);
    let tight = weak_type_predicate(&e, s.input.rep(), 1e-6, 1.0, 1.0, &s.ext, 10).unwrap();
    assert!(!tight.holds);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solutions_are_feasible_monotone_and_dual_bounded(sig in signature(), seed in any::<u64>(), k in 1usize..6) {
        let mut rng = seeded_rng(seed);
        let blocks: Vec<Hermitian> = (0..k).map(|_| random_hermitian(&mut rng, &sig)).collect();
        let sol = solve_blocks(blocks, &SolverOptions::default()).unwrap();
        for x in &sol.point.xs {
            prop_assert!(min_eigenvalue(x).unwrap() >= -1e-9);
        }
        prop_assert!(max_eigenvalue(&sol.point.sum()).unwrap() <= 1.0 + 1e-9);
        for w in sol.sweep_objectives.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12 * sol.scale);
        }
        prop_assert!(sol.objective <= sol.dual_bound + 1e-7 * sol.scale);
    }

    #[test]
    fn diagonal_blocks_match_brute_force(k in 1usize..6, m in 1usize..5, seed in any::<u64>()) {
        let mut rng = seeded_rng(seed);
        let values: Vec<Vec<f64>> = (0..k).map(|_| (0..m).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let blocks: Vec<Hermitian> = values.iter().map(|v| diag(v)).collect();
        let sol = solve_blocks(blocks, &SolverOptions::default()).unwrap();
        let brute: f64 = (0..m).map(|i| values.iter().map(|v| v[i]).fold(0.0, f64::max)).sum();
        prop_assert!((sol.objective - brute).abs() <= 1e-8, "{} vs {brute}", sol.objective);
    }

    #[test]
    fn diagonal_instances_match_the_commutative_oracle(k in 2usize..6, seed in any::<u64>(), lam in lambda(), n in 0usize..8) {
        let mut rng = seeded_rng(seed);
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mu: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let p = metropolis(&mu);
        let a: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..2.0)).collect();
        let inner = make_state(&Algebra::new(vec![1]).unwrap(), Hermitian::identity(&[1])).unwrap();
        let (_, state, map) = example_tensor_markov(&p, &mu, &inner).unwrap();
        let ext = extend_l1(&map, &state).unwrap();
        let input = LOneElement::new(BlockMatrix::from_diagonals(&a.iter().map(|&v| vec![v]).collect::<Vec<_>>()).unwrap());
        let out = pointwise_certificate(&input, lam, n, &ext, &CertificateOptions::default()).unwrap();
        let oracle = commutative_oracle(&a, &mu, Some(&p), lam, n);
        prop_assert!((out.solution.objective - oracle.optimum).abs() <= 1e-8);
        let ex = &out.extraction;
        let kept = if ex.smallest_kept.is_finite() { ex.smallest_kept } else { 1.0 };
        let dropped = if ex.largest_dropped.is_finite() { ex.largest_dropped.max(0.0) } else { 0.0 };
        if kept - dropped > 10.0 * ex.eps_kernel {
            let e: Vec<f64> = out.certificate.projection.blocks().iter().map(|b| b[(0, 0)].re).collect();
            prop_assert_eq!(e, oracle.indicator);
        }
    }

    #[test]
    fn objective_agrees_with_direct_evaluation(sig in signature(), seed in any::<u64>(), lam in lambda(), k in 1usize..6) {
        let s = setup(seed, &sig);
        let point = random_feasible_point(derive_seed(seed, 9), &sig, k);
        let g = objective_g(&point, &s.input, lam, &s.ext).unwrap();
        let by_hand = objective_by_hand(&point, s.input.rep(), lam, &s.ext);
        prop_assert!((g - by_hand).abs() <= 1e-10 * by_hand.abs().max(1.0));
    }

    #[test]
    fn feasible_points_sit_below_the_dual_bound(sig in signature(), seed in any::<u64>(), lam in lambda(), k in 1usize..6) {
        let s = setup(seed, &sig);
        let point = random_feasible_point(derive_seed(seed, 10), &sig, k);
        let g = objective_g(&point, &s.input, lam, &s.ext).unwrap();
        let blocks = ncmaxerg::maxerg::penalty_blocks(&s.ext, &s.input.hermitian().unwrap(), lam, k - 1);
        prop_assert!(g <= dual_upper_bound(&blocks, None).unwrap() + 1e-10);
    }

    #[test]
    fn passing_certificates_satisfy_the_inequalities(sig in signature(), seed in any::<u64>(), lam in lambda(), n in 0usize..8) {
        let s = setup(seed, &sig);
        let out = pointwise_certificate(&s.input, lam, n, &s.ext, &CertificateOptions::default()).unwrap();
        prop_assert!(out.certificate.pass);
        let e = &out.certificate.projection;
        let tol = out.certificate.tolerance;
        let rho = s.state.rho();
        let table = s.ext.cesaro_table_hermitian(&s.input.hermitian().unwrap(), n);
        for avg in &table {
            let lhs = rho.congruence(e).scale(lam).sub(&avg.congruence(e));
            prop_assert!(min_eigenvalue(&lhs).unwrap() >= -tol);
        }
        let complement = Hermitian::identity(&sig).sub(e);
        prop_assert!(rho.trace_with(&complement) <= 2.0 / lam * s.input.integral().re + tol);
        // 1 − e_n = (1 − e_n) Σ x̄_r
        let defect = complement.sub(&Hermitian::symmetrized(&(complement.matrix() * out.solution.point.sum().matrix())));
        prop_assert!(defect.matrix().max_abs() <= 1e-7);
    }

    #[test]
    fn kernels_are_scale_covariant(sig in signature(), seed in any::<u64>(), lam in lambda(), n in 0usize..6, c in prop_oneof![Just(0.1), Just(3.0), Just(10.0)]) {
        let s = setup(seed, &sig);
        let scaled = LOneElement::new(s.input.rep().scale(c));
        let opts = CertificateOptions::default();
        let base = pointwise_certificate(&s.input, lam, n, &s.ext, &opts).unwrap();
        let other = pointwise_certificate(&scaled, c * lam, n, &s.ext, &opts).unwrap();
        let gapped = |ex: &ncmaxerg::maxerg::Extraction| {
            let kept = if ex.smallest_kept.is_finite() { ex.smallest_kept } else { 1.0 };
            let dropped = if ex.largest_dropped.is_finite() { ex.largest_dropped.max(0.0) } else { 0.0 };
            kept - dropped > 10.0 * ex.eps_kernel
        };
        if gapped(&base.extraction) && gapped(&other.extraction) {
            same_kernel(&base, &other)?;
        }
    }

    #[test]
    fn maximally_mixed_state_reduces_to_the_trace(n_dim in 2usize..5, seed in any::<u64>(), lam in lambda()) {
        let sig = vec![n_dim];
        let algebra = Algebra::new(sig.clone()).unwrap();
        let weight = Weight::tracial(&algebra);
        let state = State::maximally_mixed(&algebra).unwrap();
        let map = random_certified_map(derive_seed(seed, 1), &algebra, &weight).unwrap();
        let on_state = extend_l1(&map, &state).unwrap();
        let on_trace = extend_l1(&map, &weight).unwrap();
        let input = LOneElement::new(random_psd(&mut seeded_rng(seed), &sig, None).into_matrix());
        let scaled = lam / n_dim as f64;
        let opts = UniformOptions::default();
        let yeadon_pointwise = match yeadon_tracial(&input, scaled, 6, &on_trace, &opts) {
            Ok(u) => Some(u.pointwise),
            Err(Error::NoStableLimit { .. }) => None,
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        for level in 1..=6 {
            let general = pointwise_certificate(&input, lam, level, &on_state, &opts.certificate).unwrap();
            let tracial = pointwise_certificate(&input, scaled, level, &on_trace, &opts.certificate).unwrap();
            same_kernel(&general, &tracial)?;
            if let Some(p) = &yeadon_pointwise {
                same_kernel(&general, &p[level - 1])?;
            }
        }
    }
}
