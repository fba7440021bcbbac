use super::conditions::{check_conditions, Verdict};
use super::model::{Pedigree, PositiveMapModel};
use crate::error::{Error, Result};
use crate::matalg::{BlockMatrix, Hermitian, SuperOp};
use crate::vna::{LOneElement, Reference};

/// Samples used for the positivity check inside `extend_l1`.
pub const EXTENSION_SAMPLES: usize = 64;
pub const EXTENSION_TOL: f64 = 1e-9;

/// `T` together with its L¹ extension `T₁(a) = d^{1/2} T(d^{-1/2} a d^{-1/2}) d^{1/2}`
/// and the adjoint `T̃` defined by `Tr(T₁(a) x) = Tr(a T̃(x))`.
#[derive(Clone, Debug)]
pub struct ExtendedMap {
    base: PositiveMapModel,
    reference: Reference,
    l1: SuperOp,
    adjoint: SuperOp,
}

pub fn extend_l1(map: &PositiveMapModel, reference: impl Into<Reference>) -> Result<ExtendedMap> {
    let reference = reference.into();
    let report = check_conditions(map, &reference, EXTENSION_SAMPLES, EXTENSION_TOL)?;
    if !report.all_passed() {
        return Err(Error::ConditionsNotMet(Box::new(report)));
    }
    let mut base = map.clone();
    if report.positivity.verdict == Verdict::Sampled {
        base.set_pedigree(Pedigree::SampledPositive);
    }
    let l1 = lp_conjugated(&base, &reference, 1.0);
    let adjoint = l1.hs_adjoint();
    Ok(ExtendedMap { base, reference, l1, adjoint })
}

fn lp_conjugated(map: &PositiveMapModel, reference: &Reference, p: f64) -> SuperOp {
    let s = 1.0 / (2.0 * p);
    let up = SuperOp::sandwich(reference.power(s).matrix());
    let down = SuperOp::sandwich(reference.power(-s).matrix());
    up.compose(map.superop()).compose(&down)
}

/// The adjoint map `T̃` on the algebra.
pub fn adjoint_map(ext: &ExtendedMap) -> &SuperOp {
    &ext.adjoint
}

impl ExtendedMap {
    pub fn base(&self) -> &PositiveMapModel {
        &self.base
    }

    pub fn reference(&self) -> &Reference {
        &self.reference
    }

    pub fn dims(&self) -> &[usize] {
        self.base.dims()
    }

    pub fn l1_superop(&self) -> &SuperOp {
        &self.l1
    }

    pub fn adjoint_superop(&self) -> &SuperOp {
        &self.adjoint
    }

    /// `T_p = K(d^{1/(2p)}) ∘ T ∘ K(d^{-1/(2p)})` on L^p representatives.
    pub fn lp_action(&self, p: f64) -> Result<SuperOp> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidExponent(p));
        }
        if p.is_infinite() {
            return Ok(self.base.superop().clone());
        }
        Ok(lp_conjugated(&self.base, &self.reference, p))
    }

    pub fn apply_l1(&self, a: &BlockMatrix) -> BlockMatrix {
        self.l1.apply(a)
    }

    pub fn apply_adjoint(&self, x: &BlockMatrix) -> BlockMatrix {
        self.adjoint.apply(x)
    }

    /// `S_0(a), …, S_{r_max}(a)` from one pass over the orbit `a, T₁a, T₁²a, …`.
    pub fn cesaro_table(&self, a: &BlockMatrix, r_max: usize) -> Vec<BlockMatrix> {
        let mut out = Vec::with_capacity(r_max + 1);
        let mut power = a.clone();
        let mut sum = a.clone();
        out.push(a.clone());
        for r in 1..=r_max {
            power = self.l1.apply(&power);
            sum = &sum + &power;
            out.push(sum.scale(1.0 / (r as f64 + 1.0)));
        }
        out
    }

    /// Cesàro table of a self-adjoint element, symmetrized.
    pub fn cesaro_table_hermitian(&self, a: &Hermitian, r_max: usize) -> Vec<Hermitian> {
        self.cesaro_table(a.matrix(), r_max).iter().map(Hermitian::symmetrized).collect()
    }
}

/// `S_r(a) = (1/(r+1)) Σ_{k ≤ r} T₁ᵏ(a)`.
pub fn cesaro(ext: &ExtendedMap, a: &LOneElement, r: usize) -> LOneElement {
    let table = ext.cesaro_table(a.rep(), r);
    LOneElement::new(table.into_iter().last().expect("table has r+1 entries"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::random_certified_map;
    use crate::random::{random_block_matrix, random_density, random_psd, seeded_rng};
    use crate::vna::{embed_l1, make_state, Algebra, State};

    fn setup(seed: u64) -> (State, ExtendedMap) {
        let alg = Algebra::new(vec![2, 3]).unwrap();
        let mut rng = seeded_rng(seed);
        let st = make_state(&alg, random_density(&mut rng, alg.signature(), 0.05)).unwrap();
        let t = random_certified_map(seed, &alg, &st).unwrap();
        let ext = extend_l1(&t, &st).unwrap();
        (st, ext)
    }

    #[test]
    fn identity_extends_to_identity() {
        let alg = Algebra::full(3).unwrap();
        let mut rng = seeded_rng(1);
        let st = make_state(&alg, random_density(&mut rng, &[3], 0.1)).unwrap();
        let ext = extend_l1(&PositiveMapModel::identity(&alg), &st).unwrap();
        assert!(ext.l1_superop().max_abs_diff(&SuperOp::identity(&[3])) < 1e-12);
        assert!(ext.adjoint_superop().max_abs_diff(&SuperOp::identity(&[3])) < 1e-12);
        let a = LOneElement::new(random_psd(&mut rng, &[3], None).into_matrix());
        for r in [0, 1, 5] {
            assert!(cesaro(&ext, &a, r).rep().max_abs_diff(a.rep()) < 1e-12);
        }
    }

    #[test]
    fn intertwines_embedding() {
        for seed in 0..5 {
            let (st, ext) = setup(seed);
            let mut rng = seeded_rng(100 + seed);
            let x = random_block_matrix(&mut rng, st.algebra().signature());
            let lhs = ext.apply_l1(embed_l1(&x, &st).unwrap().rep());
            let rhs = embed_l1(&ext.base().apply(&x), &st).unwrap();
            assert!(lhs.max_abs_diff(rhs.rep()) < 1e-10);
        }
    }

    #[test]
    fn trace_decrease_and_duality() {
        for seed in 0..5 {
            let (st, ext) = setup(seed);
            let mut rng = seeded_rng(200 + seed);
            for _ in 0..20 {
                let a = random_psd(&mut rng, st.algebra().signature(), None);
                let ta = ext.apply_l1(a.matrix());
                assert!(ta.trace().re <= a.trace() + 1e-10);
                let x = random_block_matrix(&mut rng, st.algebra().signature());
                let lhs = ta.trace_product(&x);
                let rhs = a.matrix().trace_product(&ext.apply_adjoint(&x));
                assert!((lhs - rhs).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn unital_map_fixes_density() {
        let alg = Algebra::full(2).unwrap();
        let st = make_state(&alg, Hermitian::from_diagonals(&[vec![0.7, 0.3]]).unwrap()).unwrap();
        // x ↦ ½x + ½ZxZ is the diagonal pinching, a unital map
        let pinch = PositiveMapModel::from_kraus(
            &alg,
            &[
                crate::dynamics::KrausTerm {
                    from_block: 0,
                    to_block: 0,
                    weight: 0.5,
                    op: crate::matalg::Mat::identity(2, 2),
                },
                crate::dynamics::KrausTerm {
                    from_block: 0,
                    to_block: 0,
                    weight: 0.5,
                    op: crate::matalg::Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![
                        crate::matalg::C64::new(1.0, 0.0),
                        crate::matalg::C64::new(-1.0, 0.0),
                    ])),
                },
            ],
        )
        .unwrap();
        let ext = extend_l1(&pinch, &st).unwrap();
        assert!(ext.apply_l1(st.rho().matrix()).max_abs_diff(st.rho().matrix()) < 1e-14);
    }

    #[test]
    fn telescoping_identity() {
        for seed in 0..5 {
            let (st, ext) = setup(seed);
            let mut rng = seeded_rng(300 + seed);
            let a = random_psd(&mut rng, st.algebra().signature(), None);
            let table = ext.cesaro_table(a.matrix(), 21);
            for r in 0..=20 {
                let lhs = &table[r + 1].scale(r as f64 + 2.0) - &ext.apply_l1(&table[r]).scale(r as f64 + 1.0);
                assert!(lhs.max_abs_diff(a.matrix()) < 1e-9, "r = {r}");
            }
        }
    }

    #[test]
    fn adjoint_unit_bounded() {
        for seed in 0..10 {
            let (_, ext) = setup(seed);
            let one = BlockMatrix::identity(ext.dims());
            let t1 = Hermitian::symmetrized(&ext.apply_adjoint(&one));
            let gap = Hermitian::identity(ext.dims()).sub(&t1);
            assert!(crate::matalg::min_eigenvalue(&gap).unwrap() >= -1e-9);
        }
    }

    #[test]
    fn lp_action_endpoints() {
        let (_, ext) = setup(3);
        assert!(ext.lp_action(1.0).unwrap().max_abs_diff(ext.l1_superop()) < 1e-12);
        assert_eq!(&ext.lp_action(f64::INFINITY).unwrap(), ext.base().superop());
        assert!(ext.lp_action(0.5).is_err());
    }
}
