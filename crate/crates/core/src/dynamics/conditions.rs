use std::fmt;

use super::model::{Pedigree, PositiveMapModel};
use crate::error::Result;
use crate::matalg::{eigh, eigh_block, BlockMatrix, Hermitian, Mat};
use crate::random::{random_rank_one, seeded_rng};
use crate::vna::Reference;

/// Seed of the positivity sampler; fixed so reports are reproducible.
const POSITIVITY_SEED: u64 = 0x005E_ED0F_7057;
const REFINEMENT_STEPS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Exact,
    Sampled,
    Failed,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConditionCheck {
    pub verdict: Verdict,
    /// Smallest eigenvalue of the defining difference; `None` when attested by construction.
    pub slack: Option<f64>,
}

impl ConditionCheck {
    pub fn passed(&self) -> bool {
        self.verdict != Verdict::Failed
    }
}

/// Verdicts for contraction `T(1) ⪯ 1`, positivity, and `T†(d) ⪯ d`.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConditionReport {
    pub contraction: ConditionCheck,
    pub positivity: ConditionCheck,
    pub trace_decrease: ConditionCheck,
    pub tol: f64,
}

impl ConditionReport {
    pub fn all_passed(&self) -> bool {
        self.contraction.passed() && self.positivity.passed() && self.trace_decrease.passed()
    }
}

impl fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |c: &ConditionCheck| match c.slack {
            Some(s) => format!("{:?} (slack {s:e})", c.verdict),
            None => format!("{:?}", c.verdict),
        };
        write!(
            f,
            "contraction {}, positivity {}, trace decrease {}",
            show(&self.contraction),
            show(&self.positivity),
            show(&self.trace_decrease)
        )
    }
}

fn exact_check(diff: &Hermitian, tol: f64) -> Result<ConditionCheck> {
    let spec = eigh(diff)?;
    let slack = spec.min();
    let verdict = if slack >= -tol * spec.spectral_radius().max(1.0) { Verdict::Exact } else { Verdict::Failed };
    Ok(ConditionCheck { verdict, slack: Some(slack) })
}

/// Verify `T(1) ⪯ 1`, positivity, and `T†(d) ⪯ d` against the reference density `d`.
///
/// Positivity is attested for constructed maps; otherwise `samples` random
/// rank-one projections are pushed through `T` and each is refined by
/// alternating minimization of `w* T(vv*) w`.
pub fn check_conditions(
    map: &PositiveMapModel,
    reference: &Reference,
    samples: usize,
    tol: f64,
) -> Result<ConditionReport> {
    let algebra = reference.algebra();
    algebra.check(&BlockMatrix::zeros(map.dims()))?;
    let one = algebra.identity();
    let t_one = map.apply_hermitian(&one);
    let contraction = exact_check(&one.sub(&t_one), tol)?;

    let d = reference.density();
    let t_dag_d = Hermitian::symmetrized(&map.trace_adjoint().apply(d.matrix()));
    let trace_decrease = exact_check(&d.sub(&t_dag_d), tol)?;

    let positivity = match map.pedigree() {
        Pedigree::ConstructedPositive => ConditionCheck { verdict: Verdict::Exact, slack: None },
        _ => sample_positivity(map, samples, tol)?,
    };
    Ok(ConditionReport { contraction, positivity, trace_decrease, tol })
}

fn sample_positivity(map: &PositiveMapModel, samples: usize, tol: f64) -> Result<ConditionCheck> {
    let dims = map.dims().to_vec();
    let adjoint = map.trace_adjoint();
    let mut rng = seeded_rng(POSITIVITY_SEED);
    let mut worst = f64::INFINITY;
    for _ in 0..samples.max(1) {
        let mut v = random_rank_one(&mut rng, &dims);
        let mut value = f64::INFINITY;
        for _ in 0..REFINEMENT_STEPS {
            let image = map.apply_hermitian(&v);
            let (w, lo) = lowest_eigenprojection(&image)?;
            value = value.min(lo);
            let pulled = Hermitian::symmetrized(&adjoint.apply(w.matrix()));
            let (next, _) = lowest_eigenprojection(&pulled)?;
            v = next;
        }
        let image = map.apply_hermitian(&v);
        value = value.min(eigh(&image)?.min());
        worst = worst.min(value);
    }
    let verdict = if worst >= -tol { Verdict::Sampled } else { Verdict::Failed };
    Ok(ConditionCheck { verdict, slack: Some(worst) })
}

/// Rank-one projection onto an eigenvector of the smallest eigenvalue across blocks.
fn lowest_eigenprojection(a: &Hermitian) -> Result<(Hermitian, f64)> {
    let mut best = (0, f64::INFINITY, Mat::zeros(1, 1));
    for (bi, block) in a.blocks().iter().enumerate() {
        let spec = eigh_block(block)?;
        if spec.values[0] < best.1 {
            best = (bi, spec.values[0], spec.vectors.columns(0, 1).into_owned());
        }
    }
    let mut blocks: Vec<Mat> = a.dims().iter().map(|&n| Mat::zeros(n, n)).collect();
    blocks[best.0] = &best.2 * best.2.adjoint();
    Ok((Hermitian::symmetrized(&BlockMatrix::from_blocks_unchecked(blocks)), best.1))
}
