use crate::dynamics::{ExtendedMap, PositiveMapModel};
use crate::error::{Error, Result};
use crate::matalg::{max_eigenvalue, op_norm, schatten_norm, BlockMatrix, Hermitian};
use crate::random::{random_psd, seeded_rng};

/// Outcome of a type predicate with the slack of each displayed condition.
#[derive(Clone, Debug, PartialEq)]
pub struct PredicateOutcome {
    pub holds: bool,
    /// `(c‖x‖_p/λ)^p − φ(1 − e)`.
    pub mass_slack: f64,
    /// Worst slack of the per-`n` condition over `n ≤ horizon`.
    pub order_slack: f64,
}

pub const PREDICATE_TOL: f64 = 1e-9;

struct Averages {
    table: Vec<BlockMatrix>,
    norm: f64,
}

fn averages(x: &BlockMatrix, p: f64, ext: &ExtendedMap, horizon: usize) -> Result<Averages> {
    if p.is_nan() || p < 1.0 || p.is_infinite() {
        return Err(Error::InvalidExponent(p));
    }
    if x.dims() != ext.dims() {
        return Err(Error::DimensionMismatch(format!(
            "element has signature {:?}, map acts on {:?}",
            x.dims(),
            ext.dims()
        )));
    }
    let tp = ext.lp_action(p)?;
    let mut table = Vec::with_capacity(horizon + 1);
    let mut power = x.clone();
    let mut sum = x.clone();
    table.push(x.clone());
    for r in 1..=horizon {
        power = tp.apply(&power);
        sum = &sum + &power;
        table.push(sum.scale(1.0 / (r as f64 + 1.0)));
    }
    Ok(Averages { table, norm: schatten_norm(x, p)? })
}

fn mass_slack(e: &Hermitian, norm: f64, lambda: f64, c: f64, p: f64, ext: &ExtendedMap) -> f64 {
    let one = Hermitian::identity(&e.dims());
    let mass = ext.reference().density().trace_with(&one.sub(e));
    (c * norm / lambda).powf(p) - mass
}

/// `φ(1 − e) ≤ (c‖x‖_p/λ)^p` and `e S_n(x) e ⪯ λ 1` for all `n ≤ horizon`.
///
/// `x` is an L^p representative and `S_n` averages `T_p`; both conditions are evaluated as displayed.
pub fn weak_type_predicate(
    e: &Hermitian,
    x: &BlockMatrix,
    lambda: f64,
    c: f64,
    p: f64,
    ext: &ExtendedMap,
    horizon: usize,
) -> Result<PredicateOutcome> {
    let av = averages(x, p, ext, horizon)?;
    let mass = mass_slack(e, av.norm, lambda, c, p, ext);
    let mut order = f64::INFINITY;
    for s in &av.table {
        let compressed = Hermitian::symmetrized(&s.sandwich(e.matrix()));
        order = order.min(lambda - max_eigenvalue(&compressed)?);
    }
    let tol = PREDICATE_TOL * lambda.max(1.0);
    Ok(PredicateOutcome { holds: mass >= -tol && order >= -tol, mass_slack: mass, order_slack: order })
}

/// `φ(1 − e) ≤ (c‖x‖_p/λ)^p` and `‖e S_n(x) e‖_p ≤ λ` for all `n ≤ horizon`.
pub fn pre_weak_type_predicate(
    e: &Hermitian,
    x: &BlockMatrix,
    lambda: f64,
    c: f64,
    p: f64,
    ext: &ExtendedMap,
    horizon: usize,
) -> Result<PredicateOutcome> {
    let av = averages(x, p, ext, horizon)?;
    let mass = mass_slack(e, av.norm, lambda, c, p, ext);
    let mut order = f64::INFINITY;
    for s in &av.table {
        order = order.min(lambda - schatten_norm(&s.sandwich(e.matrix()), p)?);
    }
    let tol = PREDICATE_TOL * lambda.max(1.0);
    Ok(PredicateOutcome { holds: mass >= -tol && order >= -tol, mass_slack: mass, order_slack: order })
}

/// Seed of the sampled positives in `type_infinity_check`.
const TYPE_INFINITY_SEED: u64 = 0x007E_571F;
pub const TYPE_INFINITY_HORIZON: usize = 20;

/// Largest excess `‖S_r(x)‖ − ‖x‖` over `x = 1` and `samples` random positives, `r ≤ 20`.
pub fn type_infinity_excess(map: &PositiveMapModel, samples: usize) -> Result<f64> {
    let dims = map.dims().to_vec();
    let mut rng = seeded_rng(TYPE_INFINITY_SEED);
    let mut inputs = vec![Hermitian::identity(&dims)];
    inputs.extend((0..samples).map(|_| random_psd(&mut rng, &dims, None)));
    let mut worst = f64::NEG_INFINITY;
    for x in inputs {
        let x_norm = op_norm(&x)?;
        let mut power = x.matrix().clone();
        let mut sum = power.clone();
        for r in 0..=TYPE_INFINITY_HORIZON {
            if r > 0 {
                power = map.apply(&power);
                sum = &sum + &power;
            }
            let avg = Hermitian::symmetrized(&sum.scale(1.0 / (r as f64 + 1.0)));
            worst = worst.max((op_norm(&avg)? - x_norm) / x_norm.max(1.0));
        }
    }
    Ok(worst)
}

/// `‖S_r(x)‖ ≤ ‖x‖` within `1e-9` on the sampled positives.
pub fn type_infinity_check(map: &PositiveMapModel, samples: usize) -> Result<bool> {
    Ok(type_infinity_excess(map, samples)? <= PREDICATE_TOL)
}
