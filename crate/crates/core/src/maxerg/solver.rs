//! Maximization of `Σ Tr(B_r x_r)` over `K = {x_r ⪰ 0, Σ x_r ⪯ 1}`.
//!
//! The problem separates over algebra blocks. Each block is warm-started on
//! the log-barrier central path and then polished by cyclic block-coordinate
//! ascent with the exact update `x_r = C^{1/2} P₊(C^{1/2} B_r C^{1/2}) C^{1/2}`,
//! `C = 1 − Σ_{s≠r} x_s`. The dual `min Tr Z, Z ⪰ B_r, Z ⪰ 0` bounds the optimum.
//! A final purification compresses each `x_r` onto the near-kernel of `Z − B_r`
//! and repeats the ascent there, which removes the residual barrier mass the
//! cyclic updates cannot move.

use nalgebra::DVector;

use super::objective::{penalty_blocks_from_table, KPoint};
use crate::dynamics::ExtendedMap;
use crate::error::{Error, Result};
use crate::matalg::{eigh_block, hermitize, BlockMatrix, Hermitian, Mat, C64};
use crate::vna::LOneElement;

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    /// Stop when the relative objective change over a sweep falls below this.
    pub tol_obj: f64,
    /// Stop when the duality gap falls below `tol_gap · scale`.
    pub tol_gap: f64,
    pub max_sweeps: usize,
    pub min_sweeps: usize,
    /// Keep sweeping while some entry of `Σ x_r` moves by more than `tol_step` per sweep.
    pub tol_step: f64,
    /// Flag `Stalled` if the gap is still above `stall_gap · scale` after `max_sweeps`.
    pub stall_gap: f64,
    /// Run the barrier warm start before the ascent sweeps.
    pub warm_start: bool,
    /// Eigenvalues of `C` below this are treated as outside its range.
    pub range_floor: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_obj: 1e-10,
            tol_gap: 1e-8,
            max_sweeps: 500,
            min_sweeps: 2,
            tol_step: 1e-11,
            stall_gap: 1e-4,
            warm_start: true,
            range_floor: 1e-13,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// Every `B_r ⪯ 0`; the zero point is optimal.
    Trivial,
    Converged,
    Stalled,
}

#[derive(Clone, Debug)]
pub struct MaximizerSolution {
    pub point: KPoint,
    pub objective: f64,
    pub dual_bound: f64,
    pub gap: f64,
    pub sweeps: usize,
    /// Objective at the start point followed by the value after each sweep.
    pub sweep_objectives: Vec<f64>,
    pub blocks_b: Vec<Hermitian>,
    pub status: SolveStatus,
    pub scale: f64,
}

pub fn solve_maximizer(
    a: &LOneElement,
    lambda: f64,
    n: usize,
    ext: &ExtendedMap,
    opts: &SolverOptions,
) -> Result<MaximizerSolution> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    if a.rep().dims() != ext.dims() {
        return Err(Error::DimensionMismatch(format!(
            "input has signature {:?}, map acts on {:?}",
            a.rep().dims(),
            ext.dims()
        )));
    }
    let a = a.hermitian()?;
    let table = ext.cesaro_table_hermitian(&a, n);
    solve_blocks(penalty_blocks_from_table(&table, ext.reference().density(), lambda, n), opts)
}

/// Solve for given penalty blocks `B_0, …, B_n`.
pub fn solve_blocks(blocks_b: Vec<Hermitian>, opts: &SolverOptions) -> Result<MaximizerSolution> {
    let first = blocks_b.first().ok_or_else(|| Error::InvalidArgument("no penalty blocks".into()))?;
    let dims = first.dims();
    if blocks_b.iter().any(|b| b.dims() != dims) {
        return Err(Error::DimensionMismatch("penalty blocks have different signatures".into()));
    }
    let k = blocks_b.len();
    let nb = dims.len();
    // per algebra block, the list B_{0..n}
    let bs: Vec<Vec<Mat>> = (0..nb).map(|j| blocks_b.iter().map(|b| b.blocks()[j].clone()).collect()).collect();

    let mut scale: f64 = 1.0;
    let mut active = vec![false; nb];
    for (j, list) in bs.iter().enumerate() {
        for b in list {
            let spec = eigh_block(b)?;
            scale = scale.max(spec.values[0].abs()).max(spec.values[spec.values.len() - 1].abs());
            if *spec.values.last().unwrap() > 0.0 {
                active[j] = true;
            }
        }
    }

    let mut xs: Vec<Vec<Mat>> = dims.iter().map(|&m| vec![Mat::zeros(m, m); k]).collect();
    if !active.iter().any(|&a| a) {
        return Ok(MaximizerSolution {
            point: assemble(&dims, &xs),
            objective: 0.0,
            dual_bound: 0.0,
            gap: 0.0,
            sweeps: 0,
            sweep_objectives: vec![0.0],
            blocks_b,
            status: SolveStatus::Trivial,
            scale,
        });
    }

    let mut barrier_duals: Vec<Option<Mat>> = vec![None; nb];
    if opts.warm_start {
        for j in (0..nb).filter(|&j| active[j]) {
            if let Some((x, z)) = barrier_path(&bs[j], scale) {
                xs[j] = x;
                barrier_duals[j] = Some(z);
            }
        }
    }

    let mut sweep_objectives = vec![objective_of(&bs, &xs)];
    let mut run = ascend(&bs, &active, &mut xs, &barrier_duals, opts, scale)?;
    sweep_objectives.extend(&run.objectives);

    // complementary slackness: x_r vanishes where Z ≻ B_r; the barrier leaves
    // residual mass there that the ascent cannot move
    for slack in [1e-6, 1e-9, 1e-12] {
        let Some((mut purified, restricted)) = purify(&bs, &active, &xs, &barrier_duals, slack * scale, scale)? else {
            break;
        };
        let second = ascend(&restricted, &active, &mut purified, &barrier_duals, opts, scale)?;
        let obj = objective_of(&bs, &purified);
        if obj >= *sweep_objectives.last().unwrap() {
            let mut dual_bound = 0.0;
            for j in 0..nb {
                dual_bound += block_dual(&bs[j], &purified[j], barrier_duals[j].as_ref())?;
            }
            xs = purified;
            sweep_objectives.push(obj);
            run.sweeps += second.sweeps;
            run.dual_bound = run.dual_bound.min(dual_bound);
        }
    }
    let objective = *sweep_objectives.last().unwrap();
    Ok(MaximizerSolution {
        point: assemble(&dims, &xs),
        objective,
        dual_bound: run.dual_bound,
        gap: (run.dual_bound - objective).max(0.0),
        sweeps: run.sweeps,
        sweep_objectives,
        blocks_b,
        status: run.status,
        scale,
    })
}

fn objective_of(bs: &[Vec<Mat>], xs: &[Vec<Mat>]) -> f64 {
    xs.iter().zip(bs).flat_map(|(xl, bl)| xl.iter().zip(bl).map(|(x, b)| trace_product_re(b, x))).sum()
}

struct Ascent {
    objectives: Vec<f64>,
    dual_bound: f64,
    sweeps: usize,
    status: SolveStatus,
}

fn ascend(
    bs: &[Vec<Mat>],
    active: &[bool],
    xs: &mut [Vec<Mat>],
    barrier_duals: &[Option<Mat>],
    opts: &SolverOptions,
    scale: f64,
) -> Result<Ascent> {
    let nb = bs.len();
    let k = bs[0].len();
    let mut objectives = Vec::new();
    let mut prev = objective_of(bs, xs);
    let mut dual_bound = f64::INFINITY;
    let mut sweeps = 0;
    let mut status = SolveStatus::Converged;
    for sweep in 1..=opts.max_sweeps.max(1) {
        let mut step = 0.0f64;
        for j in (0..nb).filter(|&j| active[j]) {
            let m = bs[j][0].nrows();
            let start = xs[j].iter().fold(Mat::zeros(m, m), |acc, x| acc + x);
            let mut total = start.clone();
            for r in 0..k {
                let c = Mat::identity(m, m) - (&total - &xs[j][r]);
                let updated = block_update(&c, &bs[j][r], opts.range_floor, 1e-14 * scale)?;
                total = total - &xs[j][r] + &updated;
                xs[j][r] = updated;
            }
            step = step.max((&total - &start).iter().map(|v| v.norm()).fold(0.0, f64::max));
        }
        sweeps = sweep;
        let obj = objective_of(bs, xs);
        objectives.push(obj);

        dual_bound = 0.0;
        for j in 0..nb {
            dual_bound += block_dual(&bs[j], &xs[j], barrier_duals[j].as_ref())?;
        }
        let gap = dual_bound - obj;
        let settled = (obj - prev).abs() <= opts.tol_obj * obj.abs().max(1.0);
        prev = obj;
        let still = step <= opts.tol_step;
        if sweep >= opts.min_sweeps && still && (settled || gap <= opts.tol_gap * scale) {
            break;
        }
        if sweep == opts.max_sweeps && gap > opts.stall_gap * scale {
            status = SolveStatus::Stalled;
        }
    }
    Ok(Ascent { objectives, dual_bound, sweeps, status })
}

/// Compress each `x_r` onto the near-kernel `Q_r` of `Z − B_r` for the repaired
/// barrier dual `Z`, rescaled back into `K`, together with the restricted blocks
/// `Q_r B_r Q_r − M(1 − Q_r)`. `None` if no block has a usable dual.
#[allow(clippy::type_complexity)]
fn purify(
    bs: &[Vec<Mat>],
    active: &[bool],
    xs: &[Vec<Mat>],
    barrier_duals: &[Option<Mat>],
    slack: f64,
    scale: f64,
) -> Result<Option<(Vec<Vec<Mat>>, Vec<Vec<Mat>>)>> {
    let penalty = 10.0 * scale;
    let mut out = xs.to_vec();
    let mut restricted = bs.to_vec();
    let mut changed = false;
    for j in (0..bs.len()).filter(|&j| active[j]) {
        let Some(z) = tightest_dual(&bs[j], &xs[j], barrier_duals[j].as_ref())? else { continue };
        let m = z.nrows();
        let eye = Mat::identity(m, m);
        for ((x, b), rb) in out[j].iter_mut().zip(&bs[j]).zip(restricted[j].iter_mut()) {
            let keep = spectral_map(&(&z - b), |s| if s <= slack { 1.0 } else { 0.0 })?;
            *x = hermitize(&(&keep * &*x * &keep));
            *rb = hermitize(&(&keep * b * &keep - (&eye - &keep) * C64::new(penalty, 0.0)));
        }
        let total = out[j].iter().fold(Mat::zeros(m, m), |acc, x| acc + x);
        let top = *eigh_block(&total)?.values.last().unwrap();
        if top > 1.0 {
            for x in out[j].iter_mut() {
                *x *= C64::new(1.0 / top, 0.0);
            }
        }
        changed = true;
    }
    Ok(changed.then_some((out, restricted)))
}

/// Upper bound `Tr Z` from a dual-feasible `Z ⪰ B_r, Z ⪰ 0`.
///
/// Always considers `Z = Σ (B_r)₊`; a `hint` is repaired into a feasible point by
/// `Z ← Z + (B_r − Z)₊` over `r` and then `Z ← Z + (−Z)₊`, and used if smaller.
pub fn dual_upper_bound(blocks_b: &[Hermitian], hint: Option<&Hermitian>) -> Result<f64> {
    let first = match blocks_b.first() {
        Some(b) => b,
        None => return Ok(0.0),
    };
    let dims = first.dims();
    let mut total = 0.0;
    for j in 0..dims.len() {
        let list: Vec<Mat> = blocks_b.iter().map(|b| b.blocks()[j].clone()).collect();
        let mut best = list.iter().map(positive_trace).sum::<Result<f64>>()?;
        if let Some(h) = hint {
            if let Some(z) = repair_dual(h.blocks()[j].clone(), &list)? {
                best = best.min(z.trace().re);
            }
        }
        total += best;
    }
    Ok(total)
}

fn assemble(dims: &[usize], xs: &[Vec<Mat>]) -> KPoint {
    let k = xs.first().map_or(0, |v| v.len());
    let points = (0..k)
        .map(|r| Hermitian::symmetrized(&BlockMatrix::from_blocks_unchecked(xs.iter().map(|l| l[r].clone()).collect())))
        .collect();
    debug_assert_eq!(xs.len(), dims.len());
    KPoint { xs: points }
}

fn trace_product_re(a: &Mat, b: &Mat) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for l in 0..n {
            acc += (a[(i, l)] * b[(l, i)]).re;
        }
    }
    acc
}

fn positive_trace(b: &Mat) -> Result<f64> {
    Ok(eigh_block(b)?.values.iter().map(|v| v.max(0.0)).sum())
}

fn spectral_map(m: &Mat, f: impl Fn(f64) -> f64) -> Result<Mat> {
    let spec = eigh_block(m)?;
    let mut scaled = spec.vectors.clone();
    for (j, &s) in spec.values.iter().enumerate() {
        let fs = C64::new(f(s), 0.0);
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= fs;
        }
    }
    Ok(hermitize(&(scaled * spec.vectors.adjoint())))
}

/// Exact maximizer of `Tr(B x)` over `0 ⪯ x ⪯ C`.
fn block_update(c: &Mat, b: &Mat, range_floor: f64, positive_floor: f64) -> Result<Mat> {
    let c_half = spectral_map(c, |s| if s > range_floor { s.sqrt() } else { 0.0 })?;
    let inner = hermitize(&(&c_half * b * &c_half));
    let p = spectral_map(&inner, |s| if s > positive_floor { 1.0 } else { 0.0 })?;
    Ok(hermitize(&(&c_half * p * &c_half)))
}

fn repair_dual(start: Mat, bs: &[Mat]) -> Result<Option<Mat>> {
    let mut z = hermitize(&start);
    for b in bs {
        let lift = spectral_map(&(b - &z), |s| s.max(0.0))?;
        z += lift;
    }
    let lift = spectral_map(&(-&z), |s| s.max(0.0))?;
    z += lift;
    // re-verify feasibility before trusting the bound
    let scale = z.iter().map(|v| v.norm()).fold(1.0, f64::max);
    let tol = 1e-12 * scale;
    if eigh_block(&z)?.values[0] < -tol {
        return Ok(None);
    }
    for b in bs {
        if eigh_block(&(&z - b))?.values[0] < -tol {
            return Ok(None);
        }
    }
    Ok(Some(z))
}

/// The repaired candidate of smallest trace among `Σ B_r x_r` and the barrier dual.
fn tightest_dual(bs: &[Mat], xs: &[Mat], barrier: Option<&Mat>) -> Result<Option<Mat>> {
    let m = bs[0].nrows();
    let complementary = bs.iter().zip(xs).fold(Mat::zeros(m, m), |acc, (b, x)| acc + b * x);
    let mut best: Option<Mat> = repair_dual(complementary, bs)?;
    if let Some(z0) = barrier {
        if let Some(z) = repair_dual(z0.clone(), bs)? {
            if best.as_ref().is_none_or(|b| z.trace().re < b.trace().re) {
                best = Some(z);
            }
        }
    }
    Ok(best)
}

fn block_dual(bs: &[Mat], xs: &[Mat], barrier: Option<&Mat>) -> Result<f64> {
    let plain = bs.iter().map(positive_trace).sum::<Result<f64>>()?;
    Ok(tightest_dual(bs, xs, barrier)?.map_or(plain, |z| plain.min(z.trace().re)))
}

/// Inverse and log-determinant of a positive definite matrix; `None` outside the cone.
fn inverse_logdet(m: &Mat) -> Option<(Mat, f64)> {
    let spec = eigh_block(m).ok()?;
    if !(spec.values[0] > 0.0) {
        return None;
    }
    let logdet = spec.values.iter().map(|v| v.ln()).sum();
    let mut scaled = spec.vectors.clone();
    for (j, &s) in spec.values.iter().enumerate() {
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= C64::new(1.0 / s, 0.0);
        }
    }
    Some((hermitize(&(scaled * spec.vectors.adjoint())), logdet))
}

fn barrier_value(bs: &[Mat], xs: &[Mat], mu: f64) -> Option<f64> {
    let m = bs[0].nrows();
    let mut value = 0.0;
    let mut total = Mat::zeros(m, m);
    for (b, x) in bs.iter().zip(xs) {
        value += trace_product_re(b, x) + mu * inverse_logdet(x)?.1;
        total += x;
    }
    value += mu * inverse_logdet(&(Mat::identity(m, m) - total))?.1;
    Some(value)
}

const BARRIER_SHRINK: f64 = 0.15;
const BARRIER_TARGET: f64 = 1e-13;
const CENTERING_DECREMENT: f64 = 1e-3;

/// One damped Newton step toward the `μ`-center. Returns `Ok(true)` once centered.
fn newton_step(bs: &[Mat], xs: &mut Vec<Mat>, y: &mut Mat, mu: f64) -> Option<bool> {
    let m = bs[0].nrows();
    let eye = Mat::identity(m, m);
    let total = xs.iter().fold(Mat::zeros(m, m), |acc, x| acc + x);
    *y = inverse_logdet(&(&eye - total))?.0;
    let mut gs = Vec::with_capacity(xs.len());
    for (b, x) in bs.iter().zip(xs.iter()) {
        let inv = inverse_logdet(x)?.0;
        gs.push(hermitize(&(b + (inv - &*y) * C64::new(mu, 0.0))));
    }
    // reduced system (1 + Σ (x_r Y)‾ ⊗ x_r Y) vec W = vec(Σ x_r G_r x_r / μ)
    let mut system = Mat::identity(m * m, m * m);
    let mut rhs = Mat::zeros(m, m);
    for (x, g) in xs.iter().zip(&gs) {
        let a = x * &*y;
        system += a.conjugate().kronecker(&a);
        rhs += x * g * x;
    }
    rhs *= C64::new(1.0 / mu, 0.0);
    let w = system.lu().solve(&DVector::from_column_slice(rhs.as_slice()))?;
    let w = Mat::from_column_slice(m, m, w.as_slice());
    let ywy = &*y * w * &*y;
    let ds: Vec<Mat> =
        xs.iter().zip(&gs).map(|(x, g)| hermitize(&(x * (g * C64::new(1.0 / mu, 0.0) - &ywy) * x))).collect();
    let decrement2: f64 = gs.iter().zip(&ds).map(|(g, d)| trace_product_re(g, d)).sum::<f64>() / mu;
    if !decrement2.is_finite() {
        return None;
    }
    if decrement2 < CENTERING_DECREMENT {
        return Some(true);
    }
    let delta = decrement2.sqrt();
    let mut t = if delta < 0.25 { 1.0 } else { 1.0 / (1.0 + delta) };
    while t > 1e-12 {
        let trial: Vec<Mat> = xs.iter().zip(&ds).map(|(x, d)| x + d * C64::new(t, 0.0)).collect();
        if barrier_value(bs, &trial, mu).is_some() {
            *xs = trial;
            return Some(false);
        }
        t *= 0.5;
    }
    Some(true)
}

/// Follow the central path of `Σ Tr(B_r x_r) + μ(Σ log det x_r + log det(1 − Σ x_r))`
/// with damped Newton steps. Returns the last strictly feasible point and the dual
/// estimate `μ(1 − Σx)^{-1}`; a numerical breakdown stops the path early.
fn barrier_path(bs: &[Mat], scale: f64) -> Option<(Vec<Mat>, Mat)> {
    let m = bs[0].nrows();
    let k = bs.len();
    let eye = Mat::identity(m, m);
    let mut xs: Vec<Mat> = vec![&eye * C64::new(1.0 / (k as f64 + 1.0), 0.0); k];
    let mut mu = scale;
    let mut y = eye.clone();
    let mut last: Option<(Vec<Mat>, Mat)> = None;
    'path: for _ in 0..200 {
        for _ in 0..100 {
            match newton_step(bs, &mut xs, &mut y, mu) {
                Some(true) => break,
                Some(false) => {}
                None => break 'path,
            }
        }
        last = Some((xs.clone(), &y * C64::new(mu, 0.0)));
        if mu * (m * (k + 1)) as f64 <= BARRIER_TARGET * scale {
            break;
        }
        mu *= BARRIER_SHRINK;
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_hermitian, seeded_rng};

    fn diag(v: &[f64]) -> Hermitian {
        Hermitian::from_diagonals(&v.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn negative_blocks_take_fast_path() {
        let sol = solve_blocks(vec![diag(&[-1.0, -2.0]), diag(&[-0.5, -0.1])], &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Trivial);
        assert_eq!(sol.objective, 0.0);
        assert!(sol.point.xs.iter().all(|x| x.matrix().max_abs() == 0.0));
    }

    #[test]
    fn single_block_matches_positive_trace() {
        let mut rng = seeded_rng(2);
        for _ in 0..10 {
            let b = random_hermitian(&mut rng, &[3, 2]);
            let expected: f64 = crate::matalg::eigh(&b).unwrap().eigenvalues().map(|v| v.max(0.0)).sum();
            let sol = solve_blocks(vec![b.clone()], &SolverOptions::default()).unwrap();
            assert!((sol.objective - expected).abs() < 1e-9, "{} vs {expected}", sol.objective);
            assert!((dual_upper_bound(&[b], None).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn scalar_instance_that_stalls_plain_ascent() {
        // x_0 alone would absorb all mass; the optimum puts it on x_1
        let sol = solve_blocks(vec![diag(&[1.0]), diag(&[2.0])], &SolverOptions::default()).unwrap();
        assert!((sol.objective - 2.0).abs() < 1e-8);
        assert!(sol.gap < 1e-8);
    }

    #[test]
    fn random_instances_feasible_monotone_and_tight() {
        let mut rng = seeded_rng(8);
        for _ in 0..20 {
            let blocks: Vec<Hermitian> = (0..5).map(|_| random_hermitian(&mut rng, &[2, 3])).collect();
            let sol = solve_blocks(blocks, &SolverOptions::default()).unwrap();
            assert!(sol.point.infeasibility().unwrap() <= 1e-9);
            for w in sol.sweep_objectives.windows(2) {
                assert!(w[1] >= w[0] - 1e-12 * sol.scale, "{:?} scale {}", sol.sweep_objectives, sol.scale);
            }
            assert!(sol.objective <= sol.dual_bound + 1e-7 * sol.scale);
            assert!(sol.gap <= 1e-6 * sol.scale, "gap {}", sol.gap);
        }
    }

    #[test]
    fn plain_ascent_without_warm_start_is_still_feasible() {
        let mut rng = seeded_rng(13);
        let blocks: Vec<Hermitian> = (0..4).map(|_| random_hermitian(&mut rng, &[3])).collect();
        let opts = SolverOptions { warm_start: false, ..Default::default() };
        let sol = solve_blocks(blocks, &opts).unwrap();
        assert!(sol.point.infeasibility().unwrap() <= 1e-9);
        assert!(sol.objective <= sol.dual_bound + 1e-7 * sol.scale);
    }
}
