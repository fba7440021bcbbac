use rand::Rng;

use super::model::{KrausTerm, MapKind, Pedigree, PositiveMapModel};
use crate::error::{Error, Result};
use crate::matalg::{eigh, max_eigenvalue, min_eigenvalue, BlockMatrix, Hermitian, Mat, SuperOp, C64};
use crate::random::{ginibre, seeded_rng};
use crate::vna::{make_state, modular_flow, Algebra, Reference, State};

const STOCHASTIC_TOL: f64 = 1e-12;

/// `T(x)_ω = Σ_{ω'} P_{ωω'} x_{ω'}` on `|Ω|` copies of the inner algebra, with state `μ ⊗ inner`.
///
/// `P` must be row-stochastic and `μ` a faithful probability vector with `μP ≤ μ` entrywise.
pub fn example_tensor_markov(
    p: &[Vec<f64>],
    mu: &[f64],
    inner_state: &State,
) -> Result<(Algebra, State, PositiveMapModel)> {
    let k = p.len();
    if k == 0 || p.iter().any(|row| row.len() != k) {
        return Err(Error::NotStochastic(format!("kernel must be a nonempty square matrix, got {k} rows")));
    }
    for (i, row) in p.iter().enumerate() {
        if row.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::NotStochastic(format!("row {i} has a negative or non-finite entry")));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::NotStochastic(format!("row {i} sums to {s}")));
        }
    }
    if mu.len() != k {
        return Err(Error::DimensionMismatch(format!("measure has {} entries, kernel has {k} states", mu.len())));
    }
    if mu.iter().any(|&m| !(m > 0.0)) || (mu.iter().sum::<f64>() - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::NotSubInvariant("measure must be a faithful probability vector".into()));
    }
    for j in 0..k {
        let pushed: f64 = (0..k).map(|i| mu[i] * p[i][j]).sum();
        if pushed > mu[j] + STOCHASTIC_TOL {
            return Err(Error::NotSubInvariant(format!("(μP)_{j} = {pushed} exceeds μ_{j} = {}", mu[j])));
        }
    }

    let inner_dims = inner_state.algebra().signature().to_vec();
    let nb = inner_dims.len();
    let signature: Vec<usize> = (0..k).flat_map(|_| inner_dims.iter().copied()).collect();
    let algebra = Algebra::new(signature.clone())?;
    let rho_blocks: Vec<Mat> =
        (0..k).flat_map(|w| inner_state.rho().blocks().iter().map(move |b| b * C64::new(mu[w], 0.0))).collect();
    let state = make_state(&algebra, Hermitian::symmetrized(&BlockMatrix::new(rho_blocks)?))?;

    let kernel = p.to_vec();
    let op = SuperOp::from_fn(&signature, |x| {
        let blocks = (0..k)
            .flat_map(|w| {
                let kernel = &kernel;
                (0..nb).map(move |j| {
                    let n = x.block(j).nrows();
                    let mut acc = Mat::zeros(n, n);
                    for (v, &pv) in kernel[w].iter().enumerate() {
                        if pv != 0.0 {
                            acc += x.block(v * nb + j) * C64::new(pv, 0.0);
                        }
                    }
                    acc
                })
            })
            .collect();
        BlockMatrix::from_blocks_unchecked(blocks)
    });
    let map = PositiveMapModel::from_parts(op, Pedigree::ConstructedPositive, MapKind::MarkovTensor);
    Ok((algebra, state, map))
}

/// A unital *-subalgebra `N ⊆ M` given block by block.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "type", content = "sizes", rename_all = "snake_case")]
pub enum SubalgebraSpec {
    /// `N = M`.
    Full,
    /// Per algebra block, the sizes of the diagonal sub-blocks of `N`.
    BlockPartition(Vec<Vec<usize>>),
    /// Per algebra block `n = k·m`, the factor size `k` of `N = M_k ⊗ 1_m`.
    TensorFactor(Vec<usize>),
}

impl SubalgebraSpec {
    fn validate(&self, dims: &[usize]) -> Result<()> {
        match self {
            SubalgebraSpec::Full => Ok(()),
            SubalgebraSpec::BlockPartition(parts) => {
                if parts.len() != dims.len() {
                    return Err(Error::NotSubalgebra(format!(
                        "partition lists {} blocks, algebra has {}",
                        parts.len(),
                        dims.len()
                    )));
                }
                for (i, (part, &n)) in parts.iter().zip(dims).enumerate() {
                    if part.is_empty() || part.contains(&0) || part.iter().sum::<usize>() != n {
                        return Err(Error::NotSubalgebra(format!(
                            "partition {part:?} of block {i} does not sum to {n}"
                        )));
                    }
                }
                Ok(())
            }
            SubalgebraSpec::TensorFactor(factors) => {
                if factors.len() != dims.len() {
                    return Err(Error::NotSubalgebra(format!(
                        "tensor factors list {} blocks, algebra has {}",
                        factors.len(),
                        dims.len()
                    )));
                }
                for (i, (&f, &n)) in factors.iter().zip(dims).enumerate() {
                    if f == 0 || n % f != 0 {
                        return Err(Error::NotSubalgebra(format!("factor {f} does not divide block {i} of size {n}")));
                    }
                }
                Ok(())
            }
        }
    }

    /// Trace-preserving conditional expectation `E_τ` onto `N`.
    fn trace_expectation(&self, x: &BlockMatrix) -> BlockMatrix {
        match self {
            SubalgebraSpec::Full => x.clone(),
            SubalgebraSpec::BlockPartition(parts) => {
                let blocks = x
                    .blocks()
                    .iter()
                    .zip(parts)
                    .map(|(b, part)| {
                        let mut out = Mat::zeros(b.nrows(), b.ncols());
                        let mut off = 0;
                        for &s in part {
                            out.view_mut((off, off), (s, s)).copy_from(&b.view((off, off), (s, s)));
                            off += s;
                        }
                        out
                    })
                    .collect();
                BlockMatrix::from_blocks_unchecked(blocks)
            }
            SubalgebraSpec::TensorFactor(factors) => {
                let blocks = x
                    .blocks()
                    .iter()
                    .zip(factors)
                    .map(|(b, &k)| {
                        let m = b.nrows() / k;
                        let reduced = Mat::from_fn(k, k, |a, c| (0..m).map(|j| b[(a * m + j, c * m + j)]).sum::<C64>());
                        reduced.kronecker(&(Mat::identity(m, m) * C64::new(1.0 / m as f64, 0.0)))
                    })
                    .collect();
                BlockMatrix::from_blocks_unchecked(blocks)
            }
        }
    }
}

/// Generalized conditional expectation
/// `E(x) = ρ_N^{-1/2} E_τ(ρ^{1/2} x ρ^{1/2}) ρ_N^{-1/2}` with `ρ_N = E_τ(ρ)`.
///
/// When `N` is invariant under the modular flow this is the unique
/// φ-preserving conditional expectation; the kind records which case applies.
pub fn example_cond_expectation(state: &State, subalgebra: &SubalgebraSpec) -> Result<PositiveMapModel> {
    let dims = state.algebra().signature().to_vec();
    subalgebra.validate(&dims)?;
    let rho_n = Hermitian::symmetrized(&subalgebra.trace_expectation(state.rho().matrix()));
    let rho_n_inv_sqrt = eigh(&rho_n)?.reconstruct(|v| 1.0 / v.sqrt());
    let sqrt = state.sqrt().matrix().clone();
    let op =
        SuperOp::from_fn(&dims, |x| subalgebra.trace_expectation(&x.sandwich(&sqrt)).sandwich(rho_n_inv_sqrt.matrix()));
    let modular_invariant = is_modular_invariant(state, subalgebra)?;
    Ok(PositiveMapModel::from_parts(
        op,
        Pedigree::ConstructedPositive,
        MapKind::ConditionalExpectation { modular_invariant },
    ))
}

/// Whether `σ_t(N) ⊆ N` at a few sampled times.
pub fn is_modular_invariant(state: &State, subalgebra: &SubalgebraSpec) -> Result<bool> {
    let dims = state.algebra().signature().to_vec();
    subalgebra.validate(&dims)?;
    let basis = SuperOp::from_fn(&dims, |x| subalgebra.trace_expectation(x));
    let d: usize = dims.iter().map(|n| n * n).sum();
    for t in [0.37, -1.3, 2.9] {
        for col in 0..d {
            let y = BlockMatrix::from_coefficients(&dims, &basis.matrix().column(col).into_owned());
            let moved = modular_flow(&y, t, state)?;
            if subalgebra.trace_expectation(&moved).max_abs_diff(&moved) > 1e-9 * moved.max_abs().max(1.0) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

const MAX_RESCALE_ATTEMPTS: usize = 40;

/// Seeded map `α·id + Σ wᵢ Vᵢ* · Vᵢ` rescaled so that `T(1) ⪯ 1` and `T†(d) ⪯ d`
/// hold with no tolerance.
pub fn random_certified_map(seed: u64, algebra: &Algebra, reference: impl Into<Reference>) -> Result<PositiveMapModel> {
    let reference = reference.into();
    let dims = algebra.signature();
    let mut rng = seeded_rng(seed);
    let count = rng.random_range(1..=4usize);
    let terms: Vec<KrausTerm> = (0..count)
        .map(|_| {
            let from_block = rng.random_range(0..dims.len());
            let to_block = rng.random_range(0..dims.len());
            KrausTerm {
                from_block,
                to_block,
                weight: rng.random_range(0.2..1.0),
                op: ginibre(&mut rng, dims[from_block], dims[to_block]),
            }
        })
        .collect();
    let alpha: f64 = rng.random_range(0.0..0.6);
    let kraus = PositiveMapModel::from_kraus(algebra, &terms)?;

    let one = algebra.identity();
    let d = reference.density();
    let d_inv_sqrt = reference.power(-0.5);
    let unit_load = max_eigenvalue(&kraus.apply_hermitian(&one))?;
    let pulled = Hermitian::symmetrized(&kraus.trace_adjoint().apply(d.matrix())).congruence(&d_inv_sqrt);
    let density_load = max_eigenvalue(&pulled)?;
    let load = unit_load.max(density_load);
    if !(load > 0.0 && load.is_finite()) {
        return Err(Error::GenerationFailure { attempts: 0 });
    }

    let identity = PositiveMapModel::identity(algebra);
    let mut factor = (1.0 - alpha) * (1.0 - 1e-12) / load;
    for _ in 0..MAX_RESCALE_ATTEMPTS {
        let t = PositiveMapModel::mixture(&[(alpha, &identity), (factor, &kraus)])?;
        let contraction = min_eigenvalue(&one.sub(&t.apply_hermitian(&one)))?;
        let t_dag_d = Hermitian::symmetrized(&t.trace_adjoint().apply(d.matrix()));
        let decrease = min_eigenvalue(&d.sub(&t_dag_d))?;
        if contraction >= 0.0 && decrease >= 0.0 {
            return Ok(PositiveMapModel::from_parts(
                t.superop().clone(),
                Pedigree::ConstructedPositive,
                MapKind::Kraus,
            ));
        }
        factor *= 0.999;
    }
    Err(Error::GenerationFailure { attempts: MAX_RESCALE_ATTEMPTS })
}
