//! Eigendecomposition and functional calculus for hermitian block matrices.

use nalgebra::linalg::SymmetricEigen;

use super::block::{hermitize, BlockMatrix, Hermitian, Mat, C64};
use crate::error::{Error, Result};

const EIG_MAX_ITER: usize = 10_000;

/// Eigendata of one block: ascending eigenvalues, unitary eigenvector columns.
#[derive(Clone, Debug)]
pub struct BlockSpectrum {
    pub values: Vec<f64>,
    pub vectors: Mat,
}

#[derive(Clone, Debug)]
pub struct SpectralData {
    blocks: Vec<BlockSpectrum>,
}

impl SpectralData {
    pub fn blocks(&self) -> &[BlockSpectrum] {
        &self.blocks
    }

    pub fn eigenvalues(&self) -> impl Iterator<Item = f64> + '_ {
        self.blocks.iter().flat_map(|b| b.values.iter().copied())
    }

    pub fn min(&self) -> f64 {
        self.blocks.iter().map(|b| b.values[0]).fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.blocks.iter().map(|b| *b.values.last().unwrap()).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest absolute eigenvalue, i.e. the operator norm.
    pub fn spectral_radius(&self) -> f64 {
        self.min().abs().max(self.max().abs())
    }

    /// `U f(Λ) U*` for a real function.
    pub fn reconstruct(&self, f: impl Fn(f64) -> f64) -> Hermitian {
        Hermitian::symmetrized(&self.reconstruct_complex(|s| C64::new(f(s), 0.0)))
    }

    /// `U f(Λ) U*` for a complex function; the result is normal but not hermitian.
    pub fn reconstruct_complex(&self, f: impl Fn(f64) -> C64) -> BlockMatrix {
        BlockMatrix::from_blocks_unchecked(
            self.blocks
                .iter()
                .map(|b| {
                    let mut scaled = b.vectors.clone();
                    for (j, &s) in b.values.iter().enumerate() {
                        let fs = f(s);
                        for i in 0..scaled.nrows() {
                            scaled[(i, j)] *= fs;
                        }
                    }
                    scaled * b.vectors.adjoint()
                })
                .collect(),
        )
    }

    /// Reconstruct with a per-eigenvalue selector that sees the block and eigen index.
    pub(crate) fn reconstruct_indexed(&self, f: impl Fn(usize, usize, f64) -> f64) -> Hermitian {
        let blocks = self
            .blocks
            .iter()
            .enumerate()
            .map(|(bi, b)| {
                let mut scaled = b.vectors.clone();
                for (j, &s) in b.values.iter().enumerate() {
                    let fs = C64::new(f(bi, j, s), 0.0);
                    for i in 0..scaled.nrows() {
                        scaled[(i, j)] *= fs;
                    }
                }
                hermitize(&(scaled * b.vectors.adjoint()))
            })
            .collect();
        Hermitian::symmetrized(&BlockMatrix::from_blocks_unchecked(blocks))
    }
}

/// Eigendecomposition of a single hermitian block, eigenvalues ascending.
pub(crate) fn eigh_block(m: &Mat) -> Result<BlockSpectrum> {
    let n = m.nrows();
    let eig =
        SymmetricEigen::try_new(hermitize(m), f64::EPSILON, EIG_MAX_ITER).ok_or(Error::NonConvergence { dim: n })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonConvergence { dim: n });
    }
    let vectors = Mat::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(BlockSpectrum { values, vectors })
}

pub fn eigh(a: &Hermitian) -> Result<SpectralData> {
    let blocks = a.blocks().iter().map(eigh_block).collect::<Result<Vec<_>>>()?;
    Ok(SpectralData { blocks })
}

/// `f(A)` by functional calculus. Fails if `f` is not finite at some eigenvalue.
pub fn apply_spectral(a: &Hermitian, f: impl Fn(f64) -> f64) -> Result<Hermitian> {
    let spec = eigh(a)?;
    if let Some(bad) = spec.eigenvalues().find(|&s| !f(s).is_finite()) {
        return Err(Error::DomainError { eigenvalue: bad });
    }
    Ok(spec.reconstruct(f))
}

pub fn positive_part(a: &Hermitian) -> Result<Hermitian> {
    apply_spectral(a, |s| s.max(0.0))
}

pub fn negative_part(a: &Hermitian) -> Result<Hermitian> {
    apply_spectral(a, |s| (-s).max(0.0))
}

pub fn min_eigenvalue(a: &Hermitian) -> Result<f64> {
    Ok(eigh(a)?.min())
}

pub fn max_eigenvalue(a: &Hermitian) -> Result<f64> {
    Ok(eigh(a)?.max())
}

pub fn op_norm(a: &Hermitian) -> Result<f64> {
    Ok(eigh(a)?.spectral_radius())
}

/// True iff `λ_min(A) ≥ −tol · max(1, ‖A‖)`.
pub fn is_psd(a: &Hermitian, tol: f64) -> Result<bool> {
    let spec = eigh(a)?;
    Ok(spec.min() >= -tol * spec.spectral_radius().max(1.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bound {
    Unbounded,
    Open(f64),
    Closed(f64),
}

/// A real interval. Open endpoints are cut points; closed endpoints admit
/// eigenvalues up to `eps` outside.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lower: Bound,
    pub upper: Bound,
}

impl Interval {
    pub fn new(lower: Bound, upper: Bound) -> Self {
        Self { lower, upper }
    }

    /// `(c, ∞)`.
    pub fn above(c: f64) -> Self {
        Self::new(Bound::Open(c), Bound::Unbounded)
    }

    /// `(lo, hi]`.
    pub fn half_open(lo: f64, hi: f64) -> Self {
        Self::new(Bound::Open(lo), Bound::Closed(hi))
    }
}

/// How eigenvalues within `eps` of an open endpoint are classified.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CutRule {
    /// Ambiguous eigenvalues are left out of the projection.
    #[default]
    Conservative,
    /// Ambiguous eigenvalues raise `AmbiguousSpectralCut`.
    Strict,
}

/// Membership of `s` in `interval`; `band` is the ambiguity half-width at open
/// endpoints and the admission slack at closed ones.
pub(crate) fn classify(s: f64, interval: &Interval, band: f64, rule: CutRule) -> Result<bool> {
    let mut ambiguous_cut = None;
    let lower_ok = match interval.lower {
        Bound::Unbounded => true,
        Bound::Closed(c) => s >= c - band,
        Bound::Open(c) => {
            if (s - c).abs() < band {
                ambiguous_cut = Some(c);
            }
            s > c
        }
    };
    let upper_ok = match interval.upper {
        Bound::Unbounded => true,
        Bound::Closed(c) => s <= c + band,
        Bound::Open(c) => {
            if (s - c).abs() < band {
                ambiguous_cut = Some(c);
            }
            s < c
        }
    };
    match (ambiguous_cut, rule) {
        (Some(cut), CutRule::Strict) => Err(Error::AmbiguousSpectralCut { eigenvalue: s, cut, eps: band }),
        (Some(_), CutRule::Conservative) => Ok(false),
        (None, _) => Ok(lower_ok && upper_ok),
    }
}

/// Spectral cut of precomputed eigendata: membership flags per block.
pub(crate) fn cut_flags(spec: &SpectralData, interval: &Interval, band: f64, rule: CutRule) -> Result<Vec<Vec<bool>>> {
    spec.blocks().iter().map(|b| b.values.iter().map(|&s| classify(s, interval, band, rule)).collect()).collect()
}

/// Orthogonal projection onto the eigenvectors of `A` whose eigenvalues lie in `interval`.
pub fn spectral_projection(a: &Hermitian, interval: &Interval, eps_kernel: f64, rule: CutRule) -> Result<Hermitian> {
    if !(eps_kernel > 0.0) {
        return Err(Error::InvalidArgument(format!("eps_kernel must be positive, got {eps_kernel}")));
    }
    let spec = eigh(a)?;
    let flags = cut_flags(&spec, interval, eps_kernel, rule)?;
    Ok(spec.reconstruct_indexed(|bi, j, _| if flags[bi][j] { 1.0 } else { 0.0 }))
}
