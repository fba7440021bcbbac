use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Mat = DMatrix<C64>;

/// An element of a finite direct sum of full matrix blocks.
///
/// Arithmetic operators panic on shape mismatch; shapes are validated once at
/// the boundary (`BlockMatrix::new`, `Algebra::check`).
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMatrix {
    blocks: Vec<Mat>,
}

impl BlockMatrix {
    pub fn new(blocks: Vec<Mat>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::DimensionMismatch("block list is empty".into()));
        }
        for (i, b) in blocks.iter().enumerate() {
            if b.nrows() == 0 || b.nrows() != b.ncols() {
                return Err(Error::DimensionMismatch(format!(
                    "block {i} is {}x{}, expected a nonempty square matrix",
                    b.nrows(),
                    b.ncols()
                )));
            }
            if b.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        Ok(Self { blocks })
    }

    pub(crate) fn from_blocks_unchecked(blocks: Vec<Mat>) -> Self {
        Self { blocks }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Self::from_blocks_unchecked(dims.iter().map(|&n| Mat::zeros(n, n)).collect())
    }

    pub fn identity(dims: &[usize]) -> Self {
        Self::from_blocks_unchecked(dims.iter().map(|&n| Mat::identity(n, n)).collect())
    }

    /// Real diagonal blocks, one vector of diagonal entries per block.
    pub fn from_diagonals(diagonals: &[Vec<f64>]) -> Result<Self> {
        Self::new(
            diagonals
                .iter()
                .map(|d| Mat::from_diagonal(&DVector::from_iterator(d.len(), d.iter().map(|&v| C64::new(v, 0.0)))))
                .collect(),
        )
    }

    /// Real-valued blocks given row by row.
    pub fn from_real_rows(rows: &[Vec<Vec<f64>>]) -> Result<Self> {
        let mut blocks = Vec::with_capacity(rows.len());
        for b in rows {
            let n = b.len();
            if b.iter().any(|row| row.len() != n) {
                return Err(Error::DimensionMismatch("ragged block rows".into()));
            }
            blocks.push(Mat::from_fn(n, n, |i, j| C64::new(b[i][j], 0.0)));
        }
        Self::new(blocks)
    }

    pub fn dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.nrows()).collect()
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Mat] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &Mat {
        &self.blocks[i]
    }

    pub fn into_blocks(self) -> Vec<Mat> {
        self.blocks
    }

    /// Number of complex coefficients, Σ nᵢ².
    pub fn coefficient_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.len()).sum()
    }

    pub fn same_shape(&self, other: &BlockMatrix) -> bool {
        self.blocks.len() == other.blocks.len()
            && self.blocks.iter().zip(&other.blocks).all(|(a, b)| a.nrows() == b.nrows())
    }

    pub fn check_shape(&self, other: &BlockMatrix) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!("signature {:?} vs {:?}", self.dims(), other.dims())))
        }
    }

    pub fn map_blocks(&self, f: impl FnMut(&Mat) -> Mat) -> Self {
        Self::from_blocks_unchecked(self.blocks.iter().map(f).collect())
    }

    pub fn zip_blocks(&self, other: &BlockMatrix, mut f: impl FnMut(&Mat, &Mat) -> Mat) -> Self {
        assert!(self.same_shape(other), "block shape mismatch");
        Self::from_blocks_unchecked(self.blocks.iter().zip(&other.blocks).map(|(a, b)| f(a, b)).collect())
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map_blocks(|b| b * C64::new(c, 0.0))
    }

    pub fn scale_complex(&self, c: C64) -> Self {
        self.map_blocks(|b| b * c)
    }

    pub fn adjoint(&self) -> Self {
        self.map_blocks(|b| b.adjoint())
    }

    /// `c · self · c*`.
    pub fn sandwich(&self, c: &BlockMatrix) -> Self {
        c.zip_blocks(self, |cb, xb| cb * xb * cb.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.blocks.iter().map(|b| b.trace()).sum()
    }

    /// `Tr(self · other)` without forming the product.
    pub fn trace_product(&self, other: &BlockMatrix) -> C64 {
        assert!(self.same_shape(other), "block shape mismatch");
        let mut acc = C64::new(0.0, 0.0);
        for (a, b) in self.blocks.iter().zip(&other.blocks) {
            let n = a.nrows();
            for i in 0..n {
                for k in 0..n {
                    acc += a[(i, k)] * b[(k, i)];
                }
            }
        }
        acc
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().flat_map(|b| b.iter()).map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &BlockMatrix) -> f64 {
        assert!(self.same_shape(other), "block shape mismatch");
        self.blocks
            .iter()
            .zip(&other.blocks)
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.blocks.iter().map(|b| b.norm_squared()).sum::<f64>().sqrt()
    }

    /// Entrywise max |A − A*|.
    pub fn hermiticity_defect(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                let n = b.nrows();
                let mut d: f64 = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        d = d.max((b[(i, j)] - b[(j, i)].conj()).norm());
                    }
                }
                d
            })
            .fold(0.0, f64::max)
    }

    /// Coefficient vector: blocks concatenated, each in column-major order.
    pub fn to_coefficients(&self) -> DVector<C64> {
        DVector::from_iterator(self.coefficient_dim(), self.blocks.iter().flat_map(|b| b.iter().copied()))
    }

    pub fn from_coefficients(dims: &[usize], v: &DVector<C64>) -> Self {
        let mut offset = 0;
        let blocks = dims
            .iter()
            .map(|&n| {
                let b = Mat::from_column_slice(n, n, &v.as_slice()[offset..offset + n * n]);
                offset += n * n;
                b
            })
            .collect();
        Self::from_blocks_unchecked(blocks)
    }
}

impl Add for &BlockMatrix {
    type Output = BlockMatrix;
    fn add(self, rhs: &BlockMatrix) -> BlockMatrix {
        self.zip_blocks(rhs, |a, b| a + b)
    }
}

impl Sub for &BlockMatrix {
    type Output = BlockMatrix;
    fn sub(self, rhs: &BlockMatrix) -> BlockMatrix {
        self.zip_blocks(rhs, |a, b| a - b)
    }
}

impl Mul for &BlockMatrix {
    type Output = BlockMatrix;
    fn mul(self, rhs: &BlockMatrix) -> BlockMatrix {
        self.zip_blocks(rhs, |a, b| a * b)
    }
}

impl Mul<f64> for &BlockMatrix {
    type Output = BlockMatrix;
    fn mul(self, rhs: f64) -> BlockMatrix {
        self.scale(rhs)
    }
}

impl Neg for &BlockMatrix {
    type Output = BlockMatrix;
    fn neg(self) -> BlockMatrix {
        self.scale(-1.0)
    }
}

/// A self-adjoint block matrix. Stored exactly hermitian after symmetrization.
#[derive(Clone, Debug, PartialEq)]
pub struct Hermitian(BlockMatrix);

impl Hermitian {
    /// Relative hermiticity defect accepted at construction.
    pub const DEFECT_TOL: f64 = 1e-12;

    pub fn new(m: BlockMatrix) -> Result<Self> {
        let defect = m.hermiticity_defect();
        if defect > Self::DEFECT_TOL * m.max_abs().max(1.0) {
            return Err(Error::NotHermitian { defect });
        }
        Ok(Self::symmetrized(&m))
    }

    pub fn from_blocks(blocks: Vec<Mat>) -> Result<Self> {
        Self::new(BlockMatrix::new(blocks)?)
    }

    /// `(A + A*)/2` with no defect check.
    pub fn symmetrized(m: &BlockMatrix) -> Self {
        Self(m.map_blocks(hermitize))
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Self(BlockMatrix::zeros(dims))
    }

    pub fn identity(dims: &[usize]) -> Self {
        Self(BlockMatrix::identity(dims))
    }

    pub fn from_diagonals(diagonals: &[Vec<f64>]) -> Result<Self> {
        BlockMatrix::from_diagonals(diagonals).map(Self)
    }

    pub fn from_real_rows(rows: &[Vec<Vec<f64>>]) -> Result<Self> {
        Self::new(BlockMatrix::from_real_rows(rows)?)
    }

    pub fn matrix(&self) -> &BlockMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> BlockMatrix {
        self.0
    }

    pub fn dims(&self) -> Vec<usize> {
        self.0.dims()
    }

    pub fn blocks(&self) -> &[Mat] {
        self.0.blocks()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    /// `Re Tr(self · other)`; exact for two hermitian factors.
    pub fn trace_with(&self, other: &Hermitian) -> f64 {
        self.0.trace_product(&other.0).re
    }

    pub fn add(&self, other: &Hermitian) -> Hermitian {
        Hermitian(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &Hermitian) -> Hermitian {
        Hermitian(&self.0 - &other.0)
    }

    pub fn scale(&self, c: f64) -> Hermitian {
        Hermitian(self.0.scale(c))
    }

    /// `c · self · c` for hermitian `c`.
    pub fn congruence(&self, c: &Hermitian) -> Hermitian {
        Hermitian::symmetrized(&self.0.sandwich(&c.0))
    }

    pub fn max_abs_diff(&self, other: &Hermitian) -> f64 {
        self.0.max_abs_diff(&other.0)
    }
}

impl AsRef<BlockMatrix> for Hermitian {
    fn as_ref(&self) -> &BlockMatrix {
        &self.0
    }
}

pub(crate) fn hermitize(b: &Mat) -> Mat {
    (b + b.adjoint()) * C64::new(0.5, 0.0)
}
