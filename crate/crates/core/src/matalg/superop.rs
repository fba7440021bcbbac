use nalgebra::DVector;

use super::block::{BlockMatrix, Mat, C64};
use crate::error::{Error, Result};

/// A linear map on a block algebra, stored as a dense matrix on the
/// coefficient space (blocks concatenated, column-major within a block).
#[derive(Clone, Debug, PartialEq)]
pub struct SuperOp {
    dims: Vec<usize>,
    mat: Mat,
}

fn coefficient_dim(dims: &[usize]) -> usize {
    dims.iter().map(|n| n * n).sum()
}

fn offsets(dims: &[usize]) -> Vec<usize> {
    let mut acc = 0;
    dims.iter()
        .map(|n| {
            let o = acc;
            acc += n * n;
            o
        })
        .collect()
}

impl SuperOp {
    pub fn identity(dims: &[usize]) -> Self {
        let d = coefficient_dim(dims);
        Self { dims: dims.to_vec(), mat: Mat::identity(d, d) }
    }

    pub fn zero(dims: &[usize]) -> Self {
        let d = coefficient_dim(dims);
        Self { dims: dims.to_vec(), mat: Mat::zeros(d, d) }
    }

    pub fn from_matrix(dims: &[usize], mat: Mat) -> Result<Self> {
        let d = coefficient_dim(dims);
        if mat.nrows() != d || mat.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "superoperator is {}x{}, algebra coefficient dimension is {d}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { dims: dims.to_vec(), mat })
    }

    /// Materialize a linear map by evaluating it on the matrix units.
    pub fn from_fn(dims: &[usize], f: impl Fn(&BlockMatrix) -> BlockMatrix) -> Self {
        let d = coefficient_dim(dims);
        let mut mat = Mat::zeros(d, d);
        let mut unit = DVector::<C64>::zeros(d);
        for col in 0..d {
            unit[col] = C64::new(1.0, 0.0);
            let image = f(&BlockMatrix::from_coefficients(dims, &unit)).to_coefficients();
            mat.set_column(col, &image);
            unit[col] = C64::new(0.0, 0.0);
        }
        Self { dims: dims.to_vec(), mat }
    }

    /// `x ↦ c x c*`, block diagonal on the coefficient space.
    pub fn sandwich(c: &BlockMatrix) -> Self {
        let dims = c.dims();
        let d = coefficient_dim(&dims);
        let mut mat = Mat::zeros(d, d);
        for (b, off) in c.blocks().iter().zip(offsets(&dims)) {
            let k = b.conjugate().kronecker(b);
            mat.view_mut((off, off), (k.nrows(), k.ncols())).copy_from(&k);
        }
        Self { dims, mat }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn matrix(&self) -> &Mat {
        &self.mat
    }

    pub fn apply(&self, x: &BlockMatrix) -> BlockMatrix {
        assert_eq!(x.dims(), self.dims, "superoperator/element signature mismatch");
        BlockMatrix::from_coefficients(&self.dims, &(&self.mat * x.to_coefficients()))
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &SuperOp) -> SuperOp {
        assert_eq!(self.dims, inner.dims, "superoperator signature mismatch");
        Self { dims: self.dims.clone(), mat: &self.mat * &inner.mat }
    }

    /// Adjoint for the Hilbert–Schmidt pairing `Tr(A* B)`.
    pub fn hs_adjoint(&self) -> SuperOp {
        Self { dims: self.dims.clone(), mat: self.mat.adjoint() }
    }

    pub fn scale(&self, c: f64) -> SuperOp {
        Self { dims: self.dims.clone(), mat: &self.mat * C64::new(c, 0.0) }
    }

    pub fn add(&self, other: &SuperOp) -> SuperOp {
        assert_eq!(self.dims, other.dims, "superoperator signature mismatch");
        Self { dims: self.dims.clone(), mat: &self.mat + &other.mat }
    }

    /// Largest entrywise difference between the matrices of two maps.
    pub fn max_abs_diff(&self, other: &SuperOp) -> f64 {
        self.mat.iter().zip(other.mat.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Max over matrix units `E` of `|T(E*) − T(E)*|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let d = coefficient_dim(&self.dims);
        let mut unit = DVector::<C64>::zeros(d);
        let mut worst: f64 = 0.0;
        for col in 0..d {
            unit[col] = C64::new(1.0, 0.0);
            let e = BlockMatrix::from_coefficients(&self.dims, &unit);
            let lhs = self.apply(&e.adjoint());
            let rhs = self.apply(&e).adjoint();
            worst = worst.max(lhs.max_abs_diff(&rhs));
            unit[col] = C64::new(0.0, 0.0);
        }
        worst
    }
}
