use crate::dynamics::ExtendedMap;
use crate::error::{Error, Result};
use crate::matalg::{min_eigenvalue, Hermitian};
use crate::vna::LOneElement;

/// A point `(x_0, …, x_n)` of `K = {x_r ⪰ 0, Σ x_r ⪯ 1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct KPoint {
    pub xs: Vec<Hermitian>,
}

impl KPoint {
    pub fn zeros(dims: &[usize], n: usize) -> Self {
        Self { xs: vec![Hermitian::zeros(dims); n + 1] }
    }

    pub fn n(&self) -> usize {
        self.xs.len().saturating_sub(1)
    }

    pub fn sum(&self) -> Hermitian {
        let mut it = self.xs.iter();
        let first = it.next().expect("a K point has at least one component").clone();
        it.fold(first, |acc, x| acc.add(x))
    }

    /// Largest violation of `x_r ⪰ 0` and `Σ x_r ⪯ 1`; nonpositive when feasible.
    pub fn infeasibility(&self) -> Result<f64> {
        let mut worst = f64::NEG_INFINITY;
        for x in &self.xs {
            worst = worst.max(-min_eigenvalue(x)?);
        }
        let dims = self.xs[0].dims();
        worst = worst.max(-min_eigenvalue(&Hermitian::identity(&dims).sub(&self.sum()))?);
        Ok(worst)
    }
}

/// `B_r = (r+1)(S_r(a) − λ d)` for `r = 0..=n`, from a precomputed Cesàro table.
pub fn penalty_blocks_from_table(table: &[Hermitian], density: &Hermitian, lambda: f64, n: usize) -> Vec<Hermitian> {
    let shift = density.scale(lambda);
    (0..=n).map(|r| table[r].sub(&shift).scale(r as f64 + 1.0)).collect()
}

pub fn penalty_blocks(ext: &ExtendedMap, a: &Hermitian, lambda: f64, n: usize) -> Vec<Hermitian> {
    let table = ext.cesaro_table_hermitian(a, n);
    penalty_blocks_from_table(&table, ext.reference().density(), lambda, n)
}

/// `g(x) = Σ (r+1) Tr(S_r(a) x_r) − λ Σ (r+1) Tr(d^{1/2} x_r d^{1/2})`.
pub fn objective_g(point: &KPoint, a: &LOneElement, lambda: f64, ext: &ExtendedMap) -> Result<f64> {
    let dims = ext.dims();
    if point.xs.is_empty() {
        return Err(Error::DimensionMismatch("empty K point".into()));
    }
    if a.rep().dims() != dims {
        return Err(Error::DimensionMismatch(format!(
            "input has signature {:?}, map acts on {dims:?}",
            a.rep().dims()
        )));
    }
    for (r, x) in point.xs.iter().enumerate() {
        if x.dims() != dims {
            return Err(Error::DimensionMismatch(format!("component {r} has signature {:?}", x.dims())));
        }
    }
    let a = Hermitian::symmetrized(a.rep());
    let blocks = penalty_blocks(ext, &a, lambda, point.n());
    Ok(blocks.iter().zip(&point.xs).map(|(b, x)| b.trace_with(x)).sum())
}
