use super::block::BlockMatrix;
use crate::error::{Error, Result};

const SVD_MAX_ITER: usize = 10_000;

/// All singular values of a block matrix, block by block.
pub fn singular_values(a: &BlockMatrix) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for b in a.blocks() {
        let svd = b
            .clone()
            .try_svd(false, false, f64::EPSILON, SVD_MAX_ITER)
            .ok_or(Error::NonConvergence { dim: b.nrows() })?;
        out.extend(svd.singular_values.iter().copied());
    }
    Ok(out)
}

/// Schatten p-norm `(Σ sᵢᵖ)^{1/p}`; `p = f64::INFINITY` gives the operator norm.
pub fn schatten_norm(a: &BlockMatrix, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidExponent(p));
    }
    let sv = singular_values(a)?;
    let top = sv.iter().copied().fold(0.0, f64::max);
    if p.is_infinite() || top == 0.0 {
        return Ok(top);
    }
    if p == 1.0 {
        return Ok(sv.iter().sum());
    }
    // scaled by the largest value to keep s^p in range
    let sum: f64 = sv.iter().map(|s| (s / top).powf(p)).sum();
    Ok(top * sum.powf(1.0 / p))
}
