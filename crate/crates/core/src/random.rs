//! Seeded instance generators. Every generator is a pure function of its RNG state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::matalg::{BlockMatrix, Hermitian, Mat, C64};

pub type InstanceRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> InstanceRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive an independent child seed (splitmix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn gaussian_complex<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Ginibre matrix with unit-variance complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| gaussian_complex(rng))
}

pub fn random_block_matrix<R: Rng + ?Sized>(rng: &mut R, dims: &[usize]) -> BlockMatrix {
    BlockMatrix::from_blocks_unchecked(dims.iter().map(|&n| ginibre(rng, n, n)).collect())
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dims: &[usize]) -> Hermitian {
    Hermitian::symmetrized(&random_block_matrix(rng, dims))
}

/// `G G*` with `G` of the given column count per block (rank ≤ `rank`).
pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, dims: &[usize], rank: Option<usize>) -> Hermitian {
    let blocks = dims
        .iter()
        .map(|&n| {
            let k = rank.unwrap_or(n).clamp(1, n);
            let g = ginibre(rng, n, k);
            &g * g.adjoint()
        })
        .collect();
    Hermitian::symmetrized(&BlockMatrix::from_blocks_unchecked(blocks))
}

/// Random unitary from the QR factorization of a Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Mat {
    let qr = ginibre(rng, n, n).qr();
    let (q, r) = qr.unpack();
    // fix column phases so the distribution is Haar
    let mut q = q;
    for j in 0..n {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            for i in 0..n {
                q[(i, j)] *= phase;
            }
        }
    }
    q
}

/// Faithful density with unit trace: Wishart plus `floor · I`, normalized.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, dims: &[usize], floor: f64) -> Hermitian {
    let mut blocks = Vec::with_capacity(dims.len());
    for &n in dims {
        let g = ginibre(rng, n, n);
        let weight: f64 = rng.random_range(0.5..1.5);
        let b = (&g * g.adjoint()) * C64::new(weight / n as f64, 0.0) + Mat::identity(n, n) * C64::new(floor, 0.0);
        blocks.push(b);
    }
    let m = BlockMatrix::from_blocks_unchecked(blocks);
    let t = m.trace().re;
    Hermitian::symmetrized(&m.scale(1.0 / t))
}

/// Random unit vector supported in one block, as a rank-one positive `v v*`.
pub fn random_rank_one<R: Rng + ?Sized>(rng: &mut R, dims: &[usize]) -> Hermitian {
    let block = rng.random_range(0..dims.len());
    let mut blocks: Vec<Mat> = dims.iter().map(|&n| Mat::zeros(n, n)).collect();
    let v = ginibre(rng, dims[block], 1);
    let v = &v / C64::new(v.norm(), 0.0);
    blocks[block] = &v * v.adjoint();
    Hermitian::symmetrized(&BlockMatrix::from_blocks_unchecked(blocks))
}
