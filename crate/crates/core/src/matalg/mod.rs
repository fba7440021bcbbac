//! Dense complex-hermitian linear algebra on block direct sums.

mod block;
mod norms;
mod spectral;
mod superop;

pub use block::{BlockMatrix, Hermitian, Mat, C64};
pub use norms::{schatten_norm, singular_values};
pub use spectral::{
    apply_spectral, eigh, is_psd, max_eigenvalue, min_eigenvalue, negative_part, op_norm, positive_part,
    spectral_projection, BlockSpectrum, Bound, CutRule, Interval, SpectralData,
};
pub use superop::SuperOp;

pub(crate) use block::hermitize;
pub(crate) use spectral::{cut_flags, eigh_block};
