//! Certified projections for the L¹ maximal ergodic inequality on finite-dimensional
//! von Neumann algebras with a faithful state.
//!
//! The pipeline maximizes a linear functional over the spectrahedron
//! `K = {(x_0,…,x_n) : x_r ⪰ 0, Σ x_r ⪯ 1}`, cuts the kernel of `1 − Σ x̄_r`
//! to get `e_n`, and verifies each inequality of the result as a residual.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod matalg;
pub mod maxerg;
pub mod random;
pub mod report;
pub mod scenario;
pub mod suite;
pub mod vna;

pub use error::{Error, Result};
