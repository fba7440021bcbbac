//! Positive contractions on the algebra, their L¹ extension, and Cesàro averages.

mod builders;
mod conditions;
mod extended;
mod model;

pub use builders::{
    example_cond_expectation, example_tensor_markov, is_modular_invariant, random_certified_map, SubalgebraSpec,
};
pub use conditions::{check_conditions, ConditionCheck, ConditionReport, Verdict};
pub use extended::{adjoint_map, cesaro, extend_l1, ExtendedMap, EXTENSION_SAMPLES, EXTENSION_TOL};
pub use model::{KrausTerm, MapKind, Pedigree, PositiveMapModel};
