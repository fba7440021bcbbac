//! Maximization over `K`, kernel extraction, and the certificates built on it.

mod certificate;
mod objective;
mod oracle;
mod predicates;
mod solver;

pub(crate) use certificate::Instance;
pub use certificate::{
    default_tolerance, extract_projection, pointwise_certificate, uniform_projection, yeadon_tracial, Certificate,
    CertificateKind, CertificateOptions, Extraction, LimitDiagnostics, PointwiseOutcome, Residual, UniformOptions,
    UniformOutcome,
};
pub use objective::{objective_g, penalty_blocks, penalty_blocks_from_table, KPoint};
pub use oracle::{commutative_oracle, OracleResult};
pub use predicates::{
    pre_weak_type_predicate, type_infinity_check, type_infinity_excess, weak_type_predicate, PredicateOutcome,
    PREDICATE_TOL, TYPE_INFINITY_HORIZON,
};
pub use solver::{dual_upper_bound, solve_blocks, solve_maximizer, MaximizerSolution, SolveStatus, SolverOptions};
