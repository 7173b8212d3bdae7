//! Independent numerical oracles: exact combinatorics, covering numbers and
//! Rademacher complexities of finite classes, total variation, Gronwall and
//! gamma-ratio checks, plus the seeded case generators used for soundness
//! runs.

mod cases;
mod combinatorics;
mod covering;
mod gamma;
mod gronwall;
mod rademacher;
mod suite;
mod variation;

pub use cases::{
    gradient_case, rademacher_case, random_model, rk4_convergence_order, trajectory_case, GradientCase,
    RademacherCase, TrajectoryCase, TRAJECTORY_STEPS,
};
pub use combinatorics::{
    central_binomial, central_binomial_bound, central_binomial_recurrence_holds, count_monotone, monotone_sequences,
    BinomialBoundCheck, MonotoneCount, MAX_ENUMERATED_N,
};
pub use covering::{
    empirical_distance, exact_covering_number, CoverResult, CoverStrategy, SampledFunctionClass, StaircaseClass,
    EXACT_AUTO_LIMIT, EXACT_MAX_MEMBERS, MAX_MEMBERS,
};
pub use gamma::{gamma_grid, gamma_ratio_check, GammaRatioCheck};
pub use gronwall::{gronwall_check, random_gronwall_case, GronwallInput, GronwallKind, GronwallOutcome};
pub use rademacher::{mc_rademacher, RademacherEstimate, EXACT_MAX_SAMPLE, MIN_TRIALS};
pub use suite::*;
pub use variation::{total_variation, total_variation_of};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("function class is empty")]
    EmptyClass,
    #[error("integer overflow at n = {n}")]
    Overflow { n: usize },
    #[error("argument out of range: {0}")]
    OutOfRange(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
}
