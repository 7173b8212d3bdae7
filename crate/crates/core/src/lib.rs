//! Neural ODE training together with closed-form generalization,
//! covering-number and Rademacher bounds, and brute-force oracles that
//! check each bound on small instances.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod experiments;
pub mod model;
pub mod numerics;
pub mod oracles;
pub mod training;

pub use bounds::{BoundError, BoundReport};
pub use model::{Architecture, NeuralOdeModel, TimeModulation};
pub use experiments::{Dataset, Provenance, SweepResult, Targets};
pub use numerics::{Activation, Matrix, Trajectory, Vector};
pub use training::{ExperimentRecord, LossKind, TrainConfig};
