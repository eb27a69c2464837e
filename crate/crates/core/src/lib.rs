//! Highway crash prediction from two-layer Markov models of lane and speed
//! changes, with active-safety action selection and a two-car kinematic
//! simulator.
//!
//! - [`markov`]: stochastic matrices, stationary and limiting matrices,
//!   fundamental matrix, mean first passage times, state propagation.
//! - [`estimation`]: trajectory ingestion and transition counting.
//! - [`sensing`]: Lidar range geometry and probable crash time.
//! - [`prediction`]: crash time, per-lane crash probabilities, action choice.
//! - [`simulator`]: scenario files, spacing-policy ACC, stepped simulation.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod estimation;
pub mod markov;
pub mod output;
pub mod prediction;
pub mod sensing;
pub mod simulator;
pub mod synthetic;

pub use config::{Thresholds, Tolerances};
pub use estimation::VehicleModel;
pub use markov::{PassageMatrix, ProbabilityVector, StochasticMatrix};
pub use prediction::{assess, CarId, CrashAssessment, EncounterInput, SafetyAction};
pub use simulator::{load_scenario, run, ScenarioConfig, SimReport};
