//! Synthetic closed loops with scripted policies and injectable perturbations.

mod discrete;
mod linear;
mod perturbation;

pub use discrete::{run_discrete_loop, DiscreteLoopConfig, DEFAULT_EPISODE_LENGTH};
pub use linear::{run_linear_loop, LinearLoopConfig, LoopRun, DIVERGENCE_BOUND};
pub use perturbation::{Perturbation, PerturbationKind, Side, DEFAULT_ONSET_EPISODE};
