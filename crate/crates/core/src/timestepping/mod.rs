//! Time integration: the energy-conserving step solved by Newton's method,
//! a cheaper Picard variant, and multi-step runs.

mod config;
mod run;
mod step;

pub use config::{Integrator, JacobianKind, NewtonConfig, StepConfig, SupgConfig};
pub use run::{run, RunSeries, StepRecord};
pub use step::{
    average_flux, average_flux_qp, average_kinetic, picard_step, poisson_step, supg_dissipation, supg_q_star,
    StepProblem, StepResult, Stepper,
};
