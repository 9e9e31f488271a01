//! Continuous state reduction: a seeded Euler-Maruyama integrator for the
//! stochastic collapse equation, with ensemble and martingale diagnostics.

mod ensemble;
mod model;

pub use ensemble::{
    ensemble_outcomes, martingale_check, simulate, CheckpointRow, EnsembleOptions, EnsembleReport, MartingaleReport,
    OutcomeRow, SimParams, Trajectory, STIFF_STEP, UNRESOLVED_LIMIT,
};
pub use model::{drift_diffusion, em_step, CollapseModel, NoiseIncrement, NormConvention, COMMUTATOR_TOL, HERMITIAN_TOL};
