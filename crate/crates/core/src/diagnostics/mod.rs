//! Numerical checks of the quantitative statements about the flow:
//! `H⁻¹` contraction, the maximum principle, entropy subsolution residuals,
//! Morrey decay, reverse-Hölder and local-estimate ratios, Hölder seminorms.
//!
//! Every check returns a [`CheckReport`]; a failing report carries a
//! [`Witness`] locating the violation.

mod bounds;
mod contraction;
mod cylinders;
mod entropy;
mod holder;
mod poisson;
mod report;

pub use bounds::sup_norm_report;
pub use contraction::{contraction_report, CONTRACTION_REL_TOL};
pub use cylinders::{
    estimate_ratio_report, estimate_ratios, gradient_fields, morrey_decay_report, morrey_profile,
    random_cylinders, reverse_holder_report, stability_report, MorreyProfile, PhysicalCylinder,
    RatioSample,
};
pub use entropy::{
    calibrate_k, choose_entropy_params, coupled_residual, diffusion_residual,
    entropy_residual_coupled, entropy_residual_diffusion, refinement_report, EntropyParams,
    ResidualField, ResidualSummary,
};
pub use holder::{holder_seminorm, HolderBand, EXHAUSTIVE_LIMIT};
pub use poisson::{
    discrete_l2_norm, h_minus_one_norm, h_minus_one_norm_vector, poincare_constant,
    solve_dirichlet_poisson, PoissonSolution, CG_TOLERANCE,
};
pub use report::{CheckReport, Series, Witness};

use thiserror::Error;

use crate::grid::GridError;
use crate::potential::PotentialError;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error("trajectories do not match: {0}")]
    Mismatch(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("conjugate gradients stopped at relative residual {residual:e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("state leaves the certified range at snapshot {snapshot}, point {index}: |u| = {norm} outside [{r_min}, {r_max}]")]
    Range {
        snapshot: usize,
        index: usize,
        norm: f64,
        r_min: f64,
        r_max: f64,
    },
}

#[cfg(test)]
mod tests;
