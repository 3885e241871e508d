//! Finite-difference laboratory for generalized diffusion systems
//! `u_t = Δ[∇Φ(u)]` with radial `Φ` and for strongly coupled parabolic
//! systems.
//!
//! * [`grid`]: grids, fields, stencils, parabolic cylinders, trajectories.
//! * [`potential`]: radial potentials, ellipticity windows, the scalar
//!   entropy and the strongly coupled rewriting.
//! * [`solver`]: explicit integrators and the config-driven runner.
//! * [`diagnostics`]: numerical checks of contraction, boundedness, entropy
//!   inequalities, Morrey decay and local estimates.

// `!(x < y)` guards also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod grid;
pub mod potential;
pub mod quadrature;
pub mod snapshot;
pub mod solver;
