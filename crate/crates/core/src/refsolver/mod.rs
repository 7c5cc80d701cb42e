//! Finite-difference reference solutions on the unit disc.

mod dirichlet;
mod grid;
mod neumann;
mod sparse;

pub use dirichlet::{solve_dirichlet_fd, solve_dirichlet_fd_with};
pub use grid::{interpolate, FieldGrid};
pub use neumann::{dirichlet_trace_from_neumann, dirichlet_trace_from_neumann_with};
pub use sparse::SolverOptions;
