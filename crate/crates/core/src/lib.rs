//! Mesh-free neural solver for the conductivity equation `∇·(σ∇u) = 0`.
//!
//! A small tanh network approximates the unknown field (the potential `u` in
//! the forward problem, the conductivity `σ` in the inverse problem) and is
//! trained on random collocation points to minimize a cost built from the
//! PDE residual, a relaxed maximum of the residual, a boundary mismatch, and
//! regularizers.

pub mod cli;
pub mod diffnet;
pub mod error;
pub mod geometry;
pub mod io;
pub mod loss;
pub mod metrics;
pub mod optim;
pub mod pde;
pub mod refsolver;
pub mod rng;

pub use error::{Error, Result};
