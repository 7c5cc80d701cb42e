//! The conductivity equation: fields, residual, boundary currents, phantoms
//! and manufactured solutions.

mod boundary;
mod field;
mod manufactured;
mod phantom;

pub use boundary::{current_psi, BoundaryData, TraceTable};
pub use field::{AnalyticField, ConstantField, ScalarField};
pub use manufactured::{manufactured_case, ManufacturedCase};
pub use phantom::{phantom_sigma, Inclusion, Phantom, PhantomId, Shape, DEFAULT_SMOOTHING};

use std::sync::Arc;

use crate::diffnet::Jet2;
use crate::error::{Error, Result};
use crate::geometry::Point2;

/// `∇·(σ∇u) = f` with `f` defaulting to zero.
#[derive(Clone)]
pub struct ResidualSpec {
    pub sigma: Arc<dyn ScalarField>,
    pub source: Option<Arc<dyn ScalarField>>,
}

impl std::fmt::Debug for ResidualSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ResidualSpec")
            .field("has_source", &self.source.is_some())
            .finish()
    }
}

impl ResidualSpec {
    pub fn new(sigma: Arc<dyn ScalarField>) -> Self {
        Self {
            sigma,
            source: None,
        }
    }

    pub fn with_source(mut self, source: Arc<dyn ScalarField>) -> Self {
        self.source = Some(source);
        self
    }

    pub fn source_value(&self, x: Point2) -> Result<f64> {
        match &self.source {
            Some(f) => Ok(f.jet(x)?.value),
            None => Ok(0.0),
        }
    }

    /// Counts sampled points where `σ ≤ 0`, logging a warning if any.
    pub fn check_positive(&self, points: &[Point2]) -> Result<usize> {
        let mut bad = 0;
        for &p in points {
            if self.sigma.jet(p)?.value <= 0.0 {
                bad += 1;
            }
        }
        if bad > 0 {
            log::warn!("conductivity is non-positive at {bad} of {} points", points.len());
        }
        Ok(bad)
    }
}

/// `∇σ·∇u + σΔu − f` from precomputed jets.
#[inline]
pub fn residual_from_jets(sigma: &Jet2, u: &Jet2, f: f64) -> f64 {
    sigma.grad[0] * u.grad[0] + sigma.grad[1] * u.grad[1] + sigma.value * u.laplacian() - f
}

/// The divergence-form residual `∇·(σ∇u) − f` at `x`.
pub fn residual(spec: &ResidualSpec, u: &dyn ScalarField, x: Point2) -> Result<f64> {
    if !u.has_hessian() {
        return Err(Error::UnsupportedBacking);
    }
    let uj = u.jet(x)?;
    let sj = spec.sigma.jet(x)?;
    Ok(residual_from_jets(&sj, &uj, spec.source_value(x)?))
}
