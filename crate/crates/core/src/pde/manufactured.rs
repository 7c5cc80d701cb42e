use std::f64::consts::PI;
use std::sync::Arc;

use crate::diffnet::Jet2;
use crate::error::{Error, Result};

use super::field::{AnalyticField, ConstantField, ScalarField};
use super::ResidualSpec;

/// Exact triple `(σ, u, f)` with `∇·(σ∇u) = f` identically.
#[derive(Clone)]
pub struct ManufacturedCase {
    pub id: String,
    pub sigma: Arc<dyn ScalarField>,
    pub u_exact: Arc<dyn ScalarField>,
    pub source: Arc<dyn ScalarField>,
}

impl std::fmt::Debug for ManufacturedCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ManufacturedCase({})", self.id)
    }
}

impl ManufacturedCase {
    pub fn residual_spec(&self) -> ResidualSpec {
        ResidualSpec::new(self.sigma.clone()).with_source(self.source.clone())
    }
}

/// `rⁿ cos(nφ) / (n√(2π))`, the harmonic whose Neumann trace on the unit
/// circle is the electrode current of pattern `n`.
pub fn harmonic_mode(n: u32) -> AnalyticField {
    AnalyticField::new(move |x, y| {
        // Real part of (x + iy)ⁿ.
        let (mut re, mut im) = (Jet2::constant(1.0), Jet2::ZERO);
        for _ in 0..n {
            let next_re = re * x - im * y;
            im = re * y + im * x;
            re = next_re;
        }
        re.scale(1.0 / (n as f64 * (2.0 * PI).sqrt()))
    })
}

/// Looks up a case by id: `harmonic-<n>` (n ≥ 1), `stratified` or `gaussian-bump`.
pub fn manufactured_case(id: &str) -> Result<ManufacturedCase> {
    let zero: Arc<dyn ScalarField> = Arc::new(ConstantField(0.0));
    let case = |sigma: Arc<dyn ScalarField>, u: Arc<dyn ScalarField>, f: Arc<dyn ScalarField>| {
        ManufacturedCase {
            id: id.to_string(),
            sigma,
            u_exact: u,
            source: f,
        }
    };
    if let Some(n) = id.strip_prefix("harmonic-") {
        let n: u32 = n
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| Error::UnknownCase(id.to_string()))?;
        return Ok(case(
            Arc::new(ConstantField(1.0)),
            Arc::new(harmonic_mode(n)),
            zero,
        ));
    }
    match id {
        "stratified" => Ok(case(
            Arc::new(AnalyticField::new(|_, y| (y * PI).sin().scale(0.5) + 1.0)),
            Arc::new(AnalyticField::new(|x, _| x)),
            zero,
        )),
        "gaussian-bump" => Ok(case(
            Arc::new(AnalyticField::new(|x, y| {
                (x * x + y * y).scale(-4.0).exp() + 1.0
            })),
            Arc::new(AnalyticField::new(|x, y| x * y)),
            // ∇σ·∇u with ∇σ = −8e^{−4r²}(x, y), ∇u = (y, x), Δu = 0.
            Arc::new(AnalyticField::new(|x, y| {
                (x * y).scale(-16.0) * (x * x + y * y).scale(-4.0).exp()
            })),
        )),
        other => Err(Error::UnknownCase(other.to_string())),
    }
}
