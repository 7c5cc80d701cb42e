use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Point2, PointBatch};

use super::field::ScalarField;

/// Injected current density `(1/√(2π))·cos(nφ)` for electrode pattern `n`.
pub fn current_psi(n: i32, phi: f64) -> f64 {
    (n as f64 * phi).cos() / (2.0 * PI).sqrt()
}

/// Samples `(φ, value)` of a boundary function, read back by periodic linear
/// interpolation in angle.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    phis: Vec<f64>,
    values: Vec<f64>,
}

impl TraceTable {
    /// Builds a table; angles are wrapped into [0, 2π) and sorted.
    pub fn new(phis: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if phis.is_empty() || phis.len() != values.len() {
            return Err(Error::Data(format!(
                "trace table needs matching non-empty columns ({} angles, {} values)",
                phis.len(),
                values.len()
            )));
        }
        if phis.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::Data("trace table contains non-finite entries".into()));
        }
        let mut rows: Vec<(f64, f64)> = phis
            .into_iter()
            .map(wrap_angle)
            .zip(values)
            .collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        if rows.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Data("trace table has duplicate angles".into()));
        }
        let (phis, values) = rows.into_iter().unzip();
        Ok(Self { phis, values })
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let phis: Vec<f64> = (0..n).map(|k| TAU * k as f64 / n as f64).collect();
        let values = phis.iter().map(|&p| f(p)).collect();
        Self::new(phis, values)
    }

    pub fn phis(&self) -> &[f64] {
        &self.phis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.phis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phis.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn interpolate(&self, phi: f64) -> f64 {
        let n = self.phis.len();
        if n == 1 {
            return self.values[0];
        }
        let phi = wrap_angle(phi);
        // First index with angle > phi.
        let hi = self.phis.partition_point(|&p| p <= phi);
        let (i0, i1) = if hi == 0 || hi == n {
            (n - 1, 0)
        } else {
            (hi - 1, hi)
        };
        let (p0, p1) = (self.phis[i0], self.phis[i1]);
        let span = wrap_angle(p1 - p0);
        let span = if span == 0.0 { TAU } else { span };
        let t = wrap_angle(phi - p0) / span;
        self.values[i0] + t * (self.values[i1] - self.values[i0])
    }
}

/// Prescribed boundary values, for `u₀` in the forward problem or `σ₀` in
/// the inverse problem.
#[derive(Clone)]
pub enum BoundaryData {
    Constant(f64),
    Table(TraceTable),
    /// Evaluate a field at the boundary point itself.
    Field(Arc<dyn ScalarField>),
}

impl std::fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundaryData::Constant(c) => write!(f, "Constant({c})"),
            BoundaryData::Table(t) => write!(f, "Table({} rows)", t.len()),
            BoundaryData::Field(_) => write!(f, "Field"),
        }
    }
}

impl BoundaryData {
    pub fn value(&self, x: Point2, phi: f64) -> Result<f64> {
        Ok(match self {
            BoundaryData::Constant(c) => *c,
            BoundaryData::Table(t) => t.interpolate(phi),
            BoundaryData::Field(f) => f.value(x)?,
        })
    }

    /// Values at every point of a boundary batch.
    pub fn values_on(&self, batch: &PointBatch) -> Result<Vec<f64>> {
        let angles = batch
            .angles
            .as_ref()
            .ok_or_else(|| Error::Data("boundary batch carries no angles".into()))?;
        if angles.len() != batch.points.len() {
            return Err(Error::Data("boundary batch is missing angles".into()));
        }
        batch
            .points
            .iter()
            .zip(angles)
            .map(|(&p, &phi)| self.value(p, phi))
            .collect()
    }
}
