//! Comparison of fields sampled on a common grid.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::pde::ScalarField;
use crate::refsolver::FieldGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mse: f64,
    /// dB; `+∞` when the fields agree exactly.
    pub psnr: f64,
    pub max_abs_err: f64,
    pub rel_err_grid: FieldGrid,
}

impl EvalReport {
    /// `key = value` lines.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "mse = {:e}", self.mse);
        let _ = writeln!(s, "psnr = {}", self.psnr);
        let _ = writeln!(s, "max_abs_err = {:e}", self.max_abs_err);
        let _ = writeln!(s, "cells = {}", self.rel_err_grid.masked_count());
        s
    }
}

fn check_congruent(reference: &FieldGrid, approx: &FieldGrid) -> Result<()> {
    if reference.same_layout(approx) {
        Ok(())
    } else {
        Err(Error::Shape(
            "grids differ in size, extent or mask".into(),
        ))
    }
}

fn pairs<'a>(reference: &'a FieldGrid, approx: &'a FieldGrid) -> impl Iterator<Item = (f64, f64)> + 'a {
    reference
        .values()
        .iter()
        .zip(approx.values())
        .zip(reference.mask())
        .filter(|(_, &m)| m)
        .map(|((&r, &a), _)| (r, a))
}

/// `(ref − approx) / max(ref)` on the mask.
pub fn relative_error(reference: &FieldGrid, approx: &FieldGrid) -> Result<FieldGrid> {
    check_congruent(reference, approx)?;
    let peak = reference
        .masked()
        .map(|(_, v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    if peak == 0.0 || !peak.is_finite() {
        return Err(Error::DegenerateReference(format!(
            "reference maximum is {peak}"
        )));
    }
    let values = reference
        .values()
        .iter()
        .zip(approx.values())
        .map(|(r, a)| (r - a) / peak)
        .collect();
    FieldGrid::new(
        reference.nx(),
        reference.ny(),
        reference.bbox(),
        values,
        reference.mask().to_vec(),
    )
}

/// Mean squared error over the mask and `10·log₁₀(max|ref|² / mse)`.
pub fn mse_psnr(reference: &FieldGrid, approx: &FieldGrid) -> Result<(f64, f64)> {
    check_congruent(reference, approx)?;
    let (mut sum, mut count, mut peak) = (0.0, 0usize, 0.0f64);
    for (r, a) in pairs(reference, approx) {
        sum += (r - a) * (r - a);
        count += 1;
        peak = peak.max(r.abs());
    }
    if count == 0 {
        return Err(Error::DegenerateReference("empty mask".into()));
    }
    let mse = sum / count as f64;
    let psnr = if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / mse).log10()
    };
    Ok((mse, psnr))
}

pub fn evaluate(reference: &FieldGrid, approx: &FieldGrid) -> Result<EvalReport> {
    let (mse, psnr) = mse_psnr(reference, approx)?;
    let max_abs_err = pairs(reference, approx)
        .map(|(r, a)| (r - a).abs())
        .fold(0.0, f64::max);
    Ok(EvalReport {
        mse,
        psnr,
        max_abs_err,
        rel_err_grid: relative_error(reference, approx)?,
    })
}

/// Values of `field` on the masked cells of `layout`.
pub fn sample_field(field: &dyn ScalarField, layout: &FieldGrid) -> Result<FieldGrid> {
    layout.map_cells(|p| field.value(p))
}

/// Analytic `∂/∂x` of `field` on the masked cells of `layout`.
pub fn sample_dx(field: &dyn ScalarField, layout: &FieldGrid) -> Result<FieldGrid> {
    layout.map_cells(|p| Ok(field.jet(p)?.grad[0]))
}

/// Mean of the masked cells accepted by `select`.
pub fn masked_mean(grid: &FieldGrid, select: impl Fn(crate::geometry::Point2) -> bool) -> Option<f64> {
    let (sum, n) = grid
        .masked()
        .filter(|(p, _)| select(*p))
        .fold((0.0, 0usize), |(s, n), (_, v)| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// `‖approx − ref‖₂ / ‖ref‖₂` over the mask.
pub fn relative_l2(reference: &FieldGrid, approx: &FieldGrid) -> Result<f64> {
    check_congruent(reference, approx)?;
    let (num, den) = pairs(reference, approx)
        .fold((0.0, 0.0), |(n, d), (r, a)| (n + (a - r) * (a - r), d + r * r));
    if den == 0.0 {
        return Err(Error::DegenerateReference("reference has zero norm".into()));
    }
    Ok((num / den).sqrt())
}
