//! Forward and inverse cost functions.
//!
//! Both costs share the residual fidelity `λ·mean(L²) + μ·topK-mean(|L|)`
//! and an L1 boundary term; the forward cost adds weight decay on the
//! potential network, the inverse cost adds weight decay and a smoothed
//! total-variation penalty on the conductivity network.

use serde::{Deserialize, Serialize};

use crate::diffnet::{DenseNet, DerivOrder, Jet2, ParamGradient, Recorded};
use crate::error::{Error, Result};
use crate::geometry::{Point2, PointBatch};
use crate::pde::{residual_from_jets, BoundaryData, ResidualSpec, ScalarField};

pub const DEFAULT_TV_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda: f64,
    pub mu: f64,
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
    pub tv_eps: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self::forward_defaults()
    }
}

impl LossWeights {
    /// λ = 0.01, μ = 0.01, K = 40, α = 1e-8, no TV.
    pub fn forward_defaults() -> Self {
        Self {
            lambda: 0.01,
            mu: 1e-2,
            k: 40,
            alpha: 1e-8,
            beta: 0.0,
            p: 1.0,
            tv_eps: DEFAULT_TV_EPS,
        }
    }

    /// Forward defaults with μ = 1e-3 and TV weight β = 1e-3.
    pub fn inverse_defaults() -> Self {
        Self {
            mu: 1e-3,
            beta: 1e-3,
            ..Self::forward_defaults()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("lambda", self.lambda),
            ("mu", self.mu),
            ("alpha", self.alpha),
            ("beta", self.beta),
        ];
        for (key, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config_key(key, "must be a finite non-negative number"));
            }
        }
        if self.k == 0 {
            return Err(Error::config_key("k", "must be at least 1"));
        }
        if !(self.p > 0.0 && self.p.is_finite()) {
            return Err(Error::config_key("p", "TV exponent must be positive"));
        }
        if !(self.tv_eps > 0.0) {
            return Err(Error::config_key("tv_eps", "must be positive"));
        }
        Ok(())
    }

    fn check_batch(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::Data("empty interior batch".into()));
        }
        if self.k > n {
            return Err(Error::config_key(
                "k",
                format!("K = {} exceeds the batch size {n}", self.k),
            ));
        }
        Ok(())
    }
}

/// Unweighted cost components and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossReport {
    /// `mean(Lᵢ²)`.
    pub l2_residual: f64,
    /// Mean of the K largest `|Lᵢ|`.
    pub topk_residual: f64,
    /// `mean |field(x_b) − target(x_b)|`.
    pub boundary: f64,
    /// `‖w‖²` over all network parameters.
    pub weight_decay: f64,
    /// `mean (|∇σ|² + ε²)^{p/2}`, zero for the forward cost.
    pub tv: f64,
    pub total: f64,
    /// Euclidean norm of the parameter gradient, zero when not computed.
    pub grad_norm: f64,
}

impl LossReport {
    pub fn recompose(&self, w: &LossWeights) -> f64 {
        w.lambda * self.l2_residual
            + w.mu * self.topk_residual
            + self.boundary
            + w.alpha * self.weight_decay
            + w.beta * self.tv
    }

    /// Component-wise mean of several reports.
    pub fn mean(reports: &[LossReport]) -> LossReport {
        let n = reports.len().max(1) as f64;
        let mut m = LossReport::default();
        for r in reports {
            m.l2_residual += r.l2_residual / n;
            m.topk_residual += r.topk_residual / n;
            m.boundary += r.boundary / n;
            m.weight_decay += r.weight_decay / n;
            m.tv += r.tv / n;
            m.total += r.total / n;
            m.grad_norm += r.grad_norm / n;
        }
        m
    }
}

fn sign(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Indices of the `k` largest `|values|`, ties broken by lower index.
fn topk_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    let cmp = |a: &usize, b: &usize| {
        values[*b]
            .abs()
            .total_cmp(&values[*a].abs())
            .then(a.cmp(b))
    };
    if k < idx.len() {
        idx.select_nth_unstable_by(k, cmp);
        idx.truncate(k);
    }
    idx
}

/// Mean of the `k` largest absolute values, a relaxation of the max-norm.
pub fn topk_mean(values: &[f64], k: usize) -> Result<f64> {
    if k == 0 || k > values.len() {
        return Err(Error::config_key(
            "k",
            format!("K = {k} out of range for {} values", values.len()),
        ));
    }
    Ok(topk_indices(values, k)
        .iter()
        .map(|&i| values[i].abs())
        .sum::<f64>()
        / k as f64)
}

/// Residual fidelity terms and `∂(λ·l2 + μ·topk)/∂Lᵢ`.
fn residual_terms(residuals: &[f64], w: &LossWeights) -> Result<(f64, f64, Vec<f64>)> {
    w.check_batch(residuals.len())?;
    if let Some(i) = residuals.iter().position(|r| !r.is_finite()) {
        return Err(Error::NumericalOverflow {
            index: i,
            what: "non-finite PDE residual".into(),
        });
    }
    let n = residuals.len() as f64;
    let l2 = residuals.iter().map(|r| r * r).sum::<f64>() / n;
    let mut d: Vec<f64> = residuals.iter().map(|r| 2.0 * w.lambda * r / n).collect();
    let top = topk_indices(residuals, w.k);
    let topk = top.iter().map(|&i| residuals[i].abs()).sum::<f64>() / w.k as f64;
    for &i in &top {
        d[i] += w.mu * sign(residuals[i]) / w.k as f64;
    }
    Ok((l2, topk, d))
}

/// Boundary L1 term and `∂/∂field(x_b)`.
fn boundary_terms(values: &[f64], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
    if values.is_empty() {
        return Err(Error::Data("empty boundary batch".into()));
    }
    let n = values.len() as f64;
    let mut total = 0.0;
    let d = values
        .iter()
        .zip(targets)
        .map(|(v, t)| {
            let e = v - t;
            total += e.abs();
            sign(e) / n
        })
        .collect();
    Ok((total / n, d))
}

/// Interior collocation data for the forward cost: the points with the
/// conductivity jets and source values there, which do not change in training.
#[derive(Debug, Clone, Default)]
pub struct ForwardInterior {
    pub points: Vec<Point2>,
    pub sigma: Vec<Jet2>,
    pub source: Vec<f64>,
}

impl ForwardInterior {
    pub fn prepare(spec: &ResidualSpec, points: &[Point2]) -> Result<Self> {
        let sigma = points
            .iter()
            .map(|&p| spec.sigma.jet(p))
            .collect::<Result<Vec<_>>>()?;
        let source = points
            .iter()
            .map(|&p| spec.source_value(p))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            points: points.to_vec(),
            sigma,
            source,
        })
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            sigma: indices.iter().map(|&i| self.sigma[i]).collect(),
            source: indices.iter().map(|&i| self.source[i]).collect(),
        }
    }
}

/// Interior data for the inverse cost: the points with the (frozen) potential jets.
#[derive(Debug, Clone, Default)]
pub struct InverseInterior {
    pub points: Vec<Point2>,
    pub u: Vec<Jet2>,
}

impl InverseInterior {
    pub fn prepare(u: &dyn ScalarField, points: &[Point2]) -> Result<Self> {
        if !u.has_hessian() {
            return Err(Error::UnsupportedBacking);
        }
        let u_jets = points.iter().map(|&p| u.jet(p)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            points: points.to_vec(),
            u: u_jets,
        })
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            u: indices.iter().map(|&i| self.u[i]).collect(),
        }
    }
}

/// Boundary points with their prescribed values.
#[derive(Debug, Clone, Default)]
pub struct BoundaryTargets {
    pub points: Vec<Point2>,
    pub targets: Vec<f64>,
}

impl BoundaryTargets {
    pub fn prepare(batch: &PointBatch, data: &BoundaryData) -> Result<Self> {
        Ok(Self {
            points: batch.points.clone(),
            targets: data.values_on(batch)?,
        })
    }
}

struct Terms {
    report: LossReport,
    interior_adj: Vec<Jet2>,
    boundary_adj: Vec<f64>,
}

fn forward_terms(
    u_int: &[Jet2],
    interior: &ForwardInterior,
    u_bdry: &[f64],
    boundary: &BoundaryTargets,
    weight_sq: f64,
    w: &LossWeights,
) -> Result<Terms> {
    let residuals: Vec<f64> = u_int
        .iter()
        .zip(&interior.sigma)
        .zip(&interior.source)
        .map(|((u, s), &f)| residual_from_jets(s, u, f))
        .collect();
    let (l2, topk, d) = residual_terms(&residuals, w)?;
    // ∂L/∂u: ∇u ↦ ∇σ, Hessian diagonal ↦ σ.
    let interior_adj = d
        .iter()
        .zip(&interior.sigma)
        .map(|(&di, s)| Jet2 {
            value: 0.0,
            grad: [di * s.grad[0], di * s.grad[1]],
            hess: [di * s.value, 0.0, di * s.value],
        })
        .collect();
    let (bnd, boundary_adj) = boundary_terms(u_bdry, &boundary.targets)?;
    let mut report = LossReport {
        l2_residual: l2,
        topk_residual: topk,
        boundary: bnd,
        weight_decay: weight_sq,
        tv: 0.0,
        total: 0.0,
        grad_norm: 0.0,
    };
    report.total = report.recompose(w);
    Ok(Terms {
        report,
        interior_adj,
        boundary_adj,
    })
}

fn inverse_terms(
    sigma_int: &[Jet2],
    interior: &InverseInterior,
    sigma_bdry: &[f64],
    boundary: &BoundaryTargets,
    weight_sq: f64,
    w: &LossWeights,
) -> Result<Terms> {
    let residuals: Vec<f64> = sigma_int
        .iter()
        .zip(&interior.u)
        .map(|(s, u)| residual_from_jets(s, u, 0.0))
        .collect();
    let (l2, topk, d) = residual_terms(&residuals, w)?;
    let n = sigma_int.len() as f64;
    let mut tv = 0.0;
    let interior_adj = sigma_int
        .iter()
        .zip(&interior.u)
        .zip(&d)
        .map(|((s, u), &di)| {
            let g2 = s.grad[0] * s.grad[0] + s.grad[1] * s.grad[1] + w.tv_eps * w.tv_eps;
            tv += g2.powf(0.5 * w.p) / n;
            let dtv = w.beta * w.p * g2.powf(0.5 * w.p - 1.0) / n;
            // ∂L/∂σ = Δu, ∂L/∂∇σ = ∇u.
            Jet2 {
                value: di * u.laplacian(),
                grad: [
                    di * u.grad[0] + dtv * s.grad[0],
                    di * u.grad[1] + dtv * s.grad[1],
                ],
                hess: [0.0; 3],
            }
        })
        .collect();
    let (bnd, boundary_adj) = boundary_terms(sigma_bdry, &boundary.targets)?;
    let mut report = LossReport {
        l2_residual: l2,
        topk_residual: topk,
        boundary: bnd,
        weight_decay: weight_sq,
        tv,
        total: 0.0,
        grad_norm: 0.0,
    };
    report.total = report.recompose(w);
    Ok(Terms {
        report,
        interior_adj,
        boundary_adj,
    })
}

fn backprop_terms(
    net: &DenseNet,
    interior: &Recorded,
    boundary: &Recorded,
    terms: Terms,
    alpha: f64,
) -> Result<(LossReport, ParamGradient)> {
    let mut grad = ParamGradient::zeros_like(net);
    interior.backprop(&terms.interior_adj, &mut grad)?;
    let badj: Vec<Jet2> = terms.boundary_adj.iter().map(|&d| Jet2::constant(d)).collect();
    boundary.backprop(&badj, &mut grad)?;
    grad.add_scaled_params(2.0 * alpha, net);
    let mut report = terms.report;
    report.grad_norm = grad.norm();
    if !report.total.is_finite() {
        return Err(Error::NonFinite("loss total".into()));
    }
    Ok((report, grad))
}

/// Forward cost and its parameter gradient on prepared data.
pub fn forward_loss_prepared(
    u: &DenseNet,
    interior: &ForwardInterior,
    boundary: &BoundaryTargets,
    w: &LossWeights,
) -> Result<(LossReport, ParamGradient)> {
    let int_tape = u.record(&interior.points, DerivOrder::Second)?;
    let bdry_tape = u.record(&boundary.points, DerivOrder::Value)?;
    let u_int = int_tape.jets();
    let u_bdry: Vec<f64> = bdry_tape.jets().iter().map(|j| j.value).collect();
    let terms = forward_terms(&u_int, interior, &u_bdry, boundary, u.param_sq_norm(), w)?;
    backprop_terms(u, &int_tape, &bdry_tape, terms, w.alpha)
}

/// Forward cost `λ·mean(L²) + μ·topK(|L|) + mean|u − u₀| + α‖w‖²` and its
/// exact parameter gradient (the top-K set is held fixed).
pub fn forward_loss(
    u: &DenseNet,
    spec: &ResidualSpec,
    interior: &PointBatch,
    boundary: &PointBatch,
    u0: &BoundaryData,
    w: &LossWeights,
) -> Result<(LossReport, ParamGradient)> {
    let int = ForwardInterior::prepare(spec, &interior.points)?;
    let bnd = BoundaryTargets::prepare(boundary, u0)?;
    forward_loss_prepared(u, &int, &bnd, w)
}

/// Forward cost of any field (no gradient).
pub fn forward_report(
    u: &dyn ScalarField,
    spec: &ResidualSpec,
    interior: &PointBatch,
    boundary: &PointBatch,
    u0: &BoundaryData,
    w: &LossWeights,
) -> Result<LossReport> {
    if !u.has_hessian() {
        return Err(Error::UnsupportedBacking);
    }
    let int = ForwardInterior::prepare(spec, &interior.points)?;
    let bnd = BoundaryTargets::prepare(boundary, u0)?;
    let u_int = int
        .points
        .iter()
        .map(|&p| u.jet(p))
        .collect::<Result<Vec<_>>>()?;
    let u_bdry = bnd
        .points
        .iter()
        .map(|&p| u.jet(p).map(|j| j.value))
        .collect::<Result<Vec<_>>>()?;
    Ok(forward_terms(&u_int, &int, &u_bdry, &bnd, u.param_sq_norm(), w)?.report)
}

/// Inverse cost and its parameter gradient on prepared data.
pub fn inverse_loss_prepared(
    sigma: &DenseNet,
    interior: &InverseInterior,
    boundary: &BoundaryTargets,
    w: &LossWeights,
) -> Result<(LossReport, ParamGradient)> {
    let int_tape = sigma.record(&interior.points, DerivOrder::First)?;
    let bdry_tape = sigma.record(&boundary.points, DerivOrder::Value)?;
    let s_int = int_tape.jets();
    let s_bdry: Vec<f64> = bdry_tape.jets().iter().map(|j| j.value).collect();
    let terms = inverse_terms(&s_int, interior, &s_bdry, boundary, sigma.param_sq_norm(), w)?;
    backprop_terms(sigma, &int_tape, &bdry_tape, terms, w.alpha)
}

/// Inverse cost `λ·mean(L²) + μ·topK(|L|) + mean|σ − σ₀| + α‖w‖² +
/// β·mean((|∇σ|² + ε²)^{p/2})` and its gradient with respect to the
/// conductivity network; `u` is fixed data.
pub fn inverse_loss(
    sigma: &DenseNet,
    u: &dyn ScalarField,
    interior: &PointBatch,
    boundary: &PointBatch,
    sigma0: &BoundaryData,
    w: &LossWeights,
) -> Result<(LossReport, ParamGradient)> {
    let int = InverseInterior::prepare(u, &interior.points)?;
    let bnd = BoundaryTargets::prepare(boundary, sigma0)?;
    inverse_loss_prepared(sigma, &int, &bnd, w)
}

/// Inverse cost of any conductivity field (no gradient).
pub fn inverse_report(
    sigma: &dyn ScalarField,
    u: &dyn ScalarField,
    interior: &PointBatch,
    boundary: &PointBatch,
    sigma0: &BoundaryData,
    w: &LossWeights,
) -> Result<LossReport> {
    let int = InverseInterior::prepare(u, &interior.points)?;
    let bnd = BoundaryTargets::prepare(boundary, sigma0)?;
    let s_int = int
        .points
        .iter()
        .map(|&p| sigma.jet(p))
        .collect::<Result<Vec<_>>>()?;
    let s_bdry = bnd
        .points
        .iter()
        .map(|&p| sigma.jet(p).map(|j| j.value))
        .collect::<Result<Vec<_>>>()?;
    Ok(inverse_terms(&s_int, &int, &s_bdry, &bnd, sigma.param_sq_norm(), w)?.report)
}
