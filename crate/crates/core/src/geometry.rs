//! Collocation domains and mesh-free point sampling.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Polar angle in [0, 2π).
    pub fn angle(&self) -> f64 {
        wrap_angle(self.y.atan2(self.x))
    }
}

/// Maps any angle into [0, 2π).
pub fn wrap_angle(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

pub type InsideFn = Arc<dyn Fn(Point2) -> bool + Send + Sync>;
pub type BoundaryFn = Arc<dyn Fn(f64) -> Point2 + Send + Sync>;

/// Axis-aligned box `[xmin, xmax] × [ymin, ymax]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl BoundingBox {
    pub const UNIT: BoundingBox = BoundingBox {
        xmin: -1.0,
        xmax: 1.0,
        ymin: -1.0,
        ymax: 1.0,
    };
}

#[derive(Clone)]
pub enum Domain {
    UnitDisc,
    /// A region given by an indicator over a bounding box, with a boundary
    /// parametrized by angle.
    Implicit {
        inside: InsideFn,
        bbox: BoundingBox,
        boundary: BoundaryFn,
    },
}

impl fmt::Debug for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::UnitDisc => write!(f, "UnitDisc"),
            Domain::Implicit { bbox, .. } => write!(f, "Implicit({bbox:?})"),
        }
    }
}

const REJECTION_MIN_TRIALS: usize = 1_000_000;
const REJECTION_MIN_RATE: f64 = 1e-4;

impl Domain {
    pub fn implicit(
        inside: impl Fn(Point2) -> bool + Send + Sync + 'static,
        bbox: BoundingBox,
        boundary: impl Fn(f64) -> Point2 + Send + Sync + 'static,
    ) -> Self {
        Domain::Implicit {
            inside: Arc::new(inside),
            bbox,
            boundary: Arc::new(boundary),
        }
    }

    pub fn contains(&self, p: Point2) -> bool {
        match self {
            Domain::UnitDisc => p.x * p.x + p.y * p.y < 1.0,
            Domain::Implicit { inside, .. } => inside(p),
        }
    }

    pub fn bbox(&self) -> BoundingBox {
        match self {
            Domain::UnitDisc => BoundingBox::UNIT,
            Domain::Implicit { bbox, .. } => *bbox,
        }
    }

    pub fn boundary_point(&self, phi: f64) -> Point2 {
        match self {
            Domain::UnitDisc => Point2::new(phi.cos(), phi.sin()),
            Domain::Implicit { boundary, .. } => boundary(phi),
        }
    }

    /// Checks that `boundary_point(φ)` separates inside from outside for
    /// `checks` equally spaced angles, probing at distance `eps` along the
    /// normal of the parametrization.
    pub fn boundary_is_consistent(&self, checks: usize, eps: f64) -> bool {
        (0..checks).all(|k| {
            let phi = TAU * k as f64 / checks as f64;
            let p = self.boundary_point(phi);
            let dphi = 1e-6;
            let a = self.boundary_point(phi - dphi);
            let b = self.boundary_point(phi + dphi);
            let (tx, ty) = (b.x - a.x, b.y - a.y);
            let len = tx.hypot(ty);
            if len == 0.0 {
                return false;
            }
            let (nx, ny) = (ty / len, -tx / len);
            let plus = Point2::new(p.x + eps * nx, p.y + eps * ny);
            let minus = Point2::new(p.x - eps * nx, p.y - eps * ny);
            self.contains(plus) != self.contains(minus)
        })
    }
}

/// A set of collocation points. Boundary batches also carry the angle that
/// generated each point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointBatch {
    pub points: Vec<Point2>,
    pub angles: Option<Vec<f64>>,
}

impl PointBatch {
    pub fn interior(points: Vec<Point2>) -> Self {
        Self {
            points,
            angles: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The sub-batch at `indices`, angles included.
    pub fn select(&self, indices: &[usize]) -> PointBatch {
        PointBatch {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            angles: self
                .angles
                .as_ref()
                .map(|a| indices.iter().map(|&i| a[i]).collect()),
        }
    }
}

/// Draws `n` points uniformly by area. The unit disc uses the inverse-CDF map
/// `r = sqrt(U₁)`, `θ = 2πU₂`; implicit domains use rejection in the bounding box.
pub fn sample_interior(domain: &Domain, n: usize, seed: u64) -> Result<PointBatch> {
    if n == 0 {
        return Err(Error::config("interior sample count must be at least 1"));
    }
    let mut rng = SplitMix64::new(seed);
    let mut points = Vec::with_capacity(n);
    match domain {
        Domain::UnitDisc => {
            for _ in 0..n {
                let r = rng.next_f64().sqrt();
                let theta = TAU * rng.next_f64();
                points.push(Point2::new(r * theta.cos(), r * theta.sin()));
            }
        }
        Domain::Implicit { inside, bbox, .. } => {
            let mut trials = 0usize;
            while points.len() < n {
                let p = Point2::new(
                    rng.uniform(bbox.xmin, bbox.xmax),
                    rng.uniform(bbox.ymin, bbox.ymax),
                );
                trials += 1;
                if inside(p) {
                    points.push(p);
                }
                if trials >= REJECTION_MIN_TRIALS {
                    let rate = points.len() as f64 / trials as f64;
                    if rate < REJECTION_MIN_RATE {
                        return Err(Error::DegenerateDomain { rate, trials });
                    }
                }
            }
        }
    }
    Ok(PointBatch::interior(points))
}

/// Draws `n` boundary points with angles uniform on [0, 2π).
pub fn sample_boundary(domain: &Domain, n: usize, seed: u64) -> Result<PointBatch> {
    if n == 0 {
        return Err(Error::config("boundary sample count must be at least 1"));
    }
    let mut rng = SplitMix64::new(seed);
    let angles: Vec<f64> = (0..n).map(|_| wrap_angle(TAU * rng.next_f64())).collect();
    let points = angles.iter().map(|&phi| domain.boundary_point(phi)).collect();
    Ok(PointBatch {
        points,
        angles: Some(angles),
    })
}
