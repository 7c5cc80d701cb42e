use serde::{Deserialize, Serialize};

use crate::diffnet::Jet2;
use crate::error::{Error, Result};
use crate::geometry::Point2;

use super::field::ScalarField;

pub const DEFAULT_SMOOTHING: f64 = 0.05;

/// Beyond this many widths from an interface the logistic profile is flat to
/// machine precision.
const SATURATION: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhantomId {
    Phantom1,
    Phantom2,
}

impl std::str::FromStr for PhantomId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "phantom1" => Ok(PhantomId::Phantom1),
            "phantom2" => Ok(PhantomId::Phantom2),
            other => Err(Error::UnknownCase(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum Shape {
    Circle {
        center: [f64; 2],
        radius: f64,
    },
    /// Ellipse with semi-axes `(a, b)` along its own axes, rotated by `angle`.
    Ellipse {
        center: [f64; 2],
        semi_axes: [f64; 2],
        angle: f64,
    },
}

impl Shape {
    /// Approximately signed distance to the shape's boundary (negative inside).
    ///
    /// Exact for circles. For ellipses this is `F/|∇F|` with
    /// `F = (x'/a)² + (y'/b)² − 1`: zero on the boundary with unit gradient
    /// there, and tending to −∞ at the center.
    fn distance(&self, x: Jet2, y: Jet2) -> Jet2 {
        match *self {
            Shape::Circle { center, radius } => {
                let dx = x - center[0];
                let dy = y - center[1];
                (dx * dx + dy * dy).sqrt() - radius
            }
            Shape::Ellipse {
                center,
                semi_axes: [a, b],
                angle,
            } => {
                let (s, c) = angle.sin_cos();
                let dx = x - center[0];
                let dy = y - center[1];
                let xr = dx * c + dy * s;
                let yr = dy * c - dx * s;
                let f = xr * xr / (a * a) + yr * yr / (b * b) - 1.0;
                let g = (xr * xr / a.powi(4) + yr * yr / b.powi(4)).sqrt() * 2.0;
                f / g
            }
        }
    }

    fn distance_value(&self, p: Point2) -> f64 {
        self.distance(Jet2::constant(p.x), Jet2::constant(p.y)).value
    }

    /// Whether `p` is inside the sharp (unsmoothed) shape.
    pub fn contains(&self, p: Point2) -> bool {
        self.distance_value(p) < 0.0
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Shape::Circle { radius, .. } => radius > 0.0,
            Shape::Ellipse { semi_axes, .. } => semi_axes[0] > 0.0 && semi_axes[1] > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config_key("phantom", "inclusion sizes must be positive"))
        }
    }
}

/// Unknown keys are rejected by the flattened `Shape`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inclusion {
    #[serde(flatten)]
    pub shape: Shape,
    pub value: f64,
}

/// Piecewise-constant conductivity smoothed across each interface by the
/// logistic profile `s(t) = 1/(1 + e^{4t})` of signed distance over width `w`.
/// Later inclusions are painted over earlier ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phantom {
    pub background: f64,
    pub smoothing: f64,
    pub inclusions: Vec<Inclusion>,
}

impl Phantom {
    /// A disc of conductivity 0.2 centered at (0.3, 0) with radius 0.25, on background 1.
    pub fn phantom1(smoothing: f64) -> Self {
        Self {
            background: 1.0,
            smoothing,
            inclusions: vec![Inclusion {
                shape: Shape::Circle {
                    center: [0.3, 0.0],
                    radius: 0.25,
                },
                value: 0.2,
            }],
        }
    }

    /// Two ellipses of conductivity 5 and a disc of conductivity 2, on background 1.
    pub fn phantom2(smoothing: f64) -> Self {
        Self {
            background: 1.0,
            smoothing,
            inclusions: vec![
                Inclusion {
                    shape: Shape::Ellipse {
                        center: [-0.4, 0.25],
                        semi_axes: [0.3, 0.15],
                        angle: std::f64::consts::FRAC_PI_6,
                    },
                    value: 5.0,
                },
                Inclusion {
                    shape: Shape::Ellipse {
                        center: [-0.25, -0.45],
                        semi_axes: [0.25, 0.12],
                        angle: -std::f64::consts::FRAC_PI_8,
                    },
                    value: 5.0,
                },
                Inclusion {
                    shape: Shape::Circle {
                        center: [0.45, 0.05],
                        radius: 0.2,
                    },
                    value: 2.0,
                },
            ],
        }
    }

    pub fn from_id(id: PhantomId, smoothing: f64) -> Self {
        match id {
            PhantomId::Phantom1 => Self::phantom1(smoothing),
            PhantomId::Phantom2 => Self::phantom2(smoothing),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.smoothing > 0.0) {
            return Err(Error::config_key("smoothing", "smoothing width must be positive"));
        }
        for inc in &self.inclusions {
            inc.shape.validate()?;
        }
        Ok(())
    }

    /// Inclusions are blended in order, `σ ← (1 − s)·σ + s·σ_in`, so the field
    /// stays between the smallest and largest conductivity present.
    pub fn eval(&self, p: Point2) -> Jet2 {
        let w = self.smoothing;
        let mut out = Jet2::constant(self.background);
        for inc in &self.inclusions {
            let t = inc.shape.distance_value(p) / w;
            if t > SATURATION {
                continue;
            }
            if t < -SATURATION {
                out = Jet2::constant(inc.value);
                continue;
            }
            let d = inc.shape.distance(Jet2::var_x(p), Jet2::var_y(p));
            let tj = d.scale(1.0 / w);
            let s = 1.0 / (1.0 + (4.0 * tj.value).exp());
            let s1 = -4.0 * s * (1.0 - s);
            let s2 = -4.0 * (1.0 - 2.0 * s) * s1;
            let sj = tj.map(s, s1, s2);
            out = out * (-sj + 1.0) + sj.scale(inc.value);
        }
        out
    }
}

impl ScalarField for Phantom {
    fn jet(&self, x: Point2) -> Result<Jet2> {
        Ok(self.eval(x))
    }
}

/// Conductivity of a default phantom with smoothing width `w`.
pub fn phantom_sigma(id: PhantomId, w: f64, x: Point2) -> Result<Jet2> {
    let phantom = Phantom::from_id(id, w);
    phantom.validate()?;
    Ok(phantom.eval(x))
}
