use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use crate::geometry::Point2;

/// Value, gradient and Hessian of a scalar function of `(x, y)` at one point.
///
/// The Hessian is stored as `[xx, xy, yy]`, so it is symmetric by construction.
/// Jets also serve as adjoints: a jet of `∂J/∂value`, `∂J/∂grad`, `∂J/∂hess`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet2 {
    pub value: f64,
    pub grad: [f64; 2],
    pub hess: [f64; 3],
}

impl Jet2 {
    pub const ZERO: Jet2 = Jet2 {
        value: 0.0,
        grad: [0.0; 2],
        hess: [0.0; 3],
    };

    pub const fn constant(c: f64) -> Self {
        Jet2 {
            value: c,
            grad: [0.0; 2],
            hess: [0.0; 3],
        }
    }

    /// The coordinate function `x` at `p`.
    pub const fn var_x(p: Point2) -> Self {
        Jet2 {
            value: p.x,
            grad: [1.0, 0.0],
            hess: [0.0; 3],
        }
    }

    /// The coordinate function `y` at `p`.
    pub const fn var_y(p: Point2) -> Self {
        Jet2 {
            value: p.y,
            grad: [0.0, 1.0],
            hess: [0.0; 3],
        }
    }

    pub fn hess_matrix(&self) -> [[f64; 2]; 2] {
        [[self.hess[0], self.hess[1]], [self.hess[1], self.hess[2]]]
    }

    pub fn laplacian(&self) -> f64 {
        self.hess[0] + self.hess[2]
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad.iter().all(|g| g.is_finite())
            && self.hess.iter().all(|h| h.is_finite())
    }

    /// Composition `f ∘ self` given `f`, `f'` and `f''` at `self.value`.
    pub fn map(self, f0: f64, f1: f64, f2: f64) -> Jet2 {
        let [gx, gy] = self.grad;
        let [hxx, hxy, hyy] = self.hess;
        Jet2 {
            value: f0,
            grad: [f1 * gx, f1 * gy],
            hess: [
                f2 * gx * gx + f1 * hxx,
                f2 * gx * gy + f1 * hxy,
                f2 * gy * gy + f1 * hyy,
            ],
        }
    }

    pub fn scale(self, c: f64) -> Jet2 {
        Jet2 {
            value: c * self.value,
            grad: [c * self.grad[0], c * self.grad[1]],
            hess: [c * self.hess[0], c * self.hess[1], c * self.hess[2]],
        }
    }

    pub fn exp(self) -> Jet2 {
        let e = self.value.exp();
        self.map(e, e, e)
    }

    pub fn sqrt(self) -> Jet2 {
        let s = self.value.sqrt();
        self.map(s, 0.5 / s, -0.25 / (s * self.value))
    }

    pub fn sin(self) -> Jet2 {
        let (s, c) = self.value.sin_cos();
        self.map(s, c, -s)
    }

    pub fn cos(self) -> Jet2 {
        let (s, c) = self.value.sin_cos();
        self.map(c, -s, -c)
    }

    pub fn tanh(self) -> Jet2 {
        let t = self.value.tanh();
        let d = 1.0 - t * t;
        self.map(t, d, -2.0 * t * d)
    }

    pub fn powi(self, n: i32) -> Jet2 {
        let v = self.value;
        let nf = n as f64;
        self.map(
            v.powi(n),
            nf * v.powi(n - 1),
            nf * (nf - 1.0) * v.powi(n - 2),
        )
    }

    pub fn recip(self) -> Jet2 {
        let r = 1.0 / self.value;
        self.map(r, -r * r, 2.0 * r * r * r)
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        Jet2 {
            value: self.value + o.value,
            grad: [self.grad[0] + o.grad[0], self.grad[1] + o.grad[1]],
            hess: [
                self.hess[0] + o.hess[0],
                self.hess[1] + o.hess[1],
                self.hess[2] + o.hess[2],
            ],
        }
    }
}

impl AddAssign for Jet2 {
    fn add_assign(&mut self, o: Jet2) {
        *self = *self + o;
    }
}

impl Add<f64> for Jet2 {
    type Output = Jet2;
    fn add(mut self, c: f64) -> Jet2 {
        self.value += c;
        self
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        self + (-o)
    }
}

impl Sub<f64> for Jet2 {
    type Output = Jet2;
    fn sub(mut self, c: f64) -> Jet2 {
        self.value -= c;
        self
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self.scale(-1.0)
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        let (a, b) = (self, o);
        Jet2 {
            value: a.value * b.value,
            grad: [
                a.grad[0] * b.value + a.value * b.grad[0],
                a.grad[1] * b.value + a.value * b.grad[1],
            ],
            hess: [
                a.hess[0] * b.value + 2.0 * a.grad[0] * b.grad[0] + a.value * b.hess[0],
                a.hess[1] * b.value
                    + a.grad[0] * b.grad[1]
                    + a.grad[1] * b.grad[0]
                    + a.value * b.hess[1],
                a.hess[2] * b.value + 2.0 * a.grad[1] * b.grad[1] + a.value * b.hess[2],
            ],
        }
    }
}

impl Mul<f64> for Jet2 {
    type Output = Jet2;
    fn mul(self, c: f64) -> Jet2 {
        self.scale(c)
    }
}

impl Mul<Jet2> for f64 {
    type Output = Jet2;
    fn mul(self, j: Jet2) -> Jet2 {
        j.scale(self)
    }
}

impl Div for Jet2 {
    type Output = Jet2;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet2) -> Jet2 {
        self * o.recip()
    }
}

impl Div<f64> for Jet2 {
    type Output = Jet2;
    fn div(self, c: f64) -> Jet2 {
        self.scale(1.0 / c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(f: impl Fn(Jet2, Jet2) -> Jet2, p: Point2) {
        let j = f(Jet2::var_x(p), Jet2::var_y(p));
        let v = |x: f64, y: f64| f(Jet2::constant(x), Jet2::constant(y)).value;
        let h = 1e-4;
        let gx = (v(p.x + h, p.y) - v(p.x - h, p.y)) / (2.0 * h);
        let gy = (v(p.x, p.y + h) - v(p.x, p.y - h)) / (2.0 * h);
        let hxx = (v(p.x + h, p.y) - 2.0 * v(p.x, p.y) + v(p.x - h, p.y)) / (h * h);
        let hyy = (v(p.x, p.y + h) - 2.0 * v(p.x, p.y) + v(p.x, p.y - h)) / (h * h);
        let hxy = (v(p.x + h, p.y + h) - v(p.x + h, p.y - h) - v(p.x - h, p.y + h)
            + v(p.x - h, p.y - h))
            / (4.0 * h * h);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-5 * (1.0 + b.abs());
        assert!(close(j.grad[0], gx) && close(j.grad[1], gy), "{j:?} vs ({gx}, {gy})");
        assert!(
            close(j.hess[0], hxx) && close(j.hess[1], hxy) && close(j.hess[2], hyy),
            "{j:?} vs ({hxx}, {hxy}, {hyy})"
        );
    }

    #[test]
    fn arithmetic_matches_finite_differences() {
        let p = Point2::new(0.3, -0.4);
        fd_check(|x, y| x * y + x.sin() * y.exp(), p);
        fd_check(|x, y| (x * x + y * y + 1.0).sqrt() / (y.cos() + 2.0), p);
        fd_check(|x, y| (x * 2.0 - y).tanh().powi(3), p);
    }

    #[test]
    fn coordinates_have_unit_gradient() {
        let p = Point2::new(1.0, 2.0);
        assert_eq!(Jet2::var_x(p).grad, [1.0, 0.0]);
        assert_eq!(Jet2::var_y(p).grad, [0.0, 1.0]);
        assert_eq!((Jet2::var_x(p) * Jet2::var_y(p)).hess, [0.0, 1.0, 0.0]);
    }
}
