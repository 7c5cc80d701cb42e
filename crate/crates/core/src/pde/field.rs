use std::sync::Arc;

use crate::diffnet::{DenseNet, Jet2};
use crate::error::Result;
use crate::geometry::Point2;

/// A scalar field on the plane that reports its value and derivatives.
pub trait ScalarField: Send + Sync {
    fn jet(&self, x: Point2) -> Result<Jet2>;

    fn value(&self, x: Point2) -> Result<f64> {
        Ok(self.jet(x)?.value)
    }

    /// Whether `jet` carries a meaningful Hessian.
    fn has_hessian(&self) -> bool {
        true
    }

    /// Squared norm of trainable parameters, zero for fixed fields.
    fn param_sq_norm(&self) -> f64 {
        0.0
    }
}

impl ScalarField for DenseNet {
    fn jet(&self, x: Point2) -> Result<Jet2> {
        Ok(self.eval_jet(x))
    }

    fn value(&self, x: Point2) -> Result<f64> {
        let v = self.eval(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(crate::error::Error::NonFinite(format!(
                "network output at ({}, {})",
                x.x, x.y
            )))
        }
    }

    fn param_sq_norm(&self) -> f64 {
        DenseNet::param_sq_norm(self)
    }
}

impl<T: ScalarField + ?Sized> ScalarField for Arc<T> {
    fn jet(&self, x: Point2) -> Result<Jet2> {
        (**self).jet(x)
    }

    fn value(&self, x: Point2) -> Result<f64> {
        (**self).value(x)
    }

    fn has_hessian(&self) -> bool {
        (**self).has_hessian()
    }

    fn param_sq_norm(&self) -> f64 {
        (**self).param_sq_norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantField(pub f64);

impl ScalarField for ConstantField {
    fn jet(&self, _: Point2) -> Result<Jet2> {
        Ok(Jet2::constant(self.0))
    }
}

type JetFn = dyn Fn(Jet2, Jet2) -> Jet2 + Send + Sync;

/// A closed-form field written in jet arithmetic over the coordinate jets.
///
/// ```
/// use eitnet::pde::{AnalyticField, ScalarField};
/// use eitnet::geometry::Point2;
/// let u = AnalyticField::new(|x, y| x * x - y * y);
/// let j = u.jet(Point2::new(0.5, 0.25)).unwrap();
/// assert_eq!(j.hess, [2.0, 0.0, -2.0]);
/// ```
#[derive(Clone)]
pub struct AnalyticField {
    f: Arc<JetFn>,
}

impl AnalyticField {
    pub fn new(f: impl Fn(Jet2, Jet2) -> Jet2 + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f) }
    }
}

impl ScalarField for AnalyticField {
    fn jet(&self, x: Point2) -> Result<Jet2> {
        Ok((self.f)(Jet2::var_x(x), Jet2::var_y(x)))
    }
}
