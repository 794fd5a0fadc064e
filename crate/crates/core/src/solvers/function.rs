use std::cell::Cell;

use nalgebra::DVector;

use crate::error::{Error, Result};

/// The three contracts a solver may use: value, gradient and, optionally, a
/// Hessian-vector product.
pub trait SmoothFunction {
    fn value(&self, x: &DVector<f64>) -> Result<f64>;

    fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>>;

    fn value_and_gradient(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        Ok((self.value(x)?, self.gradient(x)?))
    }

    fn hess_vec(&self, _x: &DVector<f64>, _d: &DVector<f64>) -> Result<DVector<f64>> {
        Err(Error::Capability("no Hessian-vector product available".into()))
    }

    /// Whether [`SmoothFunction::hess_vec`] is implemented.
    fn has_hess_vec(&self) -> bool {
        false
    }
}

impl<T: SmoothFunction + ?Sized> SmoothFunction for &T {
    fn value(&self, x: &DVector<f64>) -> Result<f64> {
        (**self).value(x)
    }
    fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        (**self).gradient(x)
    }
    fn value_and_gradient(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        (**self).value_and_gradient(x)
    }
    fn hess_vec(&self, x: &DVector<f64>, d: &DVector<f64>) -> Result<DVector<f64>> {
        (**self).hess_vec(x, d)
    }
    fn has_hess_vec(&self) -> bool {
        (**self).has_hess_vec()
    }
}

type ValueFn<'a> = Box<dyn Fn(&DVector<f64>) -> f64 + 'a>;
type GradFn<'a> = Box<dyn Fn(&DVector<f64>) -> DVector<f64> + 'a>;
type HessFn<'a> = Box<dyn Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + 'a>;

/// A [`SmoothFunction`] assembled from closures.
pub struct FnFunction<'a> {
    value: ValueFn<'a>,
    gradient: GradFn<'a>,
    hess_vec: Option<HessFn<'a>>,
}

impl<'a> FnFunction<'a> {
    pub fn new(
        value: impl Fn(&DVector<f64>) -> f64 + 'a,
        gradient: impl Fn(&DVector<f64>) -> DVector<f64> + 'a,
    ) -> Self {
        FnFunction {
            value: Box::new(value),
            gradient: Box::new(gradient),
            hess_vec: None,
        }
    }

    pub fn with_hess_vec(mut self, hess_vec: impl Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + 'a) -> Self {
        self.hess_vec = Some(Box::new(hess_vec));
        self
    }
}

impl SmoothFunction for FnFunction<'_> {
    fn value(&self, x: &DVector<f64>) -> Result<f64> {
        Ok((self.value)(x))
    }
    fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok((self.gradient)(x))
    }
    fn hess_vec(&self, x: &DVector<f64>, d: &DVector<f64>) -> Result<DVector<f64>> {
        match &self.hess_vec {
            Some(h) => Ok(h(x, d)),
            None => Err(Error::Capability("no Hessian-vector product available".into())),
        }
    }
    fn has_hess_vec(&self) -> bool {
        self.hess_vec.is_some()
    }
}

/// Counts evaluations on behalf of a solver.
pub(crate) struct Counted<F> {
    inner: F,
    pub nfev: Cell<usize>,
    pub ngev: Cell<usize>,
    pub nhev: Cell<usize>,
}

impl<F: SmoothFunction> Counted<F> {
    pub fn new(inner: F) -> Self {
        Counted {
            inner,
            nfev: Cell::new(0),
            ngev: Cell::new(0),
            nhev: Cell::new(0),
        }
    }

    pub fn value(&self, x: &DVector<f64>) -> Result<f64> {
        self.nfev.set(self.nfev.get() + 1);
        self.inner.value(x)
    }

    pub fn value_and_gradient(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        self.nfev.set(self.nfev.get() + 1);
        self.ngev.set(self.ngev.get() + 1);
        self.inner.value_and_gradient(x)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.ngev.set(self.ngev.get() + 1);
        self.inner.gradient(x)
    }

    pub fn hess_vec(&self, x: &DVector<f64>, d: &DVector<f64>) -> Result<DVector<f64>> {
        self.nhev.set(self.nhev.get() + 1);
        self.inner.hess_vec(x, d)
    }
}
