// SPDX-License-Identifier: Apache-2.0

//! Named scalar and bivariate function descriptors.

use std::fmt;
use std::sync::Arc;

type Scalar = dyn Fn(f64) -> f64 + Send + Sync;
type Bivariate = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// A univariate function with a human-readable label.
#[derive(Clone)]
pub struct ScalarFn {
    label: String,
    f: Arc<Scalar>,
}

impl ScalarFn {
    pub fn new(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("{c}"), move |_| c)
    }

    pub fn identity() -> Self {
        Self::new("x", |x| x)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarFn({})", self.label)
    }
}

/// A kernel `k(x, t)`. Only values with `t < x` are ever requested.
#[derive(Clone)]
pub struct KernelFn {
    label: String,
    f: Arc<Bivariate>,
}

impl KernelFn {
    pub fn new(
        label: impl Into<String>,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    /// `k(x, t) = c` on the triangle.
    pub fn constant(c: f64) -> Self {
        Self::new(format!("{c}"), move |_, _| c)
    }

    /// Convolution kernel `k(x, t) = q(x - t)`.
    pub fn lag(q: ScalarFn) -> Self {
        let label = format!("q(x-t), q = {}", q.label());
        Self::new(label, move |x, t| q.eval(x - t))
    }

    #[inline]
    pub fn eval(&self, x: f64, t: f64) -> f64 {
        (self.f)(x, t)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for KernelFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KernelFn({})", self.label)
    }
}
