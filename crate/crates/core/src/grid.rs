// SPDX-License-Identifier: Apache-2.0

//! Midpoint discretization of `L2(a, b)`.
//!
//! The interval is split into `n` cells of width `h = (b - a) / n` and every
//! cell is represented by its centre `x_i = a + (i + 1/2) h` (zero-based).
//! Nodes never touch the endpoints or each other, so for `i > j` the lag
//! `x_i - x_j` is at least `h`.

use std::sync::Arc;

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::func::ScalarFn;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n: usize,
    a: f64,
    b: f64,
    h: f64,
    nodes: Vec<f64>,
}

impl Grid {
    /// Builds a shared midpoint grid with `n >= 2` cells on `(a, b)`.
    pub fn new(n: usize, a: f64, b: f64) -> Result<Arc<Grid>> {
        if n < 2 {
            return Err(Error::invalid(format!("grid needs at least 2 cells, got {n}")));
        }
        if !(a.is_finite() && b.is_finite()) || a >= b {
            return Err(Error::invalid(format!("interval ({a}, {b}) must be finite with a < b")));
        }
        let h = (b - a) / n as f64;
        let nodes = (0..n).map(|i| a + (i as f64 + 0.5) * h).collect();
        Ok(Arc::new(Grid { n, a, b, h, nodes }))
    }

    /// Unit interval `(0, 1)`.
    pub fn unit(n: usize) -> Result<Arc<Grid>> {
        Self::new(n, 0.0, 1.0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn span(&self) -> f64 {
        self.b - self.a
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    /// Errors unless `self` and `other` describe the same discretization.
    pub fn ensure_same(self: &Arc<Self>, other: &Arc<Grid>) -> Result<()> {
        if Arc::ptr_eq(self, other) || **self == **other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "n={} on ({}, {}) vs n={} on ({}, {})",
                self.n, self.a, self.b, other.n, other.a, other.b
            )))
        }
    }
}

/// Node values of a function on a [`Grid`].
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Array1<f64>,
}

impl GridFunction {
    pub fn new(grid: &Arc<Grid>, values: Array1<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::invalid(format!(
                "grid function has {} values, grid has {} nodes",
                values.len(),
                grid.n()
            )));
        }
        Ok(Self {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: Array1::zeros(grid.n()),
        }
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: Array1::from_elem(grid.n(), c),
        }
    }

    /// Samples `f` at every node. A non-finite value is reported with the
    /// offending node.
    pub fn sample(f: &ScalarFn, grid: &Arc<Grid>) -> Result<Self> {
        let mut values = Array1::zeros(grid.n());
        for (i, (&x, v)) in grid.nodes().iter().zip(values.iter_mut()).enumerate() {
            let y = f.eval(x);
            if !y.is_finite() {
                return Err(Error::Sampling { index: i, x, value: y });
            }
            *v = y;
        }
        Ok(Self {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array1<f64> {
        self.values
    }

    /// Discrete `L_p` norm `(sum h |f_i|^p)^(1/p)`; `p = inf` gives the max norm.
    pub fn norm_p(&self, p: f64) -> Result<f64> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::invalid(format!("norm exponent must be >= 1, got {p}")));
        }
        if p.is_infinite() {
            return Ok(self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
        }
        let h = self.grid.h();
        if p == 2.0 {
            return Ok((h * self.values.dot(&self.values)).sqrt());
        }
        let s: f64 = self.values.iter().map(|v| v.abs().powf(p)).sum();
        Ok((h * s).powf(1.0 / p))
    }

    pub fn norm2(&self) -> f64 {
        (self.grid.h() * self.values.dot(&self.values)).sqrt()
    }

    /// Discrete inner product `sum h f_i g_i`.
    pub fn inner_product(&self, other: &GridFunction) -> Result<f64> {
        self.grid.ensure_same(&other.grid)?;
        Ok(self.grid.h() * self.values.dot(&other.values))
    }
}
