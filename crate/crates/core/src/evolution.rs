// SPDX-License-Identifier: Apache-2.0

//! The groups `exp(itS)` and `exp(itT)` on the grid.
//!
//! `exp(itS)` is diagonal and exact. `exp(itT)` uses scaling and squaring
//! with the degree-13 Padé approximant; the generator `i t (diag(phi) + h V)`
//! is lower triangular, so every product and the final solve stay
//! triangular and no eigendecomposition is involved.

use std::io::Write;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::linalg::{self, PowerOptions};
use crate::operator::{KernelOperator, MultiplicationOperator};
use crate::transform::{self, Inverse};

/// Default bound on `|t|`.
pub const DEFAULT_T_CAP: f64 = 100.0;

/// Padé-13 numerator coefficients `b_0..b_13`.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// The scaled matrix has 1-norm at most this before the approximant is applied.
const SCALED_NORM: f64 = 0.5;

/// Complex values on a grid, `re + i im` per node.
#[derive(Debug, Clone)]
pub struct ComplexGridFunction {
    grid: Arc<Grid>,
    values: Array1<Complex64>,
}

impl ComplexGridFunction {
    pub fn new(grid: &Arc<Grid>, values: Array1<Complex64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::invalid(format!(
                "complex grid function has {} values, grid has {} nodes",
                values.len(),
                grid.n()
            )));
        }
        Ok(Self {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub fn from_real(f: &GridFunction) -> Self {
        Self {
            grid: Arc::clone(f.grid()),
            values: f.values().mapv(|x| Complex64::new(x, 0.0)),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &Array1<Complex64> {
        &self.values
    }

    pub fn re(&self) -> Array1<f64> {
        self.values.mapv(|c| c.re)
    }

    pub fn im(&self) -> Array1<f64> {
        self.values.mapv(|c| c.im)
    }

    /// `(sum h |f_i|^2)^(1/2)`.
    pub fn norm2(&self) -> f64 {
        (self.grid.h() * self.values.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// `||self - other|| / ||other||` (absolute when `other` is zero).
    pub fn relative_gap(&self, other: &ComplexGridFunction) -> Result<f64> {
        self.grid.ensure_same(&other.grid)?;
        let diff = ComplexGridFunction {
            grid: Arc::clone(&self.grid),
            values: &self.values - &other.values,
        };
        let base = other.norm2();
        Ok(if base > 0.0 { diff.norm2() / base } else { diff.norm2() })
    }
}

fn to_complex(a: &Array2<f64>) -> Array2<Complex64> {
    a.mapv(|x| Complex64::new(x, 0.0))
}

fn one_norm(a: &Array2<Complex64>) -> f64 {
    a.columns()
        .into_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(a)` for lower-triangular `a` by scaling and squaring with the
/// degree-13 Padé approximant.
pub fn expm_lower(a: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::invalid("matrix exponential needs a square matrix"));
    }
    if a.iter().any(|z| !z.is_finite()) {
        return Err(Error::Overflow("non-finite entry in exponential argument".into()));
    }
    let norm = one_norm(a);
    let squarings = if norm > SCALED_NORM {
        (norm / SCALED_NORM).log2().ceil() as i32
    } else {
        0
    };
    let scale = Complex64::new(2f64.powi(-squarings), 0.0);
    let a1 = a.mapv(|z| z * scale);
    let one = Complex64::new(1.0, 0.0);
    let mm = |x: &Array2<Complex64>, y: &Array2<Complex64>| linalg::lower_tri_matmul(one, x.view(), y.view());

    let id: Array2<Complex64> = Array2::eye(n);
    let a2 = mm(&a1, &a1);
    let a4 = mm(&a2, &a2);
    let a6 = mm(&a4, &a2);
    let b = |k: usize| Complex64::new(PADE13[k], 0.0);
    let comb = |c6: usize, c4: usize, c2: usize| a6.mapv(|z| z * b(c6)) + a4.mapv(|z| z * b(c4)) + a2.mapv(|z| z * b(c2));

    let inner_u = mm(&a6, &comb(13, 11, 9)) + comb(7, 5, 3) + id.mapv(|z| z * b(1));
    let u = mm(&a1, &inner_u);
    let v = mm(&a6, &comb(12, 10, 8)) + comb(6, 4, 2) + id.mapv(|z| z * b(0));

    let p = &v + &u;
    let q = &v - &u;
    let mut r = linalg::lower_tri_solve(q.view(), p.view())?;
    for _ in 0..squarings {
        r = mm(&r, &r);
    }
    if r.iter().any(|z| !z.is_finite()) {
        return Err(Error::Overflow("non-finite entry in matrix exponential".into()));
    }
    Ok(r)
}

fn check_time(t: f64, cap: f64) -> Result<()> {
    if !t.is_finite() {
        return Err(Error::invalid(format!("evolution time must be finite, got {t}")));
    }
    if t.abs() > cap {
        return Err(Error::TimeCap { t, cap });
    }
    Ok(())
}

/// `exp(itS) f`, node by node.
pub fn evolve_s(s: &MultiplicationOperator, t: f64, f: &GridFunction) -> Result<ComplexGridFunction> {
    s.grid().ensure_same(f.grid())?;
    let values = s
        .phi()
        .iter()
        .zip(f.values().iter())
        .map(|(&p, &x)| Complex64::from_polar(x, t * p))
        .collect();
    ComplexGridFunction::new(s.grid(), values)
}

/// Matrix of `exp(itT)`, `T = S + V`.
pub fn evolution_matrix(s: &MultiplicationOperator, v: &KernelOperator, t: f64, cap: f64) -> Result<Array2<Complex64>> {
    s.grid().ensure_same(v.grid())?;
    check_time(t, cap)?;
    let mut gen = to_complex(&v.matrix());
    for (i, &p) in s.phi().iter().enumerate() {
        gen[[i, i]] += Complex64::new(p, 0.0);
    }
    let it = Complex64::new(0.0, t);
    expm_lower(&gen.mapv(|z| z * it))
}

/// `exp(itT) f`.
pub fn evolve_t(
    s: &MultiplicationOperator,
    v: &KernelOperator,
    t: f64,
    f: &GridFunction,
    cap: f64,
) -> Result<ComplexGridFunction> {
    s.grid().ensure_same(f.grid())?;
    let e = evolution_matrix(s, v, t, cap)?;
    ComplexGridFunction::new(s.grid(), e.dot(&ComplexGridFunction::from_real(f).values))
}

/// Matrix of `(I + K) exp(itS) (I + M)`.
pub fn conjugated_matrix(s: &MultiplicationOperator, k: &KernelOperator, m: &KernelOperator, t: f64) -> Result<Array2<Complex64>> {
    s.grid().ensure_same(k.grid())?;
    s.grid().ensure_same(m.grid())?;
    let n = s.grid().n();
    let id = linalg::identity(n);
    let ik = to_complex(&(&id + &k.matrix()));
    let mut right = to_complex(&(&id + &m.matrix()));
    for (i, mut row) in right.rows_mut().into_iter().enumerate() {
        let phase = Complex64::from_polar(1.0, t * s.phi()[i]);
        row.mapv_inplace(|z| z * phase);
    }
    Ok(linalg::lower_tri_matmul(Complex64::new(1.0, 0.0), ik.view(), right.view()))
}

/// `(I + K) exp(itS) (I + K)^{-1} f` with a precomputed inverse remainder `M`.
pub fn conjugated_evolution_with(
    k: &KernelOperator,
    m: &KernelOperator,
    s: &MultiplicationOperator,
    t: f64,
    f: &GridFunction,
) -> Result<ComplexGridFunction> {
    let g = m.apply(f)?;
    let pre = GridFunction::new(f.grid(), f.values() + g.values())?;
    let e = evolve_s(s, t, &pre)?;
    let h = k.grid().h();
    let ke = to_complex(k.kernel()).dot(&e.values).mapv(|z| z * h);
    ComplexGridFunction::new(s.grid(), &e.values + &ke)
}

/// `(I + K) exp(itS) (I + K)^{-1} f`; inverts `I + K` first.
pub fn conjugated_evolution(
    k: &KernelOperator,
    s: &MultiplicationOperator,
    t: f64,
    f: &GridFunction,
) -> Result<ComplexGridFunction> {
    let inv = transform::invert_transform(k)?;
    conjugated_evolution_with(k, &inv.m, s, t, f)
}

/// Norms of `exp(itT)` over a time grid.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub t_grid: Vec<f64>,
    pub norms: Vec<f64>,
    pub sup_norm: f64,
    /// `||(I + K) exp(itS) (I + K)^{-1}||` per `t`, when a transform was supplied.
    pub norms_conjugated: Option<Vec<f64>>,
    /// Relative Frobenius gap between the direct and conjugated matrices per `t`.
    pub gaps: Option<Vec<f64>>,
    pub conjugation_gap: Option<f64>,
    /// `||I + K|| ||(I + K)^{-1}||`, the uniform bound implied by similarity.
    pub cond_bound: Option<f64>,
    pub grid_n: usize,
}

impl StabilityReport {
    /// CSV with columns `t,norm_direct,norm_conjugated,gap`; missing values are empty.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "norm_direct", "norm_conjugated", "gap"])?;
        for (idx, (&t, &nd)) in self.t_grid.iter().zip(&self.norms).enumerate() {
            let opt = |v: &Option<Vec<f64>>| v.as_ref().map(|x| x[idx].to_string()).unwrap_or_default();
            w.write_record([
                t.to_string(),
                nd.to_string(),
                opt(&self.norms_conjugated),
                opt(&self.gaps),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Computes `||exp(itT)||` for every `t` in `t_grid`; with `K` (and its
/// inverse remainder) also the conjugated group and its gap to the direct one.
pub fn stability_scan(
    s: &MultiplicationOperator,
    v: &KernelOperator,
    transform: Option<(&KernelOperator, &Inverse)>,
    t_grid: &[f64],
    cap: f64,
) -> Result<StabilityReport> {
    if t_grid.is_empty() {
        return Err(Error::invalid("stability scan needs a nonempty time grid"));
    }
    for &t in t_grid {
        check_time(t, cap)?;
    }
    let opts = PowerOptions::default();
    let mut norms = Vec::with_capacity(t_grid.len());
    let mut conj = Vec::new();
    let mut gaps = Vec::new();
    for &t in t_grid {
        let e = evolution_matrix(s, v, t, cap)?;
        norms.push(spectral_norm_or_bound(&e, opts)?);
        if let Some((k, inv)) = transform {
            let c = conjugated_matrix(s, k, &inv.m, t)?;
            conj.push(spectral_norm_or_bound(&c, opts)?);
            let base = linalg::frobenius_complex(e.view());
            gaps.push(linalg::frobenius_complex((&e - &c).view()) / base);
        }
    }
    let sup_norm = norms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (norms_conjugated, gaps, conjugation_gap, cond_bound) = match transform {
        Some((k, inv)) => {
            let gap = gaps.iter().copied().fold(0.0, f64::max);
            (Some(conj), Some(gaps), Some(gap), Some(transform::condition_number(k, inv)?))
        }
        None => (None, None, None, None),
    };
    Ok(StabilityReport {
        t_grid: t_grid.to_vec(),
        norms,
        sup_norm,
        norms_conjugated,
        gaps,
        conjugation_gap,
        cond_bound,
        grid_n: s.grid().n(),
    })
}

/// Power-iteration norm; falls back to the last (lower) estimate when the
/// top singular values are too clustered for the iteration to settle.
fn spectral_norm_or_bound(a: &Array2<Complex64>, opts: PowerOptions) -> Result<f64> {
    match linalg::spectral_norm_complex(a.view(), opts) {
        Err(Error::NonConvergence { last_estimate, .. }) => Ok(last_estimate),
        other => other,
    }
}
