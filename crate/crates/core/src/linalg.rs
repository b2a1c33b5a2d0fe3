// SPDX-License-Identifier: Apache-2.0

//! Dense helpers: power-iteration norms and lower-triangular products/solves.
//!
//! Every operator in this crate is lower triangular, so products only touch
//! the blocks on or below the diagonal.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView2, LinalgScalar};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Stopping rule for [`spectral_norm`].
#[derive(Debug, Clone, Copy)]
pub struct PowerOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

const BLOCK: usize = 96;

fn seed(n: usize) -> Vec<f64> {
    // all-ones plus a fixed deterministic perturbation
    let v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i + 1) as f64).sin()).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

/// Largest singular value of `a` by power iteration on `a^T a`.
///
/// The returned estimate `|A v|` is non-decreasing over the iterations and
/// stops once its relative change drops below `opts.rel_tol`.
pub fn spectral_norm(a: ArrayView2<'_, f64>, opts: PowerOptions) -> Result<f64> {
    let (m, n) = a.dim();
    if m == 0 || n == 0 {
        return Ok(0.0);
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Overflow("non-finite matrix entry in norm estimate".into()));
    }
    if a.iter().all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    let mut v = Array1::from(seed(n));
    let mut sigma = 0.0_f64;
    for _ in 0..opts.max_iter {
        let w = a.dot(&v);
        let estimate = w.dot(&w).sqrt();
        let z = a.t().dot(&w);
        let zn = z.dot(&z).sqrt();
        if zn == 0.0 {
            // seed lies in the null space; restart on the heaviest column
            let k = (0..n)
                .max_by(|&p, &q| {
                    let cp = a.column(p).dot(&a.column(p));
                    let cq = a.column(q).dot(&a.column(q));
                    cp.total_cmp(&cq)
                })
                .unwrap_or(0);
            v.fill(0.0);
            v[k] = 1.0;
            continue;
        }
        v = z / zn;
        if (estimate - sigma).abs() <= opts.rel_tol * estimate {
            return Ok(estimate.max(sigma));
        }
        sigma = estimate;
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        last_estimate: sigma,
    })
}

/// [`spectral_norm`], but a stalled iteration yields its last estimate.
///
/// Stalling happens when the top singular values are nearly equal; the
/// estimate is then a lower bound that is already close to the norm.
pub fn spectral_norm_settled(a: ArrayView2<'_, f64>, opts: PowerOptions) -> Result<f64> {
    match spectral_norm(a, opts) {
        Err(Error::NonConvergence { last_estimate, .. }) => Ok(last_estimate),
        other => other,
    }
}

/// Complex analogue of [`spectral_norm`], iterating on `a^H a`.
pub fn spectral_norm_complex(a: ArrayView2<'_, Complex64>, opts: PowerOptions) -> Result<f64> {
    let (m, n) = a.dim();
    if m == 0 || n == 0 {
        return Ok(0.0);
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Overflow("non-finite matrix entry in norm estimate".into()));
    }
    if a.iter().all(|x| x.norm_sqr() == 0.0) {
        return Ok(0.0);
    }
    let ah = a.t().mapv(|x| x.conj());
    let mut v: Array1<Complex64> = seed(n).into_iter().map(|x| Complex64::new(x, 0.0)).collect();
    let mut sigma = 0.0_f64;
    for _ in 0..opts.max_iter {
        let w = a.dot(&v);
        let estimate = w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let z = ah.dot(&w);
        let zn = z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if zn == 0.0 {
            v.fill(Complex64::new(0.0, 0.0));
            v[n - 1] = Complex64::new(1.0, 0.0);
            continue;
        }
        v = z.mapv(|c| c / zn);
        if (estimate - sigma).abs() <= opts.rel_tol * estimate {
            return Ok(estimate.max(sigma));
        }
        sigma = estimate;
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        last_estimate: sigma,
    })
}

pub fn frobenius(a: ArrayView2<'_, f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn frobenius_complex(a: ArrayView2<'_, Complex64>) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(a: ArrayView2<'_, f64>) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// `alpha * a * b` for lower-triangular square `a` and `b`.
///
/// Blocks strictly above the block diagonal are skipped; the result is lower
/// triangular, and strictly lower triangular when either factor is.
pub fn lower_tri_matmul<T: LinalgScalar>(alpha: T, a: ArrayView2<'_, T>, b: ArrayView2<'_, T>) -> Array2<T> {
    let n = a.nrows();
    assert!(
        a.ncols() == n && b.dim() == (n, n),
        "lower_tri_matmul needs square operands of equal size"
    );
    let mut c = Array2::<T>::zeros((n, n));
    let nb = n.div_ceil(BLOCK);
    for bi in 0..nb {
        let (r0, r1) = (bi * BLOCK, ((bi + 1) * BLOCK).min(n));
        for bj in 0..=bi {
            let (c0, c1) = (bj * BLOCK, ((bj + 1) * BLOCK).min(n));
            let mut blk = c.slice_mut(s![r0..r1, c0..c1]);
            for bk in bj..=bi {
                let (k0, k1) = (bk * BLOCK, ((bk + 1) * BLOCK).min(n));
                general_mat_mul(
                    alpha,
                    &a.slice(s![r0..r1, k0..k1]),
                    &b.slice(s![k0..k1, c0..c1]),
                    T::one(),
                    &mut blk,
                );
            }
        }
    }
    c
}

/// Solves `l x = rhs` by forward substitution for lower-triangular `l`
/// with nonzero diagonal.
pub fn lower_tri_solve<T>(l: ArrayView2<'_, T>, rhs: ArrayView2<'_, T>) -> Result<Array2<T>>
where
    T: LinalgScalar + PartialEq,
{
    let n = l.nrows();
    if l.ncols() != n || rhs.nrows() != n {
        return Err(Error::invalid("triangular solve dimension mismatch"));
    }
    let mut x = rhs.to_owned();
    for i in 0..n {
        let d = l[[i, i]];
        if d == T::zero() {
            return Err(Error::SingularDivision {
                i,
                j: i,
                denominator: 0.0,
            });
        }
        if i > 0 {
            let (done, mut rest) = x.view_mut().split_at(ndarray::Axis(0), i);
            let correction = l.slice(s![i, ..i]).dot(&done);
            let mut row = rest.row_mut(0);
            row.zip_mut_with(&correction, |xi, &c| *xi = *xi - c);
        }
        x.row_mut(i).mapv_inplace(|v| v / d);
    }
    Ok(x)
}

/// True iff every entry on or above the diagonal is zero.
pub fn is_strictly_lower(a: ArrayView2<'_, f64>) -> bool {
    a.indexed_iter().all(|((i, j), &v)| j < i || v == 0.0)
}

pub fn identity(n: usize) -> Array2<f64> {
    Array2::eye(n)
}
