// SPDX-License-Identifier: Apache-2.0

//! Successive approximations for the intertwining equation
//! `[S, K] + V K + V = 0`, and what can be said about their sum.
//!
//! `K_1 = [S, .]^{-1}(-V)` and `K_n = [S, .]^{-1}(-V K_{n-1})`; with the
//! majorant `W` one has `|K_n| <= W |K_{n-1}| <= W^n`, so `K = sum K_n`
//! exists when `spr(W) < 1` and `I + K` is invertible when `spr(W) < 1/2`.

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, PowerOptions};
use crate::majorants::{convolution_majorant_check, ConvolutionMajorant, MajorantCheck};
use crate::operator::{GelfandEstimate, KernelOperator, Majorization, MultiplicationOperator};

/// Default gate on the Gelfand estimate for the spectral-radius verdict.
pub const DEFAULT_SPR_MARGIN: f64 = 0.45;
/// Iterates used by [`spr_certificate`].
pub const CERTIFICATE_GELFAND_ITERATES: usize = 30;
/// Iterates used for `spr(K)`.
pub const TRANSFORM_GELFAND_ITERATES: usize = 12;
/// Number of leading terms kept for the chain certificate.
pub const CHAIN_DEPTH: usize = 6;
/// Consecutive non-contracting ratios that count as divergence.
pub const DIVERGENCE_RUN: usize = 5;

const CHAIN_SLACK: f64 = 1e-12;
const NEUMANN_TOL: f64 = 1e-12;
const INVERSE_AGREEMENT: f64 = 1e-9;
const INVERSE_INSTABILITY: f64 = 1e-6;

/// Operator norm with a Frobenius fallback when power iteration stalls.
/// The fallback is an upper bound, which keeps stopping rules conservative.
pub(crate) fn robust_norm(a: &KernelOperator) -> Result<f64> {
    match a.op_norm() {
        Ok(v) => Ok(v),
        Err(Error::NonConvergence { .. }) => Ok(a.grid().h() * linalg::frobenius(a.kernel().view())),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "similar-by-thm1")]
    SimilarByThm1,
    #[serde(rename = "similar-by-cor1")]
    SimilarByCor1,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::SimilarByThm1 => "similar-by-thm1",
            Verdict::SimilarByCor1 => "similar-by-cor1",
            Verdict::Inconclusive => "inconclusive",
        }
    }

    pub fn is_similar(self) -> bool {
        self != Verdict::Inconclusive
    }
}

/// Applicability certificate for the majorant `W`.
#[derive(Debug, Clone)]
pub struct Certificate {
    /// `||q||_1`: `None` without a convolution majorant, `+inf` when divergent.
    pub schur_value: Option<f64>,
    pub majorant_check: Option<MajorantCheck>,
    pub gelfand: GelfandEstimate,
    /// `q` given, `w <= q(x - t)` on the grid and `q` integrable: `W` is Volterra.
    pub volterra_flag: bool,
    pub spr_margin: f64,
    pub verdict: Verdict,
    pub diagnostics: Vec<String>,
}

impl Certificate {
    pub fn gelfand_estimate(&self) -> f64 {
        self.gelfand.estimate
    }
}

/// Decides which similarity criterion applies to `W`.
///
/// With a convolution majorant that dominates `W` and is integrable the
/// verdict is `similar-by-cor1`; otherwise the Gelfand estimate over 30
/// iterates is compared with `spr_margin`.
pub fn spr_certificate(w: &KernelOperator, q: Option<&ConvolutionMajorant>, spr_margin: f64) -> Result<Certificate> {
    if !w.is_nonnegative() {
        return Err(Error::Precondition("majorant W must be entrywise nonnegative".into()));
    }
    if !(spr_margin > 0.0 && spr_margin <= 0.5) {
        return Err(Error::invalid(format!("spr margin must lie in (0, 1/2], got {spr_margin}")));
    }
    let mut diagnostics = Vec::new();
    let (schur_value, majorant_check) = match q {
        Some(q) => {
            let check = convolution_majorant_check(w, q)?;
            if !check.holds {
                diagnostics.push(format!(
                    "w exceeds q(x - t) on the grid by up to {:e}",
                    check.worst_margin
                ));
            }
            if !q.integrable() {
                diagnostics.push("q is not integrable on (0, b - a)".into());
            }
            (Some(q.l1_norm()), Some(check))
        }
        None => (None, None),
    };
    let volterra_flag = matches!((schur_value, majorant_check), (Some(s), Some(c)) if c.holds && s.is_finite());
    let gelfand = w.gelfand_spr(CERTIFICATE_GELFAND_ITERATES)?;
    let verdict = if volterra_flag {
        Verdict::SimilarByCor1
    } else if gelfand.estimate < spr_margin {
        Verdict::SimilarByThm1
    } else {
        diagnostics.push(format!(
            "Gelfand estimate {:.6} at n = {} is not below {spr_margin}",
            gelfand.estimate, gelfand.grid_n
        ));
        Verdict::Inconclusive
    };
    Ok(Certificate {
        schur_value,
        majorant_check,
        gelfand,
        volterra_flag,
        spr_margin,
        verdict,
        diagnostics,
    })
}

/// Result of [`check_chain`]; indices are 1-based term numbers.
#[derive(Debug, Clone, Serialize)]
pub struct ChainCheck {
    pub holds: bool,
    pub first_failure: Option<usize>,
    /// `|K_n| <= W |K_{n-1}|` for every `n >= 2`.
    pub sharp_holds: bool,
    pub sharp_first_failure: Option<usize>,
    pub checked: usize,
}

fn dominated(b: &Array2<f64>, a: &Array2<f64>) -> bool {
    a.iter().zip(b.iter()).all(|(&x, &y)| x.abs() <= y + CHAIN_SLACK * y.abs())
}

/// Verifies `|K_n| <= W^n` and `|K_n| <= W |K_{n-1}|` entrywise.
pub fn check_chain(terms: &[KernelOperator], w: &KernelOperator) -> Result<ChainCheck> {
    let mut out = ChainCheck {
        holds: true,
        first_failure: None,
        sharp_holds: true,
        sharp_first_failure: None,
        checked: terms.len(),
    };
    let mut w_pow: Option<KernelOperator> = None;
    for (idx, k) in terms.iter().enumerate() {
        w.grid().ensure_same(k.grid())?;
        let p = match w_pow {
            None => w.clone(),
            Some(ref p) => p.compose(w)?,
        };
        if out.holds && !dominated(p.kernel(), k.kernel()) {
            out.holds = false;
            out.first_failure = Some(idx + 1);
        }
        if idx > 0 && out.sharp_holds {
            let bound = w.compose(&terms[idx - 1].abs())?;
            if !dominated(bound.kernel(), k.kernel()) {
                out.sharp_holds = false;
                out.sharp_first_failure = Some(idx + 1);
            }
        }
        w_pow = Some(p);
    }
    Ok(out)
}

/// Entrywise test of `|K| <= W (I - W)^{-1}`, the kernel of `sum_{n>=1} W^n`.
pub fn aggregate_bound(k: &KernelOperator, w: &KernelOperator) -> Result<Majorization> {
    w.grid().ensure_same(k.grid())?;
    let h = w.grid().h();
    let wm = w.matrix();
    let lhs = linalg::identity(w.n()) - &wm;
    let mut bound = linalg::lower_tri_solve(lhs.view(), wm.view())?;
    bound.mapv_inplace(|v| v / h);
    if bound.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow("W (I - W)^{-1} is not finite".into()));
    }
    let mut worst = f64::NEG_INFINITY;
    let mut holds = true;
    for ((i, j), &b) in bound.indexed_iter() {
        if j < i {
            let a = k.kernel()[[i, j]].abs();
            worst = worst.max(a - b);
            if a > b + CHAIN_SLACK * b.abs() {
                holds = false;
            }
        }
    }
    Ok(Majorization {
        holds,
        worst_violation: if worst.is_finite() { worst } else { 0.0 },
    })
}

/// `||(S + V)(I + K) - (I + K) S|| / max(||V||, 1e-300)`.
pub fn intertwining_residual(s: &MultiplicationOperator, v: &KernelOperator, k: &KernelOperator) -> Result<f64> {
    let r = residual_operator(s, v, k)?;
    Ok(robust_norm(&r)? / robust_norm(v)?.max(1e-300))
}

/// `[S, K] + V K + V`.
pub fn residual_operator(s: &MultiplicationOperator, v: &KernelOperator, k: &KernelOperator) -> Result<KernelOperator> {
    s.commutator(k)?.add(&v.compose(k)?)?.add(v)
}

/// Successive-approximation controls.
#[derive(Debug, Clone, Copy)]
pub struct IterateOptions {
    pub tol: f64,
    pub n_cap: usize,
}

impl Default for IterateOptions {
    fn default() -> Self {
        Self { tol: 1e-10, n_cap: 200 }
    }
}

/// Summed series `K` and its diagnostics.
#[derive(Debug, Clone)]
pub struct SimilarityTransform {
    pub k: KernelOperator,
    pub terms_used: usize,
    pub term_norms: Vec<f64>,
    /// `||K_n|| / ||K_{n-1}||` for `n >= 2`.
    pub ratios: Vec<f64>,
    /// Whether the stopping rule fired before the cap.
    pub converged: bool,
    pub residual: f64,
    pub chain: ChainCheck,
    pub spr_k: GelfandEstimate,
    /// The first `min(N, 6)` terms.
    pub leading_terms: Vec<KernelOperator>,
    pub tol: f64,
}

impl SimilarityTransform {
    pub fn chain_ok(&self) -> bool {
        self.chain.holds
    }

    pub fn spr_k_estimate(&self) -> f64 {
        self.spr_k.estimate
    }
}

/// Runs the successive approximations until `||K_N|| <= tol (1 - rho)`,
/// `rho` the latest term ratio, or until `n_cap` terms.
///
/// Five consecutive ratios `>= 1` abort with [`Error::Divergence`], which
/// carries the partial sum and the ratio history.
pub fn friedrichs_iterate(
    s: &MultiplicationOperator,
    v: &KernelOperator,
    w: &KernelOperator,
    opts: IterateOptions,
) -> Result<SimilarityTransform> {
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(Error::invalid(format!("term tolerance must be positive, got {}", opts.tol)));
    }
    if opts.n_cap == 0 {
        return Err(Error::invalid("terms cap must be at least 1"));
    }
    s.grid().ensure_same(v.grid())?;
    s.grid().ensure_same(w.grid())?;
    if !linalg::is_strictly_lower(v.kernel().view()) || !linalg::is_strictly_lower(w.kernel().view()) {
        return Err(Error::Precondition("V and W must be strictly lower triangular".into()));
    }

    let n = v.n();
    let mut sum = KernelOperator::from_parts(v.grid(), Array2::zeros((n, n)), v.mode());
    let mut term = s.solve_commutator(&v.scaled(-1.0))?;
    let mut term_norms = Vec::new();
    let mut ratios = Vec::new();
    let mut leading = Vec::new();
    let mut run = 0;
    let mut converged = false;
    for n in 1..=opts.n_cap {
        if term.kernel().iter().any(|x| !x.is_finite()) {
            return Err(divergence(n, term_norms, ratios, sum));
        }
        let norm = robust_norm(&term)?;
        sum = sum.add(&term)?;
        if leading.len() < CHAIN_DEPTH {
            leading.push(term.clone());
        }
        term_norms.push(norm);
        let rho = match term_norms.len() {
            1 => 0.0,
            m => {
                let prev = term_norms[m - 2];
                let r = if prev > 0.0 { norm / prev } else { 0.0 };
                ratios.push(r);
                r
            }
        };
        if norm == 0.0 || (rho < 1.0 && norm <= opts.tol * (1.0 - rho)) {
            converged = true;
            break;
        }
        run = if rho >= 1.0 { run + 1 } else { 0 };
        if run >= DIVERGENCE_RUN {
            return Err(divergence(n, term_norms, ratios, sum));
        }
        if n < opts.n_cap {
            term = s.solve_commutator(&v.compose(&term)?.scaled(-1.0))?;
        }
    }
    let residual = intertwining_residual(s, v, &sum)?;
    let chain = check_chain(&leading, w)?;
    let spr_k = sum.gelfand_spr(TRANSFORM_GELFAND_ITERATES)?;
    Ok(SimilarityTransform {
        terms_used: term_norms.len(),
        k: sum,
        term_norms,
        ratios,
        converged,
        residual,
        chain,
        spr_k,
        leading_terms: leading,
        tol: opts.tol,
    })
}

fn divergence(terms: usize, term_norms: Vec<f64>, ratios: Vec<f64>, sum: KernelOperator) -> Error {
    Error::Divergence {
        terms,
        term_norms,
        ratios,
        partial_sum: Box::new(sum),
    }
}

/// `M = (I + K)^{-1} - I` with its cross-check diagnostics.
#[derive(Debug, Clone)]
pub struct Inverse {
    /// Direct-solve result.
    pub m: KernelOperator,
    pub neumann: KernelOperator,
    pub neumann_terms: usize,
    /// `h ||m_neumann - m_direct||_F`, an upper bound on the operator-norm gap.
    pub disagreement: f64,
    /// `||(I + K)(I + M) - I||`.
    pub identity_residual: f64,
    pub spr_estimate: f64,
}

impl Inverse {
    pub fn agrees(&self) -> bool {
        self.disagreement <= INVERSE_AGREEMENT
    }

    /// `||I + M||`.
    pub fn norm_inverse(&self) -> Result<f64> {
        identity_plus_norm(&self.m)
    }
}

/// `||I + A||` for a kernel operator `A`.
pub fn identity_plus_norm(a: &KernelOperator) -> Result<f64> {
    let m = linalg::identity(a.n()) + a.matrix();
    linalg::spectral_norm_settled(m.view(), PowerOptions::default())
}

/// Inverts `I + K` by Neumann series and by forward substitution and
/// cross-checks the two; returns the direct solution.
pub fn invert_transform(k: &KernelOperator) -> Result<Inverse> {
    let spr_estimate = k.gelfand_spr(TRANSFORM_GELFAND_ITERATES)?.estimate;
    if spr_estimate >= 1.0 {
        return Err(Error::Precondition(format!(
            "Neumann series for (I + K)^-1 needs spr(K) < 1, estimate is {spr_estimate}"
        )));
    }
    let h = k.grid().h();
    let frob = |a: &KernelOperator| h * linalg::frobenius(a.kernel().view());

    let minus_k = k.scaled(-1.0);
    let mut neumann = minus_k.clone();
    let mut term = minus_k.clone();
    let mut neumann_terms = 1;
    // strictly lower triangular: (-K)^n = 0 for n >= grid size
    while frob(&term) >= NEUMANN_TOL && neumann_terms < k.n() {
        term = term.compose(&minus_k)?;
        if term.kernel().iter().any(|x| !x.is_finite()) || frob(&term) > 1e12 {
            return Err(Error::Precondition("Neumann series for (I + K)^-1 diverges".into()));
        }
        neumann = neumann.add(&term)?;
        neumann_terms += 1;
    }

    let km = k.matrix();
    let lhs = linalg::identity(k.n()) + &km;
    let mut x = linalg::lower_tri_solve(lhs.view(), (-&km).view())?;
    x.mapv_inplace(|v| v / h);
    let m = KernelOperator::from_matrix(k.grid(), x, k.mode())?;

    let disagreement = frob(&m.sub(&neumann)?);
    if disagreement > INVERSE_INSTABILITY {
        return Err(Error::InversionInstability { disagreement });
    }
    // (I + K)(I + M) - I = K + M + K M
    let identity_residual = robust_norm(&k.add(&m)?.add(&k.compose(&m)?)?)?;
    Ok(Inverse {
        m,
        neumann,
        neumann_terms,
        disagreement,
        identity_residual,
        spr_estimate,
    })
}

/// `cond(I + K) = ||I + K|| ||(I + K)^{-1}||`.
pub fn condition_number(k: &KernelOperator, inv: &Inverse) -> Result<f64> {
    Ok(identity_plus_norm(k)? * inv.norm_inverse()?)
}

/// Band label for the convergence/invertibility picture.
pub fn band(verdict: Verdict, converged: bool) -> &'static str {
    match (verdict.is_similar(), converged) {
        (true, true) => "certified",
        (true, false) => "certified, series truncated at cap",
        (false, true) => "series-converged, invertibility uncertified",
        (false, false) => "series not converged, inconclusive",
    }
}
