// SPDX-License-Identifier: Apache-2.0

//! One-dimensional quadrature: adaptive Gauss-Legendre on regular intervals
//! and dyadic refinement for integrals that may be improper at zero.

use std::sync::OnceLock;

use serde::Serialize;

const GL_ORDER: usize = 20;

fn gauss_legendre_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_ORDER;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for k in 0..n.div_ceil(2) {
            // Newton on P_n from the Chebyshev-like initial guess
            let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for m in 2..=n {
                    let p2 = ((2 * m - 1) as f64 * x * p1 - (m - 1) as f64 * p0) / m as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[k] = -x;
            nodes[n - 1 - k] = x;
            weights[k] = w;
            weights[n - 1 - k] = w;
        }
        (nodes, weights)
    })
}

/// Fixed 20-point Gauss-Legendre rule on `[a, b]`.
pub fn gauss_legendre(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (nodes, weights) = gauss_legendre_rule();
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    half * nodes
        .iter()
        .zip(weights)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
}

/// Adaptive bisection with the 20-point rule until halves agree to `tol`
/// (relative, with an absolute floor of `tol * 1e-3`).
pub fn adaptive_gauss(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let left = gauss_legendre(f, a, m);
        let right = gauss_legendre(f, m, b);
        let split = left + right;
        if depth >= 48 || (split - whole).abs() <= tol * split.abs().max(1e-3) {
            return split;
        }
        recurse(f, a, m, left, tol, depth + 1) + recurse(f, m, b, right, tol, depth + 1)
    }
    if a == b {
        return 0.0;
    }
    recurse(f, a, b, gauss_legendre(f, a, b), tol, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convergence {
    Finite,
    Divergent,
}

/// Result of [`improper_at_zero`].
#[derive(Debug, Clone, Serialize)]
pub struct ImproperIntegral {
    pub verdict: Convergence,
    /// Integral value; `+inf` when divergent.
    pub value: f64,
    /// Partial sums after each dyadic level.
    pub partial_sums: Vec<f64>,
}

impl ImproperIntegral {
    pub fn is_finite(&self) -> bool {
        self.verdict == Convergence::Finite
    }

    pub fn finite_value(&self) -> Option<f64> {
        self.is_finite().then_some(self.value)
    }
}

/// Refinement controls for [`improper_at_zero`].
#[derive(Debug, Clone, Copy)]
pub struct DyadicOptions {
    pub rel_tol: f64,
    pub max_levels: usize,
}

impl Default for DyadicOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            max_levels: 40,
        }
    }
}

/// `int_0^upper f` for `f` possibly singular at zero.
///
/// The interval is split into dyadic pieces `[u 2^-(k+1), u 2^-k]`; each
/// piece is integrated adaptively and the partial sums are accumulated until
/// a piece changes the sum by less than `rel_tol` (relative). No finite
/// computation can prove divergence, so if the level cap is reached the
/// increments are classified instead:
///
/// * the last five increments each grow the sum by more than 1%, or the
///   increments do not decay at all: divergent;
/// * increments decaying geometrically: finite, geometric tail added;
/// * increments decaying like `k^-p`: finite with a power-law tail when
///   `p > 1.1`, divergent otherwise (this separates `1/tau` and
///   `1/(tau |ln tau|)` from integrable singularities).
pub fn improper_at_zero(f: &dyn Fn(f64) -> f64, upper: f64, opts: DyadicOptions) -> ImproperIntegral {
    let mut partial_sums = Vec::with_capacity(opts.max_levels);
    let mut increments = Vec::with_capacity(opts.max_levels);
    let mut sum = 0.0;
    let mut hi = upper;
    for level in 0..opts.max_levels {
        let lo = 0.5 * hi;
        let d = adaptive_gauss(f, lo, hi, 1e-12);
        if !d.is_finite() {
            return divergent(partial_sums);
        }
        sum += d;
        partial_sums.push(sum);
        increments.push(d);
        hi = lo;
        if level >= 2 && d.abs() <= opts.rel_tol * sum.abs() {
            return ImproperIntegral {
                verdict: Convergence::Finite,
                value: sum + geometric_tail(&increments).unwrap_or(0.0),
                partial_sums,
            };
        }
    }
    classify_at_cap(increments, partial_sums)
}

fn divergent(partial_sums: Vec<f64>) -> ImproperIntegral {
    ImproperIntegral {
        verdict: Convergence::Divergent,
        value: f64::INFINITY,
        partial_sums,
    }
}

fn geometric_tail(increments: &[f64]) -> Option<f64> {
    let n = increments.len();
    if n < 2 || increments[n - 2] == 0.0 {
        return None;
    }
    let rho = increments[n - 1] / increments[n - 2];
    (rho > 0.0 && rho < 1.0).then(|| increments[n - 1] * rho / (1.0 - rho))
}

/// Least-squares slope and residual sum of squares of `y` against `x`.
fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    (slope, intercept, sse)
}

fn classify_at_cap(increments: Vec<f64>, partial_sums: Vec<f64>) -> ImproperIntegral {
    let n = increments.len();
    let sum = *partial_sums.last().unwrap_or(&0.0);
    let window = 10.min(n);
    if n < 5 {
        return divergent(partial_sums);
    }
    let growing = (n - 5..n).all(|k| k > 0 && increments[k] > 0.01 * partial_sums[k - 1].abs());
    let tail: Vec<f64> = increments[n - window..].iter().map(|d| d.abs()).collect();
    if growing {
        return divergent(partial_sums);
    }
    if tail.contains(&0.0) {
        // integrand vanishes near zero
        return ImproperIntegral {
            verdict: Convergence::Finite,
            value: sum,
            partial_sums,
        };
    }
    let levels: Vec<f64> = (n - window..n).map(|k| (k + 1) as f64).collect();
    let logs: Vec<f64> = tail.iter().map(|d| d.ln()).collect();
    let (geo_slope, _, geo_sse) = fit_line(&levels, &logs);
    if geo_slope >= 0.0 {
        return divergent(partial_sums);
    }
    let log_levels: Vec<f64> = levels.iter().map(|k| k.ln()).collect();
    let (pow_slope, pow_icept, pow_sse) = fit_line(&log_levels, &logs);
    if geo_sse <= pow_sse {
        let rho = geo_slope.exp();
        let last = tail[window - 1];
        return ImproperIntegral {
            verdict: Convergence::Finite,
            value: sum + last * rho / (1.0 - rho),
            partial_sums,
        };
    }
    let p = -pow_slope;
    if p <= 1.1 {
        return divergent(partial_sums);
    }
    // sum_{k > n} C k^-p ~ C n^(1-p) / (p - 1)
    let c = pow_icept.exp();
    let tail_sum = c * (n as f64 + 0.5).powf(1.0 - p) / (p - 1.0);
    ImproperIntegral {
        verdict: Convergence::Finite,
        value: sum + tail_sum,
        partial_sums,
    }
}

/// `int over {tau in (0, span) : q(tau) > level} of q`.
///
/// The superlevel set is located by sampling (dyadically near zero and
/// uniformly elsewhere) and refining every crossing by bisection. A
/// component touching zero is integrated with [`improper_at_zero`].
pub fn superlevel_integral(q: &dyn Fn(f64) -> f64, span: f64, level: f64) -> ImproperIntegral {
    let mut pts: Vec<f64> = (0..=52).map(|k| span * 0.5f64.powi(k)).collect();
    pts.extend((1..2048).map(|i| span * i as f64 / 2048.0));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let above = |t: f64| q(t) > level;
    let crossing = |mut lo: f64, mut hi: f64| {
        let lo_above = above(lo);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if above(mid) == lo_above {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };

    let mut intervals = Vec::new();
    let mut start = if above(pts[0]) { Some(0.0) } else { None };
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        match (above(a), above(b)) {
            (false, true) => start = Some(crossing(a, b)),
            (true, false) => {
                intervals.push((start.take().unwrap_or(a), crossing(a, b)));
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        intervals.push((s, span));
    }

    let mut total = 0.0;
    let mut partial_sums = Vec::new();
    for (lo, hi) in intervals {
        if lo == 0.0 {
            let inner = improper_at_zero(q, hi, DyadicOptions::default());
            if !inner.is_finite() {
                return divergent(inner.partial_sums);
            }
            total += inner.value;
        } else {
            total += adaptive_gauss(q, lo, hi, 1e-12);
        }
        partial_sums.push(total);
    }
    ImproperIntegral {
        verdict: Convergence::Finite,
        value: total,
        partial_sums,
    }
}
