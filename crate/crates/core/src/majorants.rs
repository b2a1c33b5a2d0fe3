// SPDX-License-Identifier: Apache-2.0

//! Majorant operators and the bounds that control them.
//!
//! For a perturbation kernel `v` and an increasing `phi`, the majorant
//! `W` has kernel `w(x, t) = |v(x, t)| / (phi(x) - phi(t))`. If `w` is
//! dominated by a convolution kernel `q(x - t)` with `q` integrable, the
//! Schur test gives `||W|| <= ||q||_1`, and cutting `W` where `q > m` costs
//! at most `int_{q > m} q` in norm.

use std::cell::Cell;
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::func::{KernelFn, ScalarFn};
use crate::grid::Grid;
use crate::integrate::{self, DyadicOptions, ImproperIntegral};
use crate::operator::{self, entry_value, EntryMode, KernelOperator, MultiplicationOperator};
use crate::special::gamma;

/// Relative slack when comparing `w` against `q(x - t)`; absorbs the
/// rounding of `|v| / (x - t)` versus a closed-form `q`.
const MAJORANT_SLACK: f64 = 1e-12;

/// A convolution majorant `q` on `(0, span)` together with its `L1` norm.
#[derive(Debug, Clone)]
pub struct ConvolutionMajorant {
    q: ScalarFn,
    span: f64,
    integral: ImproperIntegral,
}

impl ConvolutionMajorant {
    /// Integrates `q` over `(0, span)` with [`schur_bound`].
    pub fn new(q: ScalarFn, span: f64) -> Self {
        let integral = schur_bound(&q, span);
        Self { q, span, integral }
    }

    pub fn q(&self) -> &ScalarFn {
        &self.q
    }

    pub fn eval(&self, tau: f64) -> f64 {
        self.q.eval(tau)
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    /// `||q||_1`, or `+inf` when the integral was judged divergent.
    pub fn l1_norm(&self) -> f64 {
        self.integral.value
    }

    pub fn integrable(&self) -> bool {
        self.integral.is_finite()
    }

    pub fn integral(&self) -> &ImproperIntegral {
        &self.integral
    }
}

/// `||q||_1 = int_0^span q` by dyadic refinement toward zero.
pub fn schur_bound(q: &ScalarFn, span: f64) -> ImproperIntegral {
    integrate::improper_at_zero(&|t| q.eval(t), span, DyadicOptions::default())
}

/// Majorant `w = |v| / (phi(x) - phi(t))` sampled (or cell-averaged) on the grid.
pub fn derive_w(v: &KernelFn, phi: &ScalarFn, grid: &Arc<Grid>, mode: EntryMode) -> Result<KernelOperator> {
    // validates strict monotonicity of phi at the nodes
    let s = MultiplicationOperator::from_fn(phi, grid)?;
    let floor = 1e-14 * s.range();
    let n = grid.n();
    let mut kernel = Array2::zeros((n, n));
    for i in 1..n {
        for j in 0..i {
            let bad = Cell::new(None);
            let value = entry_value(
                |x, t| {
                    let d = phi.eval(x) - phi.eval(t);
                    if d <= 0.0 || d < floor {
                        bad.set(bad.get().or(Some(d)));
                    }
                    v.eval(x, t).abs() / d
                },
                grid,
                i,
                j,
                mode,
            );
            if let Some(d) = bad.get() {
                return Err(Error::SingularDivision { i, j, denominator: d });
            }
            if !value.is_finite() {
                return Err(Error::KernelConstruction { i, j, value });
            }
            kernel[[i, j]] = value;
        }
    }
    KernelOperator::from_matrix(grid, kernel, mode)
}

/// Majorant of an already discretized `V`: `|[S, .]^{-1} V|`.
///
/// This is the exact discrete counterpart of [`derive_w`] for the kernel
/// matrix of `V`; the successive approximations are dominated by its
/// powers entry by entry.
pub fn discrete_majorant(s: &MultiplicationOperator, v: &KernelOperator) -> Result<KernelOperator> {
    Ok(s.solve_commutator(v)?.abs())
}

/// Result of [`convolution_majorant_check`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MajorantCheck {
    pub holds: bool,
    /// `max_{i>j} (w[i][j] - q(x_i - t_j))`.
    pub worst_margin: f64,
}

/// Tests `w[i][j] <= q(x_i - t_j)` on the strict triangle. For
/// cell-averaged `W` the comparison is against the same cell average of
/// `q(x - t)`.
pub fn convolution_majorant_check(w: &KernelOperator, q: &ConvolutionMajorant) -> Result<MajorantCheck> {
    let grid = w.grid();
    if (grid.span() - q.span()).abs() > 1e-12 * grid.span().max(q.span()) {
        return Err(Error::invalid(format!(
            "majorant lives on (0, {}), operator interval has length {}",
            q.span(),
            grid.span()
        )));
    }
    let n = grid.n();
    let mut worst = f64::NEG_INFINITY;
    let mut holds = true;
    for i in 1..n {
        for j in 0..i {
            let qv = entry_value(|x, t| q.eval(x - t), grid, i, j, w.mode());
            if qv.is_nan() || qv == f64::NEG_INFINITY {
                return Err(Error::invalid(format!(
                    "q evaluates to {qv} at lag {}",
                    grid.node(i) - grid.node(j)
                )));
            }
            let wv = w.kernel()[[i, j]];
            worst = worst.max(wv - qv);
            if wv > qv + MAJORANT_SLACK * qv.abs() {
                holds = false;
            }
        }
    }
    Ok(MajorantCheck {
        holds,
        worst_margin: worst,
    })
}

/// `W^(m)` and the bound `||W - W^(m)|| <= int_{q > m} q`.
#[derive(Debug, Clone)]
pub struct Truncation {
    pub kernel: KernelOperator,
    pub tail_bound: f64,
}

/// Zeroes the entries of `W` where `q(x_i - t_j) > m`.
pub fn truncate_kernel(w: &KernelOperator, q: &ConvolutionMajorant, m: f64) -> Result<Truncation> {
    if m.is_nan() || m <= 0.0 {
        return Err(Error::invalid(format!("truncation level must be positive, got {m}")));
    }
    let grid = w.grid();
    let mut kernel = w.kernel().clone();
    for ((i, j), v) in kernel.indexed_iter_mut() {
        if j < i && q.eval(grid.node(i) - grid.node(j)) > m {
            *v = 0.0;
        }
    }
    let tail = integrate::superlevel_integral(&|t| q.eval(t), q.span(), m);
    Ok(Truncation {
        kernel: KernelOperator::from_matrix(grid, kernel, w.mode())?,
        tail_bound: tail.value,
    })
}

/// `int_0^upper omega1(tau) omega2(tau) / tau` with a finite/divergent verdict.
pub fn modulus_condition(om1: &ScalarFn, om2: &ScalarFn, upper: f64) -> ImproperIntegral {
    integrate::improper_at_zero(&|t| om1.eval(t) * om2.eval(t) / t, upper, DyadicOptions::default())
}

/// `ess sup_{t < x} (x - t)^(1 - alpha) |v(x, t)|` over the grid triangle.
pub fn holder_norm(v: &KernelFn, alpha: f64, grid: &Grid) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!("Hölder exponent must lie in (0, 1], got {alpha}")));
    }
    let mut sup = 0.0_f64;
    for i in 1..grid.n() {
        for j in 0..i {
            let (x, t) = (grid.node(i), grid.node(j));
            sup = sup.max((x - t).powf(1.0 - alpha) * v.eval(x, t).abs());
        }
    }
    Ok(sup)
}

/// Where the perturbation kernel comes from.
#[derive(Debug, Clone)]
pub enum KernelSource {
    Function(KernelFn),
    /// Dense kernel matrix loaded from CSV; tied to a grid of matching size.
    Matrix(Array2<f64>),
}

/// A documented perturbation kernel `v` with its known majorant data.
#[derive(Debug, Clone)]
pub struct KernelPreset {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub source: KernelSource,
    /// Convolution majorant `q` of `w` when `phi` is the identity.
    pub majorant: Option<ScalarFn>,
    /// Moduli of continuity for rank-one and log-moduli kernels.
    pub moduli: Option<(ScalarFn, ScalarFn)>,
    /// Whether the sampled product `phi * psi` vanishes identically (rank-one only).
    pub product_vanishes: Option<bool>,
    /// Set for kernels that are only usable with cell-averaged entries.
    pub requires_cell_average: bool,
    pub doc: String,
}

impl KernelPreset {
    /// Discretized perturbation `V`.
    pub fn perturbation(&self, grid: &Arc<Grid>, mode: EntryMode) -> Result<KernelOperator> {
        match &self.source {
            KernelSource::Function(v) => KernelOperator::from_kernel_fn(v, grid, mode),
            KernelSource::Matrix(m) => KernelOperator::from_matrix(grid, m.clone(), mode),
        }
    }

    /// Majorant `W`, from the kernel function when there is one.
    pub fn majorant_operator(&self, phi: &ScalarFn, grid: &Arc<Grid>, mode: EntryMode) -> Result<KernelOperator> {
        match &self.source {
            KernelSource::Function(v) => derive_w(v, phi, grid, mode),
            KernelSource::Matrix(_) => {
                let s = MultiplicationOperator::from_fn(phi, grid)?;
                discrete_majorant(&s, &self.perturbation(grid, mode)?)
            }
        }
    }

    pub fn convolution_majorant(&self, span: f64) -> Option<ConvolutionMajorant> {
        self.majorant.clone().map(|q| ConvolutionMajorant::new(q, span))
    }

    pub fn kernel_fn(&self) -> Option<&KernelFn> {
        match &self.source {
            KernelSource::Function(v) => Some(v),
            KernelSource::Matrix(_) => None,
        }
    }
}

/// Rank-one kernel `v(x, t) = phi(x) psi(t)` on `t <= x`.
///
/// `product_vanishes` records whether `phi * psi` is identically zero on
/// 4097 equispaced samples of `interval`.
pub fn rank_one_kernel(phi: &ScalarFn, psi: &ScalarFn, interval: (f64, f64)) -> KernelPreset {
    let (a, b) = interval;
    let samples = 4096;
    let vanishes = (0..=samples).all(|k| {
        let x = a + (b - a) * k as f64 / samples as f64;
        phi.eval(x) * psi.eval(x) == 0.0
    });
    let (p, s) = (phi.clone(), psi.clone());
    let v = KernelFn::new(format!("({})({})", phi.label(), psi.label()), move |x, t| p.eval(x) * s.eval(t));
    KernelPreset {
        name: "rank-one".into(),
        params: BTreeMap::new(),
        source: KernelSource::Function(v),
        majorant: None,
        moduli: None,
        product_vanishes: Some(vanishes),
        requires_cell_average: false,
        doc: "v(x,t) = phi(x) psi(t) on t <= x".into(),
    }
}

/// Smooth bump on `(l, r)` with peak value 1 at the midpoint.
pub fn bump_on(l: f64, r: f64) -> ScalarFn {
    let w2 = (r - l) * (r - l);
    ScalarFn::new(format!("bump({l},{r})"), move |x| {
        if x <= l || x >= r {
            0.0
        } else {
            (4.0 / w2 - 1.0 / ((x - l) * (r - x))).exp()
        }
    })
}

/// Lipschitz constant of [`bump_on`], from its exact derivative sampled
/// densely and padded by 1e-6 relative.
pub fn bump_lipschitz(l: f64, r: f64) -> f64 {
    let b = bump_on(l, r);
    let samples = 200_000;
    let mut best = 0.0_f64;
    for k in 1..samples {
        let x = l + (r - l) * k as f64 / samples as f64;
        let g = (x - l) * (r - x);
        let dg = r + l - 2.0 * x;
        best = best.max((b.eval(x) * dg / (g * g)).abs());
    }
    best * (1.0 + 1e-6)
}

/// `omega(tau) = (1 + max(0, -ln tau))^(-delta)`: behaves like
/// `|ln tau|^(-delta)` at zero and is capped at 1 for `tau >= 1`.
pub fn log_modulus(delta: f64) -> ScalarFn {
    ScalarFn::new(format!("|ln t|^-{delta}"), move |t: f64| {
        if t <= 0.0 {
            0.0
        } else {
            (1.0 + (-t.ln()).max(0.0)).powf(-delta)
        }
    })
}

/// Catalog entry, for listing.
#[derive(Debug, Clone, Serialize)]
pub struct PresetInfo {
    pub name: &'static str,
    pub params: BTreeMap<&'static str, f64>,
    pub doc: &'static str,
}

pub const PRESET_NAMES: [&str; 6] = [
    "constant-times-lag",
    "fractional",
    "cesaro",
    "rank-one-bumps",
    "log-moduli",
    "custom-csv",
];

pub fn catalog() -> Vec<PresetInfo> {
    let p = |kv: &[(&'static str, f64)]| kv.iter().copied().collect::<BTreeMap<_, _>>();
    vec![
        PresetInfo {
            name: "constant-times-lag",
            params: p(&[("c", 1.0)]),
            doc: "v = c (x - t); w = |c|, q = |c|, ||q||_1 = |c| (b - a).",
        },
        PresetInfo {
            name: "fractional",
            params: p(&[("alpha", 2.0)]),
            doc: "v = (x - t)^(alpha - 1) / Gamma(alpha); q = tau^(alpha - 2) / Gamma(alpha), integrable iff alpha > 1. \
                  alpha <= 1 requires cell-average entries.",
        },
        PresetInfo {
            name: "cesaro",
            params: p(&[("c", 0.1)]),
            doc: "v = c (x - t) / x; w = c / x (Cesàro operator, spectral radius 2c on (0, 1)); q = |c| / tau is not integrable.",
        },
        PresetInfo {
            name: "rank-one-bumps",
            params: p(&[("scale", 1.0)]),
            doc: "v = scale * bump_(1/2,1)(x) * bump_(0,1/2)(t); phi psi = 0, Lipschitz moduli, q = L1 L2 tau.",
        },
        PresetInfo {
            name: "log-moduli",
            params: p(&[("delta1", 0.3), ("delta2", 0.3)]),
            doc: "|v| = omega1(x - t) omega2(x - t), omega_i ~ |ln tau|^(-delta_i); q = omega1 omega2 / tau is integrable \
                  iff delta1 + delta2 > 1. Stress case for divergence of the successive approximations.",
        },
        PresetInfo {
            name: "custom-csv",
            params: BTreeMap::new(),
            doc: "Dense n x n kernel matrix of v read from CSV (row-major, strictly lower triangular).",
        },
    ]
}

fn merged_params(name: &str, given: &BTreeMap<String, f64>) -> Result<BTreeMap<String, f64>> {
    let info = catalog()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::UnknownPreset(name.to_string()))?;
    let mut params: BTreeMap<String, f64> = info.params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    for (k, v) in given {
        if !params.contains_key(k) {
            return Err(Error::param(
                k,
                format!(
                    "not a parameter of preset `{name}` (expected one of: {})",
                    info.params.keys().copied().collect::<Vec<_>>().join(", ")
                ),
            ));
        }
        if !v.is_finite() {
            return Err(Error::param(k, format!("must be finite, got {v}")));
        }
        params.insert(k.clone(), *v);
    }
    Ok(params)
}

/// Builds a named preset from the catalog. Missing parameters take their
/// catalog defaults.
pub fn make_preset(name: &str, params: &BTreeMap<String, f64>) -> Result<KernelPreset> {
    if name == "custom-csv" {
        return Err(Error::param(
            "path",
            "preset `custom-csv` reads its kernel from a file; use `preset_from_csv`",
        ));
    }
    let params = merged_params(name, params)?;
    let get = |k: &str| params[k];
    let mut preset = KernelPreset {
        name: name.to_string(),
        params: params.clone(),
        source: KernelSource::Function(KernelFn::constant(0.0)),
        majorant: None,
        moduli: None,
        product_vanishes: None,
        requires_cell_average: false,
        doc: catalog().into_iter().find(|p| p.name == name).map(|p| p.doc.to_string()).unwrap_or_default(),
    };
    match name {
        "constant-times-lag" => {
            let c = get("c");
            preset.source = KernelSource::Function(KernelFn::new(format!("{c}(x-t)"), move |x, t| c * (x - t)));
            preset.majorant = Some(ScalarFn::constant(c.abs()));
        }
        "fractional" => {
            let alpha = get("alpha");
            if !(alpha > 0.0 && alpha <= 20.0) {
                return Err(Error::param("alpha", format!("must lie in (0, 20], got {alpha}")));
            }
            let g = gamma(alpha);
            preset.source = KernelSource::Function(KernelFn::new(
                format!("(x-t)^({alpha}-1)/Gamma({alpha})"),
                move |x, t| (x - t).powf(alpha - 1.0) / g,
            ));
            preset.majorant = Some(ScalarFn::new(format!("tau^({alpha}-2)/Gamma({alpha})"), move |t: f64| {
                t.powf(alpha - 2.0) / g
            }));
            preset.requires_cell_average = alpha <= 1.0;
        }
        "cesaro" => {
            let c = get("c");
            preset.source = KernelSource::Function(KernelFn::new(format!("{c}(x-t)/x"), move |x, t| c * (x - t) / x));
            preset.majorant = Some(ScalarFn::new(format!("{}/tau", c.abs()), move |t: f64| c.abs() / t));
        }
        "rank-one-bumps" => {
            let scale = get("scale");
            let phi_b = bump_on(0.5, 1.0);
            let phi = ScalarFn::new(format!("{scale} bump(1/2,1)"), move |x| scale * phi_b.eval(x));
            let psi = bump_on(0.0, 0.5);
            let (l1, l2) = (scale.abs() * bump_lipschitz(0.5, 1.0), bump_lipschitz(0.0, 0.5));
            let base = rank_one_kernel(&phi, &psi, (0.0, 1.0));
            preset.source = base.source;
            preset.product_vanishes = base.product_vanishes;
            preset.majorant = Some(ScalarFn::new(format!("{l1} {l2} tau"), move |t| l1 * l2 * t));
            preset.moduli = Some((
                ScalarFn::new(format!("{l1} tau"), move |t| l1 * t),
                ScalarFn::new(format!("{l2} tau"), move |t| l2 * t),
            ));
        }
        "log-moduli" => {
            let (d1, d2) = (get("delta1"), get("delta2"));
            for (k, d) in [("delta1", d1), ("delta2", d2)] {
                if !(d > 0.0 && d <= 5.0) {
                    return Err(Error::param(k, format!("must lie in (0, 5], got {d}")));
                }
            }
            let (o1, o2) = (log_modulus(d1), log_modulus(d2));
            let (a1, a2) = (o1.clone(), o2.clone());
            preset.source = KernelSource::Function(KernelFn::new(
                format!("w1(x-t) w2(x-t), deltas {d1}, {d2}"),
                move |x, t| a1.eval(x - t) * a2.eval(x - t),
            ));
            let (b1, b2) = (o1.clone(), o2.clone());
            preset.majorant = Some(ScalarFn::new("w1 w2 / tau", move |t| b1.eval(t) * b2.eval(t) / t));
            preset.moduli = Some((o1, o2));
        }
        other => return Err(Error::UnknownPreset(other.to_string())),
    }
    Ok(preset)
}

/// `custom-csv` preset: the kernel matrix of `v` read from a dense CSV file.
pub fn preset_from_csv(path: &Path) -> Result<KernelPreset> {
    let file = std::fs::File::open(path)?;
    let m = operator::read_matrix_csv(file)?;
    if !operator::check_triangular(m.view()) {
        return Err(Error::invalid(format!(
            "{}: kernel matrix must be strictly lower triangular",
            path.display()
        )));
    }
    Ok(KernelPreset {
        name: "custom-csv".into(),
        params: BTreeMap::new(),
        source: KernelSource::Matrix(m),
        majorant: None,
        moduli: None,
        product_vanishes: None,
        requires_cell_average: false,
        doc: format!("kernel matrix from {}", path.display()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn lag_kernel(label: &str, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> KernelFn {
        KernelFn::new(label, move |x, t| f(x - t))
    }

    #[test]
    fn derive_w_examples() {
        let g = Grid::unit(64).unwrap();
        let id = ScalarFn::identity();
        let w = derive_w(&lag_kernel("x-t", |d| d), &id, &g, EntryMode::NodeSample).unwrap();
        for ((i, j), &v) in w.kernel().indexed_iter() {
            assert_abs_diff_eq!(v, if j < i { 1.0 } else { 0.0 }, epsilon = 1e-12);
        }

        let c = 0.3;
        let v = KernelFn::new("c(x-t)/x", move |x, t| c * (x - t) / x);
        let w = derive_w(&v, &id, &g, EntryMode::NodeSample).unwrap();
        for i in 1..64 {
            for j in 0..i {
                assert_abs_diff_eq!(w.kernel()[[i, j]], c / g.node(i), epsilon = 1e-12);
            }
        }

        for mode in [EntryMode::NodeSample, EntryMode::CellAverage] {
            let w = derive_w(&lag_kernel("sqrt", f64::sqrt), &id, &g, mode).unwrap();
            assert!(w.kernel().iter().all(|v| v.is_finite()));
        }
        let bad_phi = ScalarFn::new("-x", |x| -x);
        assert!(derive_w(&lag_kernel("x-t", |d| d), &bad_phi, &g, EntryMode::NodeSample).is_err());
    }

    #[test]
    fn derive_w_matches_discrete_majorant_in_node_mode() {
        let g = Grid::unit(40).unwrap();
        let phi = ScalarFn::new("x+x^3", |x| x + x * x * x);
        let v = KernelFn::new("v", |x, t| (x * t).sin() - x);
        let w = derive_w(&v, &phi, &g, EntryMode::NodeSample).unwrap();
        let s = MultiplicationOperator::from_fn(&phi, &g).unwrap();
        let vop = KernelOperator::from_kernel_fn(&v, &g, EntryMode::NodeSample).unwrap();
        let d = discrete_majorant(&s, &vop).unwrap();
        assert_eq!(w.kernel(), d.kernel());
    }

    #[test]
    fn majorant_check_examples() {
        let g = Grid::unit(128).unwrap();
        let ones = KernelOperator::from_kernel_fn(&KernelFn::constant(1.0), &g, EntryMode::NodeSample).unwrap();
        let q1 = ConvolutionMajorant::new(ScalarFn::constant(1.0), 1.0);
        let r = convolution_majorant_check(&ones, &q1).unwrap();
        assert!(r.holds);
        assert_eq!(r.worst_margin, 0.0);

        let inv_sqrt = |t: f64| t.powf(-0.5);
        let w = KernelOperator::from_kernel_fn(&lag_kernel("(x-t)^-1/2", inv_sqrt), &g, EntryMode::NodeSample).unwrap();
        let q = ConvolutionMajorant::new(ScalarFn::new("t^-1/2", inv_sqrt), 1.0);
        assert!(convolution_majorant_check(&w, &q).unwrap().holds);
        // derived from v = (x - t)^(1/2): equal up to rounding
        let wd = derive_w(&lag_kernel("sqrt", f64::sqrt), &ScalarFn::identity(), &g, EntryMode::NodeSample).unwrap();
        assert!(convolution_majorant_check(&wd, &q).unwrap().holds);
        let wc = derive_w(&lag_kernel("sqrt", f64::sqrt), &ScalarFn::identity(), &g, EntryMode::CellAverage).unwrap();
        assert!(convolution_majorant_check(&wc, &q).unwrap().holds);

        let ces = KernelOperator::from_kernel_fn(&KernelFn::new("1/x", |x, _| 1.0 / x), &g, EntryMode::NodeSample).unwrap();
        let q = ConvolutionMajorant::new(ScalarFn::new("1/t", |t| 1.0 / t), 1.0);
        assert!(convolution_majorant_check(&ces, &q).unwrap().holds);
        assert!(!q.integrable());
        assert!(q.l1_norm().is_infinite());

        let q_small = ConvolutionMajorant::new(ScalarFn::constant(0.5), 1.0);
        let r = convolution_majorant_check(&ones, &q_small).unwrap();
        assert!(!r.holds);
        assert_abs_diff_eq!(r.worst_margin, 0.5);
    }

    #[test]
    fn schur_bound_examples() {
        assert_abs_diff_eq!(schur_bound(&ScalarFn::constant(1.0), 1.0).value, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(schur_bound(&ScalarFn::new("t^-1/2", |t: f64| t.powf(-0.5)), 1.0).value, 2.0, epsilon = 1e-7);
        let div = schur_bound(&ScalarFn::new("1/t", |t| 1.0 / t), 1.0);
        assert!(!div.is_finite() && div.value.is_infinite());
    }

    #[test]
    fn truncation_examples() {
        let g = Grid::unit(256).unwrap();
        let inv_sqrt = |t: f64| t.powf(-0.5);
        let w = KernelOperator::from_kernel_fn(&lag_kernel("(x-t)^-1/2", inv_sqrt), &g, EntryMode::NodeSample).unwrap();
        let q = ConvolutionMajorant::new(ScalarFn::new("t^-1/2", inv_sqrt), 1.0);

        // above every sampled lag value nothing is cut, but the continuum tail is 2 / m
        let m = inv_sqrt(g.h()) * 1.01;
        let t = truncate_kernel(&w, &q, m).unwrap();
        assert_eq!(t.kernel.kernel(), w.kernel());
        assert_abs_diff_eq!(t.tail_bound, 2.0 / m, epsilon = 1e-7);

        let ones = KernelOperator::from_kernel_fn(&KernelFn::constant(1.0), &g, EntryMode::NodeSample).unwrap();
        let q1 = ConvolutionMajorant::new(ScalarFn::constant(1.0), 1.0);
        let t = truncate_kernel(&ones, &q1, 1.0).unwrap();
        assert_eq!(t.kernel.kernel(), ones.kernel());
        assert_eq!(t.tail_bound, 0.0);

        let t = truncate_kernel(&w, &q, 2.0).unwrap();
        assert_abs_diff_eq!(t.tail_bound, 1.0, epsilon = 1e-7);
        for ((i, j), &v) in t.kernel.kernel().indexed_iter() {
            if j < i {
                let lag = g.node(i) - g.node(j);
                assert_eq!(v == 0.0, lag < 0.25, "lag {lag}");
            }
        }
        let diff = w.sub(&t.kernel).unwrap();
        assert!(diff.op_norm().unwrap() <= t.tail_bound + 1e-6);
    }

    #[test]
    fn modulus_condition_examples() {
        let sqrt = ScalarFn::new("t^1/2", f64::sqrt);
        let r = modulus_condition(&sqrt, &sqrt, 1.0);
        assert!(r.is_finite());
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-6);

        let log_half = ScalarFn::new("|ln t|^-1/2", |t: f64| t.ln().abs().powf(-0.5));
        assert!(!modulus_condition(&log_half, &log_half, 0.5).is_finite());

        let r = modulus_condition(&ScalarFn::identity(), &ScalarFn::constant(1.0), 1.0);
        assert!(r.is_finite());
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn modulus_condition_separates_log_moduli() {
        // integrand ~ 1 / (tau |ln tau|^(d1 + d2)): finite iff d1 + d2 > 1
        for (d1, d2, finite) in [(0.3, 0.3, false), (0.5, 0.5, false), (1.0, 1.0, true), (1.5, 0.5, true)] {
            let r = modulus_condition(&log_modulus(d1), &log_modulus(d2), 0.5);
            assert_eq!(r.is_finite(), finite, "deltas {d1} {d2}");
        }
    }

    #[test]
    fn rank_one_examples() {
        let g = Grid::unit(32).unwrap();
        let zero = rank_one_kernel(&ScalarFn::constant(0.0), &ScalarFn::constant(1.0), (0.0, 1.0));
        assert!(zero.perturbation(&g, EntryMode::NodeSample).unwrap().is_zero());

        let bumps = rank_one_kernel(&bump_on(0.5, 1.0), &bump_on(0.0, 0.5), (0.0, 1.0));
        assert_eq!(bumps.product_vanishes, Some(true));

        let ones = rank_one_kernel(&ScalarFn::constant(1.0), &ScalarFn::constant(1.0), (0.0, 1.0));
        assert_eq!(ones.product_vanishes, Some(false));
        let v = ones.perturbation(&g, EntryMode::NodeSample).unwrap();
        assert!(v.kernel().indexed_iter().all(|((i, j), &x)| x == if j < i { 1.0 } else { 0.0 }));
    }

    #[test]
    fn rank_one_w_is_bounded_by_moduli() {
        let p = make_preset("rank-one-bumps", &BTreeMap::new()).unwrap();
        let (o1, o2) = p.moduli.clone().unwrap();
        let g = Grid::unit(200).unwrap();
        let w = p.majorant_operator(&ScalarFn::identity(), &g, EntryMode::NodeSample).unwrap();
        for i in 1..200 {
            for j in 0..i {
                let tau = g.node(i) - g.node(j);
                assert!(w.kernel()[[i, j]] <= o1.eval(tau) * o2.eval(tau) / tau * (1.0 + 1e-12));
            }
        }
        assert!(!w.is_zero());
    }

    #[test]
    fn holder_examples() {
        let g = Grid::unit(128).unwrap();
        let a = 0.4;
        let v = lag_kernel("(x-t)^(a-1)", move |d| d.powf(a - 1.0));
        assert_abs_diff_eq!(holder_norm(&v, a, &g).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(holder_norm(&KernelFn::constant(0.0), 0.5, &g).unwrap(), 0.0);
        let lag = lag_kernel("x-t", |d| d);
        let coarse = holder_norm(&lag, 1.0, &Grid::unit(16).unwrap()).unwrap();
        let fine = holder_norm(&lag, 1.0, &g).unwrap();
        assert!(coarse < fine && fine < 1.0 && 1.0 - fine < 0.01);
        assert!(holder_norm(&lag, 0.0, &g).is_err());
        assert!(holder_norm(&lag, 1.5, &g).is_err());
    }

    #[test]
    fn preset_examples() {
        let p = make_preset("constant-times-lag", &BTreeMap::from([("c".to_string(), 1.0)])).unwrap();
        assert_eq!(p.kernel_fn().unwrap().eval(0.75, 0.25), 0.5);

        let p = make_preset("fractional", &BTreeMap::from([("alpha".to_string(), 2.0)])).unwrap();
        let v = p.kernel_fn().unwrap();
        assert_abs_diff_eq!(v.eval(0.9, 0.2), 0.7, epsilon = 1e-15);

        let p = make_preset("fractional", &BTreeMap::from([("alpha".to_string(), 1.5)])).unwrap();
        let q = p.convolution_majorant(1.0).unwrap();
        assert_abs_diff_eq!(q.l1_norm(), 2.0 / gamma(1.5), epsilon = 1e-7);
        assert!(make_preset("fractional", &BTreeMap::from([("alpha".to_string(), 0.5)]))
            .unwrap()
            .requires_cell_average);
    }

    #[test]
    fn preset_errors() {
        assert!(matches!(make_preset("nope", &BTreeMap::new()), Err(Error::UnknownPreset(_))));
        assert!(matches!(
            make_preset("cesaro", &BTreeMap::from([("alpha".to_string(), 1.0)])),
            Err(Error::Parameter { .. })
        ));
        assert!(make_preset("fractional", &BTreeMap::from([("alpha".to_string(), -1.0)])).is_err());
        assert!(make_preset("log-moduli", &BTreeMap::from([("delta1".to_string(), 0.0)])).is_err());
        assert!(make_preset("custom-csv", &BTreeMap::new()).is_err());
    }

    #[test]
    fn cesaro_gelfand_estimate_stays_below_continuum_value() {
        // the discretized Cesàro operator is nilpotent; its Gelfand iterate
        // sits well below the continuum spectral radius 2c
        let p = make_preset("cesaro", &BTreeMap::from([("c".to_string(), 0.1)])).unwrap();
        let g = Grid::unit(256).unwrap();
        let w = p.majorant_operator(&ScalarFn::identity(), &g, EntryMode::NodeSample).unwrap();
        let est = w.gelfand_spr(30).unwrap();
        assert!(est.estimate > 0.0 && est.estimate < 0.2, "{}", est.estimate);
        assert!(est.iterates[0] <= 0.2);
    }

    #[test]
    fn csv_preset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.csv");
        let g = Grid::unit(6).unwrap();
        let v = KernelOperator::from_kernel_fn(&KernelFn::new("x-t", |x, t| x - t), &g, EntryMode::NodeSample).unwrap();
        v.write_csv(std::fs::File::create(&path).unwrap()).unwrap();
        let p = preset_from_csv(&path).unwrap();
        assert_eq!(p.perturbation(&g, EntryMode::NodeSample).unwrap().kernel(), v.kernel());
        let w = p.majorant_operator(&ScalarFn::identity(), &g, EntryMode::NodeSample).unwrap();
        assert!(w.kernel().indexed_iter().all(|((i, j), &x)| (x - if j < i { 1.0 } else { 0.0 }).abs() < 1e-12));
        assert!(p.perturbation(&Grid::unit(5).unwrap(), EntryMode::NodeSample).is_err());
    }
}
