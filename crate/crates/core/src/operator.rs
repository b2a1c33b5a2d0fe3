// SPDX-License-Identifier: Apache-2.0

//! Discretized Volterra-type integral operators and the multiplication
//! operator they perturb.
//!
//! A [`KernelOperator`] stores kernel values `k[i][j]` at (output node `x_i`,
//! input node `t_j`) and acts by the rectangle rule
//! `(A f)_i = sum_{j < i} h k[i][j] f_j`. Entries on and above the diagonal
//! are always zero, which is the discrete form of `A chi_a = chi_a A chi_a`.
//! The diagonal strip is left out of every quadrature; for bounded kernels
//! that costs `O(h)`, for kernels bounded by `(x - t)^(alpha - 1)` it costs
//! `O(h^alpha)`.

use std::io::{Read, Write};
use std::sync::{Arc, OnceLock};

use ndarray::{Array1, Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::func::{KernelFn, ScalarFn};
use crate::grid::{Grid, GridFunction};
use crate::integrate;
use crate::linalg::{self, PowerOptions};

/// How kernel entries are obtained from a kernel function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryMode {
    /// `k[i][j] = k(x_i, t_j)`.
    #[default]
    NodeSample,
    /// Mean of `k` over the cell pair, by a 3x3 sub-cell midpoint rule.
    /// Suited to weakly singular kernels such as `(x - t)^(-1/2)`.
    CellAverage,
}

impl EntryMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EntryMode::NodeSample => "node-sample",
            EntryMode::CellAverage => "cell-average",
        }
    }
}

/// Offsets of the 3x3 sub-cell midpoints, in units of `h`.
const SUBCELL: [f64; 3] = [-1.0 / 3.0, 0.0, 1.0 / 3.0];

/// Evaluates a lag- or point-kernel on entry `(i, j)` according to `mode`.
pub(crate) fn entry_value(f: impl Fn(f64, f64) -> f64, grid: &Grid, i: usize, j: usize, mode: EntryMode) -> f64 {
    let (x, t) = (grid.node(i), grid.node(j));
    match mode {
        EntryMode::NodeSample => f(x, t),
        EntryMode::CellAverage => {
            let h = grid.h();
            let mut acc = 0.0;
            for dx in SUBCELL {
                for dt in SUBCELL {
                    acc += f(x + dx * h, t + dt * h);
                }
            }
            acc / 9.0
        }
    }
}

/// Strictly lower-triangular kernel operator on a grid.
#[derive(Debug, Clone)]
pub struct KernelOperator {
    grid: Arc<Grid>,
    kernel: Array2<f64>,
    mode: EntryMode,
}

/// Outcome of an entrywise majorization test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Majorization {
    pub holds: bool,
    /// `max_{i>j} (|a_ij| - b_ij)`; non-positive when the test holds.
    pub worst_violation: f64,
}

/// Gelfand iterates `r_m = ||A^m||^(1/m)`.
#[derive(Debug, Clone, Serialize)]
pub struct GelfandEstimate {
    pub iterates: Vec<f64>,
    /// `r_{n_max}`.
    pub estimate: f64,
    /// Spectral radius of the discrete matrix from its eigenvalues. Always
    /// zero for strictly lower-triangular matrices; reported for contrast.
    pub eigen_spr: f64,
    pub n_max: usize,
    pub grid_n: usize,
}

impl KernelOperator {
    /// Builds `k[i][j]` from `k` for `i > j`; every other entry is zero.
    pub fn from_kernel_fn(k: &KernelFn, grid: &Arc<Grid>, mode: EntryMode) -> Result<Self> {
        let n = grid.n();
        let mut kernel = Array2::zeros((n, n));
        for i in 1..n {
            for j in 0..i {
                let v = entry_value(|x, t| k.eval(x, t), grid, i, j, mode);
                if !v.is_finite() {
                    return Err(Error::KernelConstruction { i, j, value: v });
                }
                kernel[[i, j]] = v;
            }
        }
        Ok(Self {
            grid: Arc::clone(grid),
            kernel,
            mode,
        })
    }

    /// Wraps an explicit kernel matrix after validating its shape,
    /// finiteness and strict lower-triangularity.
    pub fn from_matrix(grid: &Arc<Grid>, kernel: Array2<f64>, mode: EntryMode) -> Result<Self> {
        let n = grid.n();
        if kernel.dim() != (n, n) {
            return Err(Error::invalid(format!(
                "kernel matrix is {:?}, grid needs {n}x{n}",
                kernel.dim()
            )));
        }
        if let Some(((i, j), &v)) = kernel.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::KernelConstruction { i, j, value: v });
        }
        if !check_triangular(kernel.view()) {
            return Err(Error::invalid("kernel matrix has entries on or above the diagonal"));
        }
        Ok(Self {
            grid: Arc::clone(grid),
            kernel,
            mode,
        })
    }

    pub fn zero(grid: &Arc<Grid>) -> Self {
        Self {
            grid: Arc::clone(grid),
            kernel: Array2::zeros((grid.n(), grid.n())),
            mode: EntryMode::NodeSample,
        }
    }

    /// Kernel built from a matrix already known to be strictly lower triangular.
    pub(crate) fn from_parts(grid: &Arc<Grid>, kernel: Array2<f64>, mode: EntryMode) -> Self {
        debug_assert!(check_triangular(kernel.view()));
        Self {
            grid: Arc::clone(grid),
            kernel,
            mode,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn kernel(&self) -> &Array2<f64> {
        &self.kernel
    }

    pub fn into_kernel(self) -> Array2<f64> {
        self.kernel
    }

    pub fn mode(&self) -> EntryMode {
        self.mode
    }

    /// Matrix of the discrete operator, `h * k`.
    pub fn matrix(&self) -> Array2<f64> {
        &self.kernel * self.grid.h()
    }

    pub fn is_zero(&self) -> bool {
        self.kernel.iter().all(|&v| v == 0.0)
    }

    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        self.grid.ensure_same(f.grid())?;
        let out = self.kernel.dot(f.values()) * self.grid.h();
        GridFunction::new(&self.grid, out)
    }

    /// Kernel of the product `self * other`: `h * (K_self K_other)`.
    pub fn compose(&self, other: &KernelOperator) -> Result<KernelOperator> {
        self.grid.ensure_same(&other.grid)?;
        let kernel = linalg::lower_tri_matmul(self.grid.h(), self.kernel.view(), other.kernel.view());
        Ok(Self::from_parts(&self.grid, kernel, self.mode))
    }

    /// `self^m` for `m >= 1`.
    pub fn power(&self, m: usize) -> Result<KernelOperator> {
        if m == 0 {
            return Err(Error::invalid("operator power must be at least 1"));
        }
        let mut p = self.clone();
        for _ in 1..m {
            p = p.compose(self)?;
        }
        Ok(p)
    }

    pub fn scaled(&self, c: f64) -> KernelOperator {
        Self::from_parts(&self.grid, &self.kernel * c, self.mode)
    }

    pub fn add(&self, other: &KernelOperator) -> Result<KernelOperator> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Self::from_parts(&self.grid, &self.kernel + &other.kernel, self.mode))
    }

    pub fn sub(&self, other: &KernelOperator) -> Result<KernelOperator> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Self::from_parts(&self.grid, &self.kernel - &other.kernel, self.mode))
    }

    /// `L2` operator norm (largest singular value of `h * k`), by power
    /// iteration to relative tolerance 1e-10 with at most 10000 steps.
    pub fn op_norm(&self) -> Result<f64> {
        self.op_norm_with(PowerOptions::default())
    }

    pub fn op_norm_with(&self, opts: PowerOptions) -> Result<f64> {
        Ok(self.grid.h() * linalg::spectral_norm(self.kernel.view(), opts)?)
    }

    /// Gelfand iterates `r_m = ||A^m||^(1/m)`, `m = 1..=n_max`.
    ///
    /// Norms come from [`linalg::spectral_norm_settled`]. Powers are
    /// renormalized after every product and their logarithmic
    /// scale is carried separately, so neither underflow nor overflow occurs
    /// for long iterate sequences.
    pub fn gelfand_spr(&self, n_max: usize) -> Result<GelfandEstimate> {
        if n_max < 2 {
            return Err(Error::invalid(format!("gelfand_spr needs n_max >= 2, got {n_max}")));
        }
        let mut iterates = Vec::with_capacity(n_max);
        let mut power = self.clone();
        let mut log_scale = 0.0_f64;
        for m in 1..=n_max {
            if m > 1 {
                power = power.compose(self)?;
            }
            let norm = power.grid.h() * linalg::spectral_norm_settled(power.kernel.view(), PowerOptions::default())?;
            if norm == 0.0 {
                iterates.resize(n_max, 0.0);
                break;
            }
            let log_norm = log_scale + norm.ln();
            iterates.push((log_norm / m as f64).exp());
            power.kernel.mapv_inplace(|v| v / norm);
            log_scale = log_norm;
        }
        let h = self.grid.h();
        let eigen_spr = self.kernel.diag().iter().fold(0.0_f64, |acc, v| acc.max((h * v).abs()));
        Ok(GelfandEstimate {
            estimate: iterates[n_max - 1],
            iterates,
            eigen_spr,
            n_max,
            grid_n: self.n(),
        })
    }

    /// Entrywise absolute value, the minimal nonnegative majorant.
    pub fn abs(&self) -> KernelOperator {
        Self::from_parts(&self.grid, self.kernel.mapv(f64::abs), self.mode)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.kernel.iter().all(|&v| v >= 0.0)
    }

    /// Whether `self` majorizes `a`, i.e. `|a_ij| <= self_ij` for all `i > j`.
    pub fn majorizes(&self, a: &KernelOperator) -> Result<Majorization> {
        self.grid.ensure_same(&a.grid)?;
        Ok(majorization(self.kernel.view(), a.kernel.view()))
    }

    /// `R_eps A R_eps` with the bump mollifier from [`mollifier`].
    pub fn mollify(&self, eps: f64) -> Result<KernelOperator> {
        let r = mollifier(&self.grid, eps)?;
        r.compose(self)?.compose(&r)
    }

    /// Writes the full `n x n` kernel matrix as dense CSV, row-major.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_matrix_csv(self.kernel.view(), writer)
    }

    /// Loads a kernel from dense CSV; the matrix must be `n x n` for this
    /// grid and strictly lower triangular.
    pub fn read_csv<R: Read>(grid: &Arc<Grid>, reader: R, mode: EntryMode) -> Result<KernelOperator> {
        let m = read_matrix_csv(reader)?;
        Self::from_matrix(grid, m, mode)
    }
}

pub(crate) fn majorization(b: ArrayView2<'_, f64>, a: ArrayView2<'_, f64>) -> Majorization {
    let n = a.nrows();
    let mut worst = f64::NEG_INFINITY;
    for i in 1..n {
        for j in 0..i {
            worst = worst.max(a[[i, j]].abs() - b[[i, j]]);
        }
    }
    Majorization {
        holds: worst <= 0.0,
        worst_violation: worst,
    }
}

/// True iff every entry with `j >= i` vanishes.
pub fn check_triangular(a: ArrayView2<'_, f64>) -> bool {
    a.is_square() && linalg::is_strictly_lower(a)
}

pub fn write_matrix_csv<W: Write>(m: ArrayView2<'_, f64>, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for row in m.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dense square matrix from CSV. Rows must all have `n` columns.
pub fn read_matrix_csv<R: Read>(reader: R) -> Result<Array2<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut data = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    for record in rdr.records() {
        let record = record?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(Error::Csv(format!("row {} has {} columns, expected {c}", rows + 1, record.len())));
            }
            _ => {}
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Csv(format!("row {}, column {}: `{field}` is not a number", rows + 1, j + 1)))?;
            data.push(v);
        }
        rows += 1;
    }
    let cols = cols.unwrap_or(0);
    if rows != cols {
        return Err(Error::Csv(format!("kernel matrix must be square, got {rows}x{cols}")));
    }
    Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Csv(e.to_string()))
}

/// Multiplication by a strictly increasing function `phi` sampled at nodes.
#[derive(Debug, Clone)]
pub struct MultiplicationOperator {
    grid: Arc<Grid>,
    phi: Array1<f64>,
}

impl MultiplicationOperator {
    pub fn new(grid: &Arc<Grid>, phi: Array1<f64>) -> Result<Self> {
        if phi.len() != grid.n() {
            return Err(Error::invalid(format!("phi has {} values, grid has {}", phi.len(), grid.n())));
        }
        if let Some((i, v)) = phi.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Sampling {
                index: i,
                x: grid.node(i),
                value: *v,
            });
        }
        if let Some(i) = (1..phi.len()).find(|&i| phi[i] <= phi[i - 1]) {
            return Err(Error::invalid(format!(
                "phi must strictly increase along the nodes; phi({}) = {} <= phi({}) = {}",
                grid.node(i),
                phi[i],
                grid.node(i - 1),
                phi[i - 1]
            )));
        }
        Ok(Self {
            grid: Arc::clone(grid),
            phi,
        })
    }

    pub fn from_fn(phi: &ScalarFn, grid: &Arc<Grid>) -> Result<Self> {
        let sampled = GridFunction::sample(phi, grid)?;
        Self::new(grid, sampled.into_values())
    }

    /// `(S f)(x) = x f(x)`.
    pub fn identity(grid: &Arc<Grid>) -> Self {
        Self {
            grid: Arc::clone(grid),
            phi: Array1::from(grid.nodes().to_vec()),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn phi(&self) -> &Array1<f64> {
        &self.phi
    }

    /// `phi` range over the nodes, the scale for singular-division checks.
    pub fn range(&self) -> f64 {
        self.phi[self.phi.len() - 1] - self.phi[0]
    }

    pub fn matrix(&self) -> Array2<f64> {
        Array2::from_diag(&self.phi)
    }

    /// `[S, A] = S A - A S`, kernel `(phi(x_i) - phi(t_j)) k[i][j]`.
    pub fn commutator(&self, a: &KernelOperator) -> Result<KernelOperator> {
        self.grid.ensure_same(&a.grid)?;
        let mut kernel = a.kernel.clone();
        for ((i, j), v) in kernel.indexed_iter_mut() {
            if j < i {
                *v *= self.phi[i] - self.phi[j];
            }
        }
        Ok(KernelOperator::from_parts(&self.grid, kernel, a.mode))
    }

    /// Solves `[S, K] = V` entrywise: `k[i][j] = v[i][j] / (phi(x_i) - phi(t_j))`.
    pub fn solve_commutator(&self, v: &KernelOperator) -> Result<KernelOperator> {
        self.grid.ensure_same(&v.grid)?;
        let floor = 1e-14 * self.range();
        let n = self.grid.n();
        let mut kernel = Array2::zeros((n, n));
        for i in 1..n {
            for j in 0..i {
                let d = self.phi[i] - self.phi[j];
                if d <= 0.0 || d < floor {
                    return Err(Error::SingularDivision { i, j, denominator: d });
                }
                kernel[[i, j]] = v.kernel[[i, j]] / d;
            }
        }
        Ok(KernelOperator::from_parts(&self.grid, kernel, v.mode))
    }
}

fn bump_normalization() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| 1.0 / integrate::adaptive_gauss(&|x: f64| bump_profile(x), 0.0, 1.0, 1e-14))
}

fn bump_profile(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        (-1.0 / (x * (1.0 - x))).exp()
    }
}

/// Standard bump `r(x) = C exp(-1 / (x (1 - x)))` on `(0, 1)` with unit mass.
pub fn bump(x: f64) -> f64 {
    bump_normalization() * bump_profile(x)
}

/// Discretized convolution `R_eps` by `r_eps(x) = r(x / eps) / eps`.
///
/// `r` is supported in `[0, 1]`, so `R_eps` is itself strictly lower
/// triangular; near the left end the convolution is simply truncated.
pub fn mollifier(grid: &Arc<Grid>, eps: f64) -> Result<KernelOperator> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::invalid(format!("mollifier width must be positive, got {eps}")));
    }
    let n = grid.n();
    let mut kernel = Array2::zeros((n, n));
    Zip::indexed(&mut kernel).for_each(|(i, j), v| {
        if j < i {
            *v = bump((grid.node(i) - grid.node(j)) / eps) / eps;
        }
    });
    Ok(KernelOperator::from_parts(grid, kernel, EntryMode::NodeSample))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use std::f64::consts::PI;

    fn ones(n: usize) -> KernelOperator {
        KernelOperator::from_kernel_fn(&KernelFn::constant(1.0), &Grid::unit(n).unwrap(), EntryMode::NodeSample).unwrap()
    }

    #[test]
    fn construction_examples() {
        let g = Grid::unit(2).unwrap();
        let lag = KernelFn::new("x-t", |x, t| x - t);
        let a = KernelOperator::from_kernel_fn(&lag, &g, EntryMode::NodeSample).unwrap();
        assert_eq!(a.kernel(), &array![[0.0, 0.0], [0.5, 0.0]]);

        let a = ones(4);
        for ((i, j), &v) in a.kernel().indexed_iter() {
            assert_eq!(v, if j < i { 1.0 } else { 0.0 });
        }

        let g = Grid::unit(33).unwrap();
        let sing = KernelFn::new("(x-t)^-1/2", |x, t| (x - t).powf(-0.5));
        for mode in [EntryMode::NodeSample, EntryMode::CellAverage] {
            let a = KernelOperator::from_kernel_fn(&sing, &g, mode).unwrap();
            assert!(a.kernel().iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn cell_average_is_exact_for_bilinear_kernels() {
        let g = Grid::unit(8).unwrap();
        let k = KernelFn::new("x t", |x, t| 3.0 * x - 2.0 * t + x * t);
        let node = KernelOperator::from_kernel_fn(&k, &g, EntryMode::NodeSample).unwrap();
        let cell = KernelOperator::from_kernel_fn(&k, &g, EntryMode::CellAverage).unwrap();
        assert_abs_diff_eq!(node.kernel(), cell.kernel(), epsilon = 1e-14);
    }

    #[test]
    fn non_finite_kernel_names_entry() {
        let g = Grid::unit(4).unwrap();
        let bad = KernelFn::new("bad", |x, _| if x > 0.6 { f64::NAN } else { 1.0 });
        match KernelOperator::from_kernel_fn(&bad, &g, EntryMode::NodeSample) {
            Err(Error::KernelConstruction { i, j, .. }) => assert_eq!((i, j), (2, 0)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn apply_examples() {
        let a = ones(256);
        let g = a.grid().clone();
        let out = a.apply(&GridFunction::constant(&g, 1.0)).unwrap();
        for (o, x) in out.values().iter().zip(g.nodes()) {
            assert!((o - x).abs() <= g.h());
        }
        assert!(a.apply(&GridFunction::zeros(&g)).unwrap().values().iter().all(|&v| v == 0.0));

        let g = Grid::unit(512).unwrap();
        let lag = KernelOperator::from_kernel_fn(&KernelFn::new("x-t", |x, t| x - t), &g, EntryMode::NodeSample).unwrap();
        let out = lag.apply(&GridFunction::constant(&g, 1.0)).unwrap();
        let x = g.node(511);
        assert!((out.values()[511] - 0.5 * x * x).abs() <= 0.01 * 0.5 * x * x);

        let other = GridFunction::constant(&Grid::unit(8).unwrap(), 1.0);
        assert!(matches!(lag.apply(&other), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn compose_examples() {
        let a = ones(40);
        let z = KernelOperator::zero(a.grid());
        assert!(a.compose(&z).unwrap().is_zero());

        let h = a.grid().h();
        let c = a.compose(&a).unwrap();
        for i in 0..40 {
            for j in 0..40 {
                // count of intermediate indices l with j < l < i
                let count = (j + 1..i).count() as f64;
                assert_abs_diff_eq!(c.kernel()[[i, j]], h * count, epsilon = 1e-14);
            }
        }

        let a2 = KernelOperator::from_matrix(&Grid::unit(2).unwrap(), array![[0.0, 0.0], [3.0, 0.0]], EntryMode::NodeSample).unwrap();
        assert!(a2.compose(&a2).unwrap().is_zero());
    }

    #[test]
    fn compose_matches_repeated_apply() {
        let g = Grid::unit(50).unwrap();
        let a = KernelOperator::from_kernel_fn(&KernelFn::new("s", |x, t| (3.0 * x - t).sin()), &g, EntryMode::NodeSample).unwrap();
        let b = KernelOperator::from_kernel_fn(&KernelFn::new("c", |x, t| (x * t).cos()), &g, EntryMode::NodeSample).unwrap();
        let f = GridFunction::sample(&ScalarFn::new("e", f64::exp), &g).unwrap();
        let lhs = a.compose(&b).unwrap().apply(&f).unwrap();
        let rhs = a.apply(&b.apply(&f).unwrap()).unwrap();
        assert_abs_diff_eq!(lhs.values(), rhs.values(), epsilon = 1e-14);
    }

    #[test]
    fn op_norm_examples() {
        assert_eq!(KernelOperator::zero(&Grid::unit(16).unwrap()).op_norm().unwrap(), 0.0);
        let j = ones(2048);
        let nj = j.op_norm().unwrap();
        assert!((nj - 2.0 / PI).abs() <= 0.01 * 2.0 / PI, "{nj}");
        let g = j.grid().clone();
        let lag = KernelOperator::from_kernel_fn(&KernelFn::new("x-t", |x, t| x - t), &g, EntryMode::NodeSample).unwrap();
        assert!(lag.op_norm().unwrap() <= 1.0);
    }

    #[test]
    fn gelfand_examples() {
        let z = KernelOperator::zero(&Grid::unit(16).unwrap());
        let est = z.gelfand_spr(5).unwrap();
        assert!(est.iterates.iter().all(|&r| r == 0.0));

        let j = ones(512);
        let est = j.gelfand_spr(20).unwrap();
        assert!(est.estimate < 0.15, "{}", est.estimate);
        assert!(est.iterates.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(est.eigen_spr, 0.0);
        assert!(j.gelfand_spr(1).is_err());
    }

    #[test]
    fn gelfand_matches_direct_powers() {
        let j = ones(64);
        let est = j.gelfand_spr(6).unwrap();
        for m in 1..=6 {
            let direct = j.power(m).unwrap().op_norm().unwrap().powf(1.0 / m as f64);
            assert_abs_diff_eq!(est.iterates[m - 1], direct, epsilon = 1e-9);
        }
    }

    #[test]
    fn nilpotent_powers_terminate() {
        // on n cells the strictly lower triangle vanishes at the n-th power
        let j = ones(4);
        let est = j.gelfand_spr(6).unwrap();
        assert!(est.iterates[3] == 0.0 && est.iterates[5] == 0.0);
        assert!(est.iterates[2] > 0.0);
    }

    #[test]
    fn abs_examples() {
        let j = ones(8);
        assert_eq!(j.abs().kernel(), j.kernel());
        let neg = j.scaled(-1.0);
        assert_eq!(neg.abs().kernel(), j.kernel());
        let g = Grid::unit(8).unwrap();
        let a = KernelOperator::from_kernel_fn(&KernelFn::new("s", |x, t| (7.0 * x + 3.0 * t).sin()), &g, EntryMode::NodeSample).unwrap();
        assert_eq!(a.abs().abs().kernel(), a.abs().kernel());
    }

    #[test]
    fn majorization_examples() {
        let g = Grid::unit(8).unwrap();
        let a = KernelOperator::from_kernel_fn(&KernelFn::new("s", |x, t| (7.0 * x + 3.0 * t).sin()), &g, EntryMode::NodeSample).unwrap();
        let m = a.abs().majorizes(&a).unwrap();
        assert!(m.holds && m.worst_violation <= 0.0);
        let m = KernelOperator::zero(&g).majorizes(&a).unwrap();
        assert!(!m.holds && m.worst_violation > 0.0);
        assert!(a.majorizes(&ones(4)).is_err());
    }

    #[test]
    fn commutator_examples() {
        let j = ones(16);
        let s = MultiplicationOperator::identity(j.grid());
        let c = s.commutator(&j).unwrap();
        let g = j.grid();
        for ((i, jj), &v) in c.kernel().indexed_iter() {
            let expect = if jj < i { g.node(i) - g.node(jj) } else { 0.0 };
            assert_abs_diff_eq!(v, expect, epsilon = 1e-15);
        }
        assert!(c.is_nonnegative());
        assert!(s.commutator(&KernelOperator::zero(g)).unwrap().is_zero());
    }

    #[test]
    fn commutator_solve_examples() {
        let g = Grid::unit(32).unwrap();
        let s = MultiplicationOperator::identity(&g);
        let lag = KernelOperator::from_kernel_fn(&KernelFn::new("x-t", |x, t| x - t), &g, EntryMode::NodeSample).unwrap();
        let k = s.solve_commutator(&lag).unwrap();
        for ((i, j), &v) in k.kernel().indexed_iter() {
            if j < i {
                assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
            } else {
                assert_eq!(v, 0.0);
            }
        }
        assert!(s.solve_commutator(&KernelOperator::zero(&g)).unwrap().is_zero());
    }

    #[test]
    fn multiplication_operator_validates_monotonicity() {
        let g = Grid::unit(8).unwrap();
        assert!(MultiplicationOperator::from_fn(&ScalarFn::new("x^2-x", |x| x * x - x), &g).is_err());
        let s = MultiplicationOperator::from_fn(&ScalarFn::new("exp", f64::exp), &g).unwrap();
        assert!(s.range() > 0.0);
    }

    #[test]
    fn tiny_phi_gaps_are_singular() {
        let g = Grid::unit(8).unwrap();
        // strictly increasing, but the first gap is far below 1e-14 of the range
        let mut phi = Array1::from_shape_fn(8, |i| i as f64);
        phi[1] = 1e-18;
        let s = MultiplicationOperator::new(&g, phi).unwrap();
        let j = KernelOperator::from_kernel_fn(&KernelFn::constant(1.0), &g, EntryMode::NodeSample).unwrap();
        assert!(matches!(s.solve_commutator(&j), Err(Error::SingularDivision { i: 1, j: 0, .. })));
    }

    #[test]
    fn bump_has_unit_mass() {
        let mass = integrate::adaptive_gauss(&|x: f64| bump(x), 0.0, 1.0, 1e-13);
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-12);
        assert_eq!(bump(0.0), 0.0);
        assert_eq!(bump(1.2), 0.0);
    }

    #[test]
    fn mollifier_examples() {
        let g = Grid::unit(64).unwrap();
        assert!(KernelOperator::zero(&g).mollify(0.1).unwrap().is_zero());
        assert!(ones(64).mollify(0.1).unwrap().is_nonnegative());
        assert!(mollifier(&g, 0.0).is_err());

        let g = Grid::unit(1024).unwrap();
        let f = GridFunction::sample(&ScalarFn::identity(), &g).unwrap();
        let errs: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&eps| {
                let rf = mollifier(&g, eps).unwrap().apply(&f).unwrap();
                let d = GridFunction::new(&g, rf.values() - f.values()).unwrap();
                d.norm2()
            })
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn triangular_check_examples() {
        assert!(check_triangular(array![[0.0, 0.0], [2.0, 0.0]].view()));
        assert!(!check_triangular(Array2::<f64>::eye(3).view()));
        assert!(check_triangular(Array2::<f64>::zeros((3, 3)).view()));
        assert!(!check_triangular(Array2::<f64>::zeros((2, 3)).view()));
    }

    #[test]
    fn csv_round_trip_and_validation() {
        let a = ones(5).scaled(0.1);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert_eq!(text.lines().next().unwrap(), "0,0,0,0,0");
        let b = KernelOperator::read_csv(a.grid(), buf.as_slice(), EntryMode::NodeSample).unwrap();
        assert_eq!(a.kernel(), b.kernel());

        let upper = "0,1\n0,0\n";
        assert!(KernelOperator::read_csv(&Grid::unit(2).unwrap(), upper.as_bytes(), EntryMode::NodeSample).is_err());
        let ragged = "0,0\n1\n";
        assert!(matches!(read_matrix_csv(ragged.as_bytes()), Err(Error::Csv(_))));
        let wrong_n = "0,0\n1,0\n";
        assert!(KernelOperator::read_csv(&Grid::unit(3).unwrap(), wrong_n.as_bytes(), EntryMode::NodeSample).is_err());
    }
}
