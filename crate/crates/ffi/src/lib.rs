// SPDX-License-Identifier: Apache-2.0

//! C ABI over the `friedrichs` library.
//!
//! Every entry point returns an [`FrStatus`]; results come back through out
//! pointers. Objects are opaque handles created by `*_new`/`*_from_*` and
//! released with the matching `*_free`. After a failed call,
//! [`fr_last_error`] describes the failure for the calling thread.
//!
//! Matrices cross the boundary as dense row-major `n * n` arrays of the
//! kernel values `k[i][j]` (the operator matrix is `h * k`).

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use friedrichs::majorants;
use friedrichs::report;
use friedrichs::scenario::{self, Command};
use friedrichs::transform::{self, IterateOptions, SimilarityTransform};
use friedrichs::{EntryMode, Error, Grid, KernelOperator, MultiplicationOperator};
use ndarray::Array2;

/// Status codes returned by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrStatus {
    Ok = 0,
    InvalidInput = 1,
    NullPointer = 2,
    GridMismatch = 3,
    Sampling = 4,
    Singular = 5,
    NonConvergence = 6,
    Divergence = 7,
    Inversion = 8,
    Precondition = 9,
    Overflow = 10,
    TimeCap = 11,
    UnknownPreset = 12,
    Parameter = 13,
    Config = 14,
    Io = 15,
    Csv = 16,
    BufferTooSmall = 17,
    Panic = 18,
}

fn status_of(e: &Error) -> FrStatus {
    match e {
        Error::InvalidInput(_) => FrStatus::InvalidInput,
        Error::GridMismatch(_) => FrStatus::GridMismatch,
        Error::Sampling { .. } | Error::KernelConstruction { .. } => FrStatus::Sampling,
        Error::SingularDivision { .. } => FrStatus::Singular,
        Error::NonConvergence { .. } => FrStatus::NonConvergence,
        Error::Divergence { .. } => FrStatus::Divergence,
        Error::InversionInstability { .. } => FrStatus::Inversion,
        Error::Precondition(_) => FrStatus::Precondition,
        Error::Overflow(_) => FrStatus::Overflow,
        Error::TimeCap { .. } => FrStatus::TimeCap,
        Error::UnknownPreset(_) => FrStatus::UnknownPreset,
        Error::Parameter { .. } => FrStatus::Parameter,
        Error::Config { .. } => FrStatus::Config,
        Error::Io(_) => FrStatus::Io,
        Error::Csv(_) => FrStatus::Csv,
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

struct Failure(FrStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn fail(status: FrStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

/// Runs `f`, mapping errors and panics onto status codes.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            FrStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_last_error(format!("internal panic: {msg}"));
            FrStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    // SAFETY: caller passes either null or a live handle from this library.
    unsafe { p.as_ref() }.ok_or_else(|| fail(FrStatus::NullPointer, format!("{what} is null")))
}

fn out_ptr<T>(p: *mut T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(fail(FrStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(FrStatus::NullPointer, format!("{what} is null")));
    }
    // SAFETY: non-null and NUL-terminated per the API contract.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| fail(FrStatus::InvalidInput, format!("{what} is not valid UTF-8")))
}

fn mode(cell_average: c_int) -> EntryMode {
    if cell_average != 0 {
        EntryMode::CellAverage
    } else {
        EntryMode::NodeSample
    }
}

fn copy_matrix(m: &Array2<f64>, out: *mut f64, len: usize) -> Result<(), Failure> {
    out_ptr(out, "out")?;
    let need = m.len();
    if len < need {
        return Err(fail(FrStatus::BufferTooSmall, format!("buffer holds {len} values, need {need}")));
    }
    // SAFETY: `out` is non-null and has room for `len >= need` doubles.
    let dst = unsafe { std::slice::from_raw_parts_mut(out, need) };
    for (d, s) in dst.iter_mut().zip(m.iter()) {
        *d = *s;
    }
    Ok(())
}

fn multiplication(grid: &Arc<Grid>, phi: *const f64, phi_len: usize) -> Result<MultiplicationOperator, Failure> {
    if phi.is_null() {
        return Ok(MultiplicationOperator::identity(grid));
    }
    if phi_len != grid.n() {
        return Err(fail(
            FrStatus::GridMismatch,
            format!("phi has {phi_len} values, grid has {} nodes", grid.n()),
        ));
    }
    // SAFETY: `phi` is non-null with `phi_len` readable doubles.
    let values = unsafe { std::slice::from_raw_parts(phi, phi_len) }.to_vec();
    Ok(MultiplicationOperator::new(grid, values.into())?)
}

/// Midpoint grid on `(a, b)`.
pub struct FrGrid {
    inner: Arc<Grid>,
}

/// Strictly lower-triangular kernel operator.
pub struct FrKernel {
    inner: KernelOperator,
}

/// Summed successive-approximation series `K` and its diagnostics.
pub struct FrTransform {
    inner: SimilarityTransform,
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread ("" after a success).
/// Valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn fr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates a grid of `n >= 2` cells on `(a, b)`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn fr_grid_new(n: usize, a: f64, b: f64, out: *mut *mut FrGrid) -> FrStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let g = Grid::new(n, a, b)?;
        // SAFETY: checked non-null above.
        unsafe { *out = Box::into_raw(Box::new(FrGrid { inner: g })) };
        Ok(())
    })
}

/// Releases a grid; null is ignored.
///
/// # Safety
/// `grid` must be null or a handle from [`fr_grid_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fr_grid_free(grid: *mut FrGrid) {
    if !grid.is_null() {
        // SAFETY: ownership returns to Rust exactly once.
        drop(unsafe { Box::from_raw(grid) });
    }
}

/// Number of cells.
///
/// # Safety
/// `grid` must be a live grid handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fr_grid_n(grid: *const FrGrid, out: *mut usize) -> FrStatus {
    guard(|| {
        let g = unsafe { deref(grid, "grid") }?;
        out_ptr(out, "out")?;
        unsafe { *out = g.inner.n() };
        Ok(())
    })
}

/// Copies the `n` node positions into `out`.
///
/// # Safety
/// `grid` must be live; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fr_grid_nodes(grid: *const FrGrid, out: *mut f64, len: usize) -> FrStatus {
    guard(|| {
        let g = unsafe { deref(grid, "grid") }?;
        let nodes = Array2::from_shape_vec((1, g.inner.n()), g.inner.nodes().to_vec()).expect("shape matches");
        copy_matrix(&nodes, out, len)
    })
}

/// Kernel of a catalog preset on `grid`. `keys`/`values` hold `n_params`
/// parameter overrides (both may be null when `n_params` is 0).
///
/// # Safety
/// `grid` must be live, `name` NUL-terminated, `keys` an array of
/// `n_params` NUL-terminated strings, `values` an array of `n_params`
/// doubles, and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fr_kernel_from_preset(
    grid: *const FrGrid,
    name: *const c_char,
    keys: *const *const c_char,
    values: *const f64,
    n_params: usize,
    cell_average: c_int,
    out: *mut *mut FrKernel,
) -> FrStatus {
    guard(|| {
        let g = unsafe { deref(grid, "grid") }?;
        let name = unsafe { c_str(name, "name") }?;
        out_ptr(out, "out")?;
        let mut params = BTreeMap::new();
        if n_params > 0 {
            if keys.is_null() || values.is_null() {
                return Err(fail(FrStatus::NullPointer, "keys/values are null"));
            }
            for k in 0..n_params {
                // SAFETY: arrays hold `n_params` entries per the contract.
                let key = unsafe { c_str(*keys.add(k), "parameter key") }?;
                params.insert(key.to_string(), unsafe { *values.add(k) });
            }
        }
        let preset = majorants::make_preset(name, &params)?;
        let m = mode(cell_average);
        if preset.requires_cell_average && m != EntryMode::CellAverage {
            return Err(fail(
                FrStatus::Parameter,
                format!("preset `{name}` with these parameters needs cell-average entries"),
            ));
        }
        let v = preset.perturbation(&g.inner, m)?;
        unsafe { *out = Box::into_raw(Box::new(FrKernel { inner: v })) };
        Ok(())
    })
}

/// Kernel from a dense row-major `n * n` matrix (strictly lower triangular).
///
/// # Safety
/// `grid` must be live, `data` must hold `len` doubles, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fr_kernel_from_matrix(
    grid: *const FrGrid,
    data: *const f64,
    len: usize,
    cell_average: c_int,
    out: *mut *mut FrKernel,
) -> FrStatus {
    guard(|| {
        let g = unsafe { deref(grid, "grid") }?;
        if data.is_null() {
            return Err(fail(FrStatus::NullPointer, "data is null"));
        }
        out_ptr(out, "out")?;
        let n = g.inner.n();
        if len != n * n {
            return Err(fail(FrStatus::GridMismatch, format!("matrix has {len} values, grid needs {}", n * n)));
        }
        // SAFETY: `data` holds `len` doubles.
        let values = unsafe { std::slice::from_raw_parts(data, len) }.to_vec();
        let m = Array2::from_shape_vec((n, n), values).expect("length checked");
        let k = KernelOperator::from_matrix(&g.inner, m, mode(cell_average))?;
        unsafe { *out = Box::into_raw(Box::new(FrKernel { inner: k })) };
        Ok(())
    })
}

/// Releases a kernel; null is ignored.
///
/// # Safety
/// `kernel` must be null or a live kernel handle.
#[no_mangle]
pub unsafe extern "C" fn fr_kernel_free(kernel: *mut FrKernel) {
    if !kernel.is_null() {
        drop(unsafe { Box::from_raw(kernel) });
    }
}

/// Grid size of the kernel.
///
/// # Safety
/// `kernel` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fr_kernel_n(kernel: *const FrKernel, out: *mut usize) -> FrStatus {
    guard(|| {
        let k = unsafe { deref(kernel, "kernel") }?;
        out_ptr(out, "out")?;
        unsafe { *out = k.inner.n() };
        Ok(())
    })
}

/// Copies the kernel matrix (row-major, `n * n` values) into `out`.
///
/// # Safety
/// `kernel` must be live; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fr_kernel_copy_matrix(kernel: *const FrKernel, out: *mut f64, len: usize) -> FrStatus {
    guard(|| {
        let k = unsafe { deref(kernel, "kernel") }?;
        copy_matrix(k.inner.kernel(), out, len)
    })
}

/// `L2` operator norm.
///
/// # Safety
/// `kernel` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fr_kernel_op_norm(kernel: *const FrKernel, out: *mut f64) -> FrStatus {
    guard(|| {
        let k = unsafe { deref(kernel, "kernel") }?;
        out_ptr(out, "out")?;
        let v = k.inner.op_norm()?;
        unsafe { *out = v };
        Ok(())
    })
}

/// Gelfand estimate `||A^n_max||^(1/n_max)`.
///
/// # Safety
/// `kernel` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fr_kernel_gelfand(kernel: *const FrKernel, n_max: usize, out: *mut f64) -> FrStatus {
    guard(|| {
        let k = unsafe { deref(kernel, "kernel") }?;
        out_ptr(out, "out")?;
        let g = k.inner.gelfand_spr(n_max)?;
        unsafe { *out = g.estimate };
        Ok(())
    })
}

/// Majorant `|[S, .]^{-1} V|` with `S` the multiplication by `phi`
/// (`phi` null means `phi(x) = x`, otherwise `phi_len` node values).
///
/// # Safety
/// `v` must be live; `phi` null or `phi_len` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fr_kernel_majorant(
    v: *const FrKernel,
    phi: *const f64,
    phi_len: usize,
    out: *mut *mut FrKernel,
) -> FrStatus {
    guard(|| {
        let v = unsafe { deref(v, "v") }?;
        out_ptr(out, "out")?;
        let s = multiplication(v.inner.grid(), phi, phi_len)?;
        let w = majorants::discrete_majorant(&s, &v.inner)?;
        unsafe { *out = Box::into_raw(Box::new(FrKernel { inner: w })) };
        Ok(())
    })
}

/// Runs the successive approximations for `T = S + V` with `S` given by
/// `phi` as in [`fr_kernel_majorant`].
///
/// # Safety
/// `v` must be live; `phi` null or `phi_len` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fr_transform_new(
    v: *const FrKernel,
    phi: *const f64,
    phi_len: usize,
    tol: f64,
    n_cap: usize,
    out: *mut *mut FrTransform,
) -> FrStatus {
    guard(|| {
        let v = unsafe { deref(v, "v") }?;
        out_ptr(out, "out")?;
        let s = multiplication(v.inner.grid(), phi, phi_len)?;
        let w = majorants::discrete_majorant(&s, &v.inner)?;
        let t = transform::friedrichs_iterate(&s, &v.inner, &w, IterateOptions { tol, n_cap })?;
        unsafe { *out = Box::into_raw(Box::new(FrTransform { inner: t })) };
        Ok(())
    })
}

/// Releases a transform; null is ignored.
///
/// # Safety
/// `t` must be null or a live transform handle.
#[no_mangle]
pub unsafe extern "C" fn fr_transform_free(t: *mut FrTransform) {
    if !t.is_null() {
        drop(unsafe { Box::from_raw(t) });
    }
}

/// Summary numbers of a transform. Any out pointer may be null.
///
/// # Safety
/// `t` must be live; non-null out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn fr_transform_summary(
    t: *const FrTransform,
    terms_used: *mut usize,
    residual: *mut f64,
    chain_ok: *mut c_int,
    spr_k_estimate: *mut f64,
) -> FrStatus {
    guard(|| {
        let t = &unsafe { deref(t, "transform") }?.inner;
        unsafe {
            if !terms_used.is_null() {
                *terms_used = t.terms_used;
            }
            if !residual.is_null() {
                *residual = t.residual;
            }
            if !chain_ok.is_null() {
                *chain_ok = c_int::from(t.chain_ok());
            }
            if !spr_k_estimate.is_null() {
                *spr_k_estimate = t.spr_k_estimate();
            }
        }
        Ok(())
    })
}

/// New kernel handle holding `K`.
///
/// # Safety
/// `t` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fr_transform_kernel(t: *const FrTransform, out: *mut *mut FrKernel) -> FrStatus {
    guard(|| {
        let t = unsafe { deref(t, "transform") }?;
        out_ptr(out, "out")?;
        unsafe {
            *out = Box::into_raw(Box::new(FrKernel {
                inner: t.inner.k.clone(),
            }))
        };
        Ok(())
    })
}

/// Kernel of `M = (I + K)^{-1} - I`, cross-checked between Neumann series
/// and forward substitution.
///
/// # Safety
/// `k` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fr_invert_transform(k: *const FrKernel, out: *mut *mut FrKernel) -> FrStatus {
    guard(|| {
        let k = unsafe { deref(k, "k") }?;
        out_ptr(out, "out")?;
        let inv = transform::invert_transform(&k.inner)?;
        unsafe { *out = Box::into_raw(Box::new(FrKernel { inner: inv.m })) };
        Ok(())
    })
}

/// Runs a scenario from a TOML config. `command` is one of `analyze`,
/// `transform`, `evolve`, `sweep`. On return `*out_json` holds the JSON
/// report (a failure report when the status is not OK; free it with
/// [`fr_string_free`]) and `*out_exit_code` the CLI exit code (0, 1 or 2).
///
/// # Safety
/// `config_toml` and `command` must be NUL-terminated; out pointers writable.
#[no_mangle]
pub unsafe extern "C" fn fr_run(
    config_toml: *const c_char,
    command: *const c_char,
    out_json: *mut *mut c_char,
    out_exit_code: *mut c_int,
) -> FrStatus {
    guard(|| {
        out_ptr(out_json, "out_json")?;
        out_ptr(out_exit_code, "out_exit_code")?;
        unsafe {
            *out_json = ptr::null_mut();
            *out_exit_code = 1;
        }
        let text = unsafe { c_str(config_toml, "config_toml") }?;
        let cmd_name = unsafe { c_str(command, "command") }?;
        let result = cmd_name
            .parse::<Command>()
            .and_then(|cmd| scenario::parse_config(text).and_then(|cfg| scenario::run_scenario(&cfg, cmd)));
        let (json, code, err) = match result {
            Ok(r) => (report::emit_json(&r), r.exit_code(), None),
            Err(e) => (report::failure_json(cmd_name, &e), 1, Some(e)),
        };
        let c = CString::new(json).map_err(|_| fail(FrStatus::InvalidInput, "report contains NUL"))?;
        unsafe {
            *out_json = c.into_raw();
            *out_exit_code = code;
        }
        match err {
            Some(e) => Err(e.into()),
            None => Ok(()),
        }
    })
}

/// Frees a string returned by this library; null is ignored.
///
/// # Safety
/// `s` must be null or a string returned by [`fr_run`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}
