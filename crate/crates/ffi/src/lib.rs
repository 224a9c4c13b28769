//! C interface to `randtri`.
//!
//! Objects cross the boundary as opaque handles that the caller frees with
//! the matching `*_free` function. Every fallible call returns a
//! [`RandtriStatus`]; on failure the message is available from
//! [`randtri_last_error`] on the same thread. Output buffers are never
//! written past their stated capacity; functions with a `needed` parameter
//! report the full result length through it even when the buffer is short.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use randtri::convergence::sot_error;
use randtri::ensembles::{make_t, sample_x, EnsembleSpec, Scale, SeedPolicy, TriMatrix};
use randtri::funcspace::{conjugate_action, l2_dist, volterra, GridFunction};
use randtri::moments::{ones_block_decomposition_check, trace_power_t};
use randtri::spectra::{singular_values, volterra_reference};
use randtri::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RandtriStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    GridMismatch = 4,
    Overflow = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Ensemble description.
pub struct RandtriEnsemble(EnsembleSpec);

/// Dense lower-triangular matrix.
pub struct RandtriMatrix(TriMatrix);

/// Piecewise polynomial on a uniform grid of `[0, 1]`.
pub struct RandtriGrid(GridFunction);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RandtriScale {
    OneOverN = 0,
    PiOverN = 1,
    /// Entries multiplied by a caller-supplied constant.
    Custom = 2,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> RandtriStatus {
    match e {
        Error::Dimension { .. } => RandtriStatus::Dimension,
        Error::GridMismatch { .. } => RandtriStatus::GridMismatch,
        Error::Overflow { .. } | Error::RefinementTooLarge(_) => RandtriStatus::Overflow,
        _ => RandtriStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), RandtriStatus>) -> RandtriStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RandtriStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            RandtriStatus::Panic
        }
    }
}

fn fail(e: Error) -> RandtriStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null(what: &str) -> RandtriStatus {
    set_error(format!("{what} is null"));
    RandtriStatus::NullPointer
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, RandtriStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), RandtriStatus> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put<T>(out: *mut T, value: T) -> Result<(), RandtriStatus> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = value;
    Ok(())
}

/// Copies `values` into `buf[..cap]`, writing the full length to `needed`.
unsafe fn fill(values: &[f64], buf: *mut f64, cap: usize, needed: *mut usize) -> Result<(), RandtriStatus> {
    if !needed.is_null() {
        *needed = values.len();
    }
    if cap < values.len() {
        set_error(format!("buffer holds {cap} values, {} needed", values.len()));
        return Err(RandtriStatus::BufferTooSmall);
    }
    if values.is_empty() {
        return Ok(());
    }
    if buf.is_null() {
        return Err(null("buf"));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    Ok(())
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `cap - 1` bytes) and returns its full length in bytes.
#[no_mangle]
pub unsafe extern "C" fn randtri_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

#[no_mangle]
pub unsafe extern "C" fn randtri_ensemble_gaussian(
    mean: f64,
    stddev: f64,
    out: *mut *mut RandtriEnsemble,
) -> RandtriStatus {
    guard(|| new_ensemble(EnsembleSpec::gaussian(mean, stddev), out))
}

/// Zero/one entries with `P(1) = p`.
#[no_mangle]
pub unsafe extern "C" fn randtri_ensemble_bernoulli(p: f64, out: *mut *mut RandtriEnsemble) -> RandtriStatus {
    guard(|| new_ensemble(EnsembleSpec::bernoulli(p), out))
}

/// Entries `1/δ` with probability `δ = N^(-d)`.
#[no_mangle]
pub unsafe extern "C" fn randtri_ensemble_sparse_bernoulli(d: f64, out: *mut *mut RandtriEnsemble) -> RandtriStatus {
    guard(|| new_ensemble(EnsembleSpec::sparse_bernoulli(d), out))
}

#[no_mangle]
pub unsafe extern "C" fn randtri_ensemble_constant(value: f64, out: *mut *mut RandtriEnsemble) -> RandtriStatus {
    guard(|| new_ensemble(EnsembleSpec::constant(value), out))
}

unsafe fn new_ensemble(spec: EnsembleSpec, out: *mut *mut RandtriEnsemble) -> Result<(), RandtriStatus> {
    spec.validate().map_err(fail)?;
    emit(out, RandtriEnsemble(spec))
}

/// `factor` is used only with [`RandtriScale::Custom`].
#[no_mangle]
pub unsafe extern "C" fn randtri_ensemble_set_scale(
    ens: *mut RandtriEnsemble,
    scale: RandtriScale,
    factor: f64,
) -> RandtriStatus {
    guard(|| {
        let ens = ens.as_mut().ok_or_else(|| null("ensemble"))?;
        let scale = match scale {
            RandtriScale::OneOverN => Scale::OneOverN,
            RandtriScale::PiOverN => Scale::PiOverN,
            RandtriScale::Custom => Scale::Custom(factor),
        };
        let spec = ens.0.clone().with_scale(scale);
        spec.validate().map_err(fail)?;
        ens.0 = spec;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn randtri_ensemble_free(ens: *mut RandtriEnsemble) {
    if !ens.is_null() {
        drop(Box::from_raw(ens));
    }
}

/// The deterministic matrix `T_N` (lower entries `1/N`).
#[no_mangle]
pub unsafe extern "C" fn randtri_make_t(n: usize, out: *mut *mut RandtriMatrix) -> RandtriStatus {
    guard(|| emit(out, RandtriMatrix(make_t(n).map_err(fail)?)))
}

/// One sample of `X_N`, reproducible from `(master_seed, trial)`.
#[no_mangle]
pub unsafe extern "C" fn randtri_sample_x(
    ens: *const RandtriEnsemble,
    n: usize,
    master_seed: u64,
    trial: u64,
    out: *mut *mut RandtriMatrix,
) -> RandtriStatus {
    guard(|| {
        let ens = deref(ens, "ensemble")?;
        let x = sample_x(&ens.0, n, SeedPolicy::new(master_seed, trial)).map_err(fail)?;
        emit(out, RandtriMatrix(x))
    })
}

#[no_mangle]
pub unsafe extern "C" fn randtri_matrix_free(m: *mut RandtriMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Matrix dimension, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn randtri_matrix_dim(m: *const RandtriMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.n())
}

/// Row-major entries (`n²` values).
#[no_mangle]
pub unsafe extern "C" fn randtri_matrix_entries(
    m: *const RandtriMatrix,
    buf: *mut f64,
    cap: usize,
    needed: *mut usize,
) -> RandtriStatus {
    guard(|| fill(deref(m, "matrix")?.0.entries(), buf, cap, needed))
}

/// Singular values in descending order (`n` values).
#[no_mangle]
pub unsafe extern "C" fn randtri_singular_values(
    m: *const RandtriMatrix,
    buf: *mut f64,
    cap: usize,
    needed: *mut usize,
) -> RandtriStatus {
    guard(|| {
        let m = deref(m, "matrix")?;
        if !needed.is_null() {
            *needed = m.0.n();
        }
        if cap < m.0.n() {
            set_error(format!("buffer holds {cap} values, {} needed", m.0.n()));
            return Err(RandtriStatus::BufferTooSmall);
        }
        fill(&singular_values(&m.0).values, buf, cap, needed)
    })
}

/// `2/(π(2k+1))` for `k = 0..count`.
#[no_mangle]
pub unsafe extern "C" fn randtri_volterra_reference(count: usize, buf: *mut f64, cap: usize) -> RandtriStatus {
    guard(|| fill(&volterra_reference(count).map_err(fail)?, buf, cap, ptr::null_mut()))
}

/// Exact `Tr((N²T*T)^pow)` with its lower and upper bounds. Returns
/// `Overflow` when any of the three does not fit in 64 bits.
#[no_mangle]
pub unsafe extern "C" fn randtri_trace_power_t(
    n: usize,
    pow: u32,
    lower: *mut u64,
    exact: *mut u64,
    upper: *mut u64,
) -> RandtriStatus {
    guard(|| {
        let r = trace_power_t(n, pow).map_err(fail)?;
        let (l, e, u) = (to_u64(&r.lower)?, to_u64(&r.exact)?, to_u64(&r.upper)?);
        put(lower, l)?;
        put(exact, e)?;
        put(upper, u)
    })
}

fn to_u64<T>(x: &T) -> Result<u64, RandtriStatus>
where
    T: std::fmt::Display,
    for<'a> u64: TryFrom<&'a T>,
{
    u64::try_from(x).map_err(|_| {
        set_error(format!("{x} does not fit in 64 bits"));
        RandtriStatus::Overflow
    })
}

/// Whether `N²T*T` equals the sum of the leading all-ones blocks.
#[no_mangle]
pub unsafe extern "C" fn randtri_ones_block_check(n: usize, holds: *mut bool) -> RandtriStatus {
    guard(|| put(holds, ones_block_decomposition_check(n).map_err(fail)?))
}

/// Piecewise-constant function with the given cell values.
#[no_mangle]
pub unsafe extern "C" fn randtri_grid_piecewise_constant(
    values: *const f64,
    cells: usize,
    out: *mut *mut RandtriGrid,
) -> RandtriStatus {
    guard(|| {
        if values.is_null() {
            return Err(null("values"));
        }
        let v = std::slice::from_raw_parts(values, cells);
        emit(out, RandtriGrid(GridFunction::piecewise_constant(v).map_err(fail)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn randtri_grid_constant(cells: usize, value: f64, out: *mut *mut RandtriGrid) -> RandtriStatus {
    guard(|| emit(out, RandtriGrid(GridFunction::constant(cells, value).map_err(fail)?)))
}

#[no_mangle]
pub unsafe extern "C" fn randtri_grid_free(g: *mut RandtriGrid) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

#[no_mangle]
pub unsafe extern "C" fn randtri_grid_cells(g: *const RandtriGrid) -> usize {
    g.as_ref().map_or(0, |g| g.0.cells())
}

#[no_mangle]
pub unsafe extern "C" fn randtri_grid_norm(g: *const RandtriGrid, out: *mut f64) -> RandtriStatus {
    guard(|| put(out, deref(g, "grid")?.0.norm()))
}

/// `‖W_N M W_N* f − V f‖₂` for a matrix `M` of size `N` dividing the grid.
#[no_mangle]
pub unsafe extern "C" fn randtri_riemann_error(
    m: *const RandtriMatrix,
    f: *const RandtriGrid,
    out: *mut f64,
) -> RandtriStatus {
    guard(|| {
        let (m, f) = (deref(m, "matrix")?, deref(f, "grid")?);
        let lhs = conjugate_action(&m.0, &f.0).map_err(fail)?;
        let rhs = volterra(&f.0).map_err(fail)?;
        put(out, l2_dist(&lhs, &rhs).map_err(fail)?)
    })
}

/// SOT error `‖W_N X_N W_N* u − μ V u‖₂` of one sample.
#[no_mangle]
pub unsafe extern "C" fn randtri_sot_error(
    ens: *const RandtriEnsemble,
    n: usize,
    u: *const RandtriGrid,
    master_seed: u64,
    trial: u64,
    out: *mut f64,
) -> RandtriStatus {
    guard(|| {
        let (ens, u) = (deref(ens, "ensemble")?, deref(u, "grid")?);
        put(out, sot_error(&ens.0, n, &u.0, SeedPolicy::new(master_seed, trial)).map_err(fail)?)
    })
}
