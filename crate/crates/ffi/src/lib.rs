//! C interface to `graphtc`.
//!
//! Objects cross the boundary as opaque handles created by a `*_new` or
//! `*_parse` function and released by the matching `*_free`. Every fallible
//! call returns a [`GtcStatus`]; on failure the message is available from
//! [`gtc_last_error`] on the same thread. Indices are zero-based. Dense
//! tensors use the library layout: `i1` fastest, then `i2`, then `i3`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use graphtc::config::ExperimentConfig;
use graphtc::graph::DynamicGraph;
use graphtc::io::read_coo;
use graphtc::run::{run, Command};
use graphtc::solver::{solve, ObservedTensor};
use graphtc::{Error, RealTensor};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GtcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidConfig = 2,
    DataError = 3,
    NotConverged = 4,
    DimensionMismatch = 5,
    Numerical = 6,
    InvalidUtf8 = 7,
    Io = 8,
    Panic = 9,
}

impl From<&Error> for GtcStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidConfig(_) => GtcStatus::InvalidConfig,
            Error::CgNotConverged { .. } | Error::SolverNonConvergence(_) => GtcStatus::NotConverged,
            Error::DimensionMismatch(_) => GtcStatus::DimensionMismatch,
            Error::Numerical(_) | Error::ImaginaryResidue { .. } | Error::InvalidTransform(_) => GtcStatus::Numerical,
            Error::Io(_) => GtcStatus::Io,
            _ => GtcStatus::DataError,
        }
    }
}

/// Experiment and solver settings.
pub struct GtcConfig(ExperimentConfig);

/// Observed entries of a partially known tensor.
pub struct GtcObserved(ObservedTensor);

/// A dynamic graph on a fixed vertex set.
pub struct GtcGraph(DynamicGraph);

/// A dense real tensor.
pub struct GtcTensor(RealTensor);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Failure {
    Null(&'static str),
    Utf8(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `body`, converting errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> GtcStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => GtcStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            GtcStatus::NullPointer
        }
        Ok(Err(Failure::Utf8(what))) => {
            set_error(format!("{what} is not valid UTF-8"));
            GtcStatus::InvalidUtf8
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            GtcStatus::from(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            GtcStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    unsafe { p.as_ref() }.ok_or(Failure::Null(what))
}

unsafe fn borrow_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    unsafe { p.as_mut() }.ok_or(Failure::Null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    unsafe { CStr::from_ptr(p) }.to_str().map_err(|_| Failure::Utf8(what))
}

unsafe fn array<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("output handle"));
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

unsafe fn release<T>(p: *mut T) {
    if !p.is_null() {
        drop(unsafe { Box::from_raw(p) });
    }
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gtc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gtc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default settings.
///
/// # Safety
/// `out` must be a valid pointer to writable handle storage.
#[no_mangle]
pub unsafe extern "C" fn gtc_config_new(out: *mut *mut GtcConfig) -> GtcStatus {
    guard(|| unsafe { emit(out, GtcConfig(ExperimentConfig::default())) })
}

/// Parses `key = value` configuration text.
///
/// # Safety
/// `text` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gtc_config_parse(text: *const c_char, out: *mut *mut GtcConfig) -> GtcStatus {
    guard(|| unsafe {
        let cfg = ExperimentConfig::parse(text_arg(text)?)?;
        emit(out, GtcConfig(cfg))
    })
}

unsafe fn text_arg<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    unsafe { text(p, "text") }
}

/// Assigns one configuration key.
///
/// # Safety
/// `config` must come from this library; `key` and `value` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gtc_config_set(config: *mut GtcConfig, key: *const c_char, value: *const c_char) -> GtcStatus {
    guard(|| unsafe {
        let cfg = borrow_mut(config, "config")?;
        cfg.0.set(text(key, "key")?, text(value, "value")?)?;
        Ok(())
    })
}

/// Writes the resolved configuration text into a new string that must be
/// released with [`gtc_string_free`].
///
/// # Safety
/// `config` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gtc_config_to_text(config: *const GtcConfig, out: *mut *mut c_char) -> GtcStatus {
    guard(|| unsafe {
        let cfg = borrow(config, "config")?;
        if out.is_null() {
            return Err(Failure::Null("output string"));
        }
        *out = CString::new(cfg.0.to_text()).unwrap_or_default().into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn gtc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// # Safety
/// `config` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn gtc_config_free(config: *mut GtcConfig) {
    unsafe { release(config) }
}

/// Observed entries from `count` index triples (`3 * count` values, laid out
/// `i1 i2 i3` per entry) and `count` values.
///
/// # Safety
/// `indices` must hold `3 * count` values and `values` `count` values.
#[no_mangle]
pub unsafe extern "C" fn gtc_observed_new(
    n1: usize,
    n2: usize,
    n3: usize,
    indices: *const usize,
    values: *const f64,
    count: usize,
    out: *mut *mut GtcObserved,
) -> GtcStatus {
    guard(|| unsafe {
        let idx = array(indices, count.checked_mul(3).ok_or(Failure::Null("indices"))?, "indices")?;
        let vals = array(values, count, "values")?;
        let entries: Vec<_> = idx.chunks_exact(3).zip(vals).map(|(t, &v)| (t[0], t[1], t[2], v)).collect();
        emit(out, GtcObserved(ObservedTensor::new((n1, n2, n3), &entries)?))
    })
}

/// Observed entries from COO text (header `n1 n2 n3`, one-based lines).
///
/// # Safety
/// `text` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gtc_observed_from_coo(text: *const c_char, out: *mut *mut GtcObserved) -> GtcStatus {
    guard(|| unsafe { emit(out, GtcObserved(read_coo(text_arg(text)?)?)) })
}

/// Dimensions and number of observed entries.
///
/// # Safety
/// `observed` must come from this library; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn gtc_observed_shape(
    observed: *const GtcObserved,
    n1: *mut usize,
    n2: *mut usize,
    n3: *mut usize,
    count: *mut usize,
) -> GtcStatus {
    guard(|| unsafe {
        let o = &borrow(observed, "observed")?.0;
        let (a, b, c) = o.dims();
        for (p, v) in [(n1, a), (n2, b), (n3, c), (count, o.len())] {
            *borrow_mut(p, "shape output")? = v;
        }
        Ok(())
    })
}

/// # Safety
/// `observed` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn gtc_observed_free(observed: *mut GtcObserved) {
    unsafe { release(observed) }
}

/// Graph on `vertices` vertices over `periods` periods from `count` edge
/// events (`3 * count` values, laid out `i j t` per event).
///
/// # Safety
/// `events` must hold `3 * count` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gtc_graph_new(
    vertices: usize,
    periods: usize,
    events: *const usize,
    count: usize,
    out: *mut *mut GtcGraph,
) -> GtcStatus {
    guard(|| unsafe {
        let ev = array(events, count.checked_mul(3).ok_or(Failure::Null("events"))?, "events")?;
        let one_based = |v: usize| v.checked_add(1).ok_or_else(|| Failure::Lib(Error::InvalidGraph("index overflow".into())));
        let triples = ev
            .chunks_exact(3)
            .map(|t| Ok((one_based(t[0])?, one_based(t[1])?, one_based(t[2])?)))
            .collect::<Result<Vec<_>, Failure>>()?;
        emit(out, GtcGraph(DynamicGraph::from_edge_events(&triples, vertices, periods)?))
    })
}

/// # Safety
/// `graph` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn gtc_graph_free(graph: *mut GtcGraph) {
    unsafe { release(graph) }
}

/// Completes `observed` with the solver settings of `config`. Either graph may
/// be null. `iterations` may be null.
///
/// # Safety
/// Handles must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gtc_complete(
    config: *const GtcConfig,
    observed: *const GtcObserved,
    graph_w: *const GtcGraph,
    graph_h: *const GtcGraph,
    out: *mut *mut GtcTensor,
    iterations: *mut usize,
) -> GtcStatus {
    guard(|| unsafe {
        let cfg = borrow(config, "config")?;
        let obs = borrow(observed, "observed")?;
        let g_w = graph_w.as_ref().map(|g| &g.0);
        let g_h = graph_h.as_ref().map(|g| &g.0);
        let solver = graphtc::solver::SolverConfig {
            seed: cfg.0.seed,
            ..cfg.0.solver.clone()
        };
        let (completed, diag) = solve(&obs.0, g_w, g_h, &solver)?;
        if let Some(it) = iterations.as_mut() {
            *it = diag.iterations();
        }
        emit(out, GtcTensor(completed))
    })
}

/// Dimensions of a dense tensor.
///
/// # Safety
/// `tensor` must come from this library; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn gtc_tensor_dims(tensor: *const GtcTensor, n1: *mut usize, n2: *mut usize, n3: *mut usize) -> GtcStatus {
    guard(|| unsafe {
        let (a, b, c) = borrow(tensor, "tensor")?.0.dims();
        for (p, v) in [(n1, a), (n2, b), (n3, c)] {
            *borrow_mut(p, "dims output")? = v;
        }
        Ok(())
    })
}

/// Copies the entries into `buffer`, which must hold `n1 * n2 * n3` values.
///
/// # Safety
/// `buffer` must be writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn gtc_tensor_copy(tensor: *const GtcTensor, buffer: *mut f64, len: usize) -> GtcStatus {
    guard(|| unsafe {
        let t = &borrow(tensor, "tensor")?.0;
        if len != t.len() {
            return Err(Error::DimensionMismatch(format!("buffer holds {len} values, tensor has {}", t.len())).into());
        }
        if buffer.is_null() {
            return Err(Failure::Null("buffer"));
        }
        ptr::copy_nonoverlapping(t.as_slice().as_ptr(), buffer, len);
        Ok(())
    })
}

/// # Safety
/// `tensor` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn gtc_tensor_free(tensor: *mut GtcTensor) {
    unsafe { release(tensor) }
}

/// Runs an experiment command such as `"complete"` or `"theory-check"` and
/// writes its result files into `out_dir`.
///
/// # Safety
/// Strings must be NUL-terminated; `config` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn gtc_run(command: *const c_char, config: *const GtcConfig, out_dir: *const c_char) -> GtcStatus {
    guard(|| unsafe {
        let command: Command = text(command, "command")?.parse()?;
        let cfg = borrow(config, "config")?;
        run(command, &cfg.0, Path::new(text(out_dir, "out_dir")?))?;
        Ok(())
    })
}
