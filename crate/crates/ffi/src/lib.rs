//! C ABI over the statistics and random-forest parts of `transit-fuse`.
//!
//! Every fallible function returns a [`TfStatus`]; on failure the message is
//! kept per thread and can be read with [`tf_last_error`]. Matrices are
//! row-major `n_rows * n_cols` doubles. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use transit_fuse::coverage::gini;
use transit_fuse::fusion::{Forest, Hyperparameters};
use transit_fuse::model::{haversine_km, LatLon};
use transit_fuse::stats::{pearson, spearman};
use transit_fuse::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    InvariantViolation = 3,
    Panic = 4,
}

/// Opaque fitted forest.
pub struct TfForest {
    inner: Forest,
    n_features: usize,
}

/// Forest settings. `max_depth` and `mtry` of 0 mean "unset".
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TfForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub mtry: usize,
    pub bootstrap: bool,
}

/// Pairwise correlation.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TfCorrelation {
    pub coefficient: f64,
    pub p_value: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(e: Error) -> TfStatus {
    let status = if e.is_input_error() {
        TfStatus::InvalidInput
    } else {
        TfStatus::InvariantViolation
    };
    set_error(e.to_string());
    status
}

fn null(what: &str) -> TfStatus {
    set_error(format!("null pointer: {what}"));
    TfStatus::NullPointer
}

/// Runs `f`, turning panics into [`TfStatus::Panic`].
fn guard<F: FnOnce() -> TfStatus>(f: F) -> TfStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            TfStatus::Panic
        }
    }
}

/// # Safety
/// `ptr` must be null or point to `len` readable doubles.
unsafe fn slice<'a>(ptr: *const f64, len: usize) -> Option<&'a [f64]> {
    if len == 0 {
        Some(&[])
    } else if ptr.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(ptr, len))
    }
}

fn rows(flat: &[f64], n_cols: usize) -> Vec<Vec<f64>> {
    flat.chunks(n_cols).map(<[f64]>::to_vec).collect()
}

/// Message of the last failure on this thread, or null. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn tf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Great-circle distance in kilometres.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tf_haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64, out: *mut f64) -> TfStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        match (LatLon::new(lat1, lon1), LatLon::new(lat2, lon2)) {
            (Ok(a), Ok(b)) => {
                *out = haversine_km(a, b);
                TfStatus::Ok
            }
            (Err(e), _) | (_, Err(e)) => fail(e),
        }
    })
}

/// Gini coefficient of non-negative values.
///
/// # Safety
/// `values` must point to `len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tf_gini(values: *const f64, len: usize, out: *mut f64) -> TfStatus {
    guard(|| {
        let Some(v) = slice(values, len) else {
            return null("values");
        };
        if out.is_null() {
            return null("out");
        }
        match gini(v) {
            Ok(g) => {
                *out = g;
                TfStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

unsafe fn correlate(
    f: fn(&[f64], &[f64]) -> transit_fuse::Result<transit_fuse::stats::Correlation>,
    x: *const f64,
    y: *const f64,
    len: usize,
    out: *mut TfCorrelation,
) -> TfStatus {
    guard(|| {
        let (Some(x), Some(y)) = (slice(x, len), slice(y, len)) else {
            return null("x or y");
        };
        if out.is_null() {
            return null("out");
        }
        match f(x, y) {
            Ok(c) => {
                *out = TfCorrelation {
                    coefficient: c.coefficient,
                    p_value: c.p_value,
                };
                TfStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Spearman rank correlation with average ranks for ties.
///
/// # Safety
/// `x` and `y` must point to `len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tf_spearman(x: *const f64, y: *const f64, len: usize, out: *mut TfCorrelation) -> TfStatus {
    correlate(spearman, x, y, len, out)
}

/// Pearson correlation.
///
/// # Safety
/// `x` and `y` must point to `len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tf_pearson(x: *const f64, y: *const f64, len: usize, out: *mut TfCorrelation) -> TfStatus {
    correlate(pearson, x, y, len, out)
}

/// Library defaults.
#[no_mangle]
pub extern "C" fn tf_forest_params_default() -> TfForestParams {
    let d = Hyperparameters::default();
    TfForestParams {
        n_trees: d.n_trees,
        max_depth: d.max_depth.unwrap_or(0),
        min_leaf: d.min_leaf,
        mtry: d.mtry.unwrap_or(0),
        bootstrap: d.bootstrap,
    }
}

/// Fits a regression forest. On success `*out` owns a handle to release
/// with [`tf_forest_free`].
///
/// # Safety
/// `x` must point to `n_rows * n_cols` doubles, `y` to `n_rows`; `params`
/// and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tf_forest_fit(
    x: *const f64,
    y: *const f64,
    n_rows: usize,
    n_cols: usize,
    params: *const TfForestParams,
    seed: u64,
    out: *mut *mut TfForest,
) -> TfStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        *out = ptr::null_mut();
        if params.is_null() {
            return null("params");
        }
        if n_cols == 0 {
            set_error("a forest needs at least one feature".into());
            return TfStatus::InvalidInput;
        }
        let Some(len) = n_rows.checked_mul(n_cols) else {
            set_error("matrix size overflows".into());
            return TfStatus::InvalidInput;
        };
        let (Some(xs), Some(ys)) = (slice(x, len), slice(y, n_rows)) else {
            return null("x or y");
        };
        let p = &*params;
        let hp = Hyperparameters {
            n_trees: p.n_trees,
            max_depth: (p.max_depth > 0).then_some(p.max_depth),
            min_leaf: p.min_leaf,
            mtry: (p.mtry > 0).then_some(p.mtry),
            bootstrap: p.bootstrap,
        };
        match Forest::fit(&rows(xs, n_cols), ys, &hp, seed) {
            Ok(f) => {
                *out = Box::into_raw(Box::new(TfForest {
                    inner: f,
                    n_features: n_cols,
                }));
                TfStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Predicts `n_rows` rows into `out`.
///
/// # Safety
/// `forest` must come from [`tf_forest_fit`]; `x` must point to
/// `n_rows * n_cols` doubles and `out` to `n_rows` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tf_forest_predict(
    forest: *const TfForest,
    x: *const f64,
    n_rows: usize,
    n_cols: usize,
    out: *mut f64,
) -> TfStatus {
    guard(|| {
        if forest.is_null() {
            return null("forest");
        }
        let f = &*forest;
        if n_cols != f.n_features {
            set_error(format!("expected {} features, got {n_cols}", f.n_features));
            return TfStatus::InvalidInput;
        }
        let Some(len) = n_rows.checked_mul(n_cols) else {
            set_error("matrix size overflows".into());
            return TfStatus::InvalidInput;
        };
        let Some(xs) = slice(x, len) else { return null("x") };
        if n_rows > 0 && out.is_null() {
            return null("out");
        }
        match f.inner.predict(&rows(xs, n_cols)) {
            Ok(pred) => {
                if n_rows > 0 {
                    std::slice::from_raw_parts_mut(out, n_rows).copy_from_slice(&pred);
                }
                TfStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Out-of-bag R² on the training data the forest was fitted to.
///
/// # Safety
/// As for [`tf_forest_fit`]; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tf_forest_oob_r_squared(
    forest: *const TfForest,
    x: *const f64,
    y: *const f64,
    n_rows: usize,
    n_cols: usize,
    out: *mut f64,
) -> TfStatus {
    guard(|| {
        if forest.is_null() || out.is_null() {
            return null("forest or out");
        }
        let f = &*forest;
        if n_cols != f.n_features {
            set_error(format!("expected {} features, got {n_cols}", f.n_features));
            return TfStatus::InvalidInput;
        }
        let Some(len) = n_rows.checked_mul(n_cols) else {
            set_error("matrix size overflows".into());
            return TfStatus::InvalidInput;
        };
        let (Some(xs), Some(ys)) = (slice(x, len), slice(y, n_rows)) else {
            return null("x or y");
        };
        match f.inner.oob_r_squared(&rows(xs, n_cols), ys) {
            Ok(r2) => {
                *out = r2;
                TfStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Releases a forest. Null is a no-op.
///
/// # Safety
/// `forest` must come from [`tf_forest_fit`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tf_forest_free(forest: *mut TfForest) {
    if !forest.is_null() {
        drop(Box::from_raw(forest));
    }
}
