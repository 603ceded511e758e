//! C interface to scsar.
//!
//! Objects cross the boundary as opaque handles created by `*_new` style
//! functions and released with the matching `*_free`. Fallible calls return a
//! [`ScsarStatus`]; the message of the most recent failure on the calling
//! thread is available from [`scsar_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use nalgebra::DMatrix;
use scsar::concentration::{gini_grouped, GroupedDistribution};
use scsar::engine::{self, EngineConfig, FitResult};
use scsar::io::Report;
use scsar::likelihood::{self, FitOptions, ModelFamily};
use scsar::weights::UnitIndexMap;
use scsar::{Dataset, Error, SpatialWeights};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScsarStatus {
    Ok = 0,
    NullPointer = 1,
    /// Shapes, indices, graph or configuration rejected.
    InvalidInput = 2,
    /// Estimation failed (rank deficiency, variance floor, parameter range).
    Numerical = 3,
    /// Grouped data has too few farms or zero output.
    Degenerate = 4,
    Io = 5,
    /// A Rust panic was caught at the boundary.
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScsarFamily {
    Ols = 0,
    Sar = 1,
    Sem = 2,
    Slx = 3,
}

impl From<ScsarFamily> for ModelFamily {
    fn from(f: ScsarFamily) -> Self {
        match f {
            ScsarFamily::Ols => ModelFamily::Ols,
            ScsarFamily::Sar => ModelFamily::Sar,
            ScsarFamily::Sem => ModelFamily::Sem,
            ScsarFamily::Slx => ModelFamily::Slx,
        }
    }
}

/// Neighbourhood graph.
pub struct ScsarWeights(SpatialWeights);

/// Response, design matrix and coordinates.
pub struct ScsarDataset(Dataset);

/// A fitted partition with its report.
pub struct ScsarResult {
    fit: FitResult,
    report: Report,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ScsarStatus {
    match e {
        Error::RankDeficientDesign { .. }
        | Error::MinVariance(_)
        | Error::SingularHessian
        | Error::SpatialParamOutOfRange { .. } => ScsarStatus::Numerical,
        Error::TooFewFarms(_) | Error::ZeroTotalOutput => ScsarStatus::Degenerate,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => ScsarStatus::Io,
        _ => ScsarStatus::InvalidInput,
    }
}

fn fail(status: ScsarStatus, msg: impl Into<String>) -> ScsarStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, recording errors and panics.
fn guard(f: impl FnOnce() -> Result<(), ScsarStatus>) -> ScsarStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ScsarStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(ScsarStatus::Panic, format!("Panic: {msg}"))
        }
    }
}

fn core<T>(r: scsar::Result<T>) -> Result<T, ScsarStatus> {
    r.map_err(|e| fail(status_of(&e), format!("{}: {e}", e.code())))
}

fn nonnull<T>(p: *const T) -> Result<(), ScsarStatus> {
    if p.is_null() {
        Err(fail(ScsarStatus::NullPointer, "NullPointer: required pointer argument is null"))
    } else {
        Ok(())
    }
}

unsafe fn view<'a, T>(p: *const T, len: usize) -> Result<&'a [T], ScsarStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    nonnull(p)?;
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(out: *mut T, v: T) -> Result<(), ScsarStatus> {
    nonnull(out)?;
    *out = v;
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn scsar_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a symmetric binary graph on `n` units from `n_edges` index pairs
/// `(from[i], to[i])`. Duplicates and both orientations are accepted.
///
/// # Safety
/// `from` and `to` must each point to `n_edges` readable values; `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn scsar_weights_from_edges(
    n: usize,
    from: *const usize,
    to: *const usize,
    n_edges: usize,
    out: *mut *mut ScsarWeights,
) -> ScsarStatus {
    guard(|| {
        nonnull(out)?;
        let from = view(from, n_edges)?;
        let to = view(to, n_edges)?;
        let w = core(SpatialWeights::from_index_pairs(n, from.iter().copied().zip(to.iter().copied())))?;
        *out = Box::into_raw(Box::new(ScsarWeights(w)));
        Ok(())
    })
}

/// Rook-contiguity lattice, units numbered row-major.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn scsar_weights_lattice(rows: usize, cols: usize, out: *mut *mut ScsarWeights) -> ScsarStatus {
    guard(|| {
        nonnull(out)?;
        if rows == 0 || cols == 0 {
            return Err(fail(ScsarStatus::InvalidInput, "InvalidConfig: lattice needs rows, cols > 0"));
        }
        *out = Box::into_raw(Box::new(ScsarWeights(SpatialWeights::lattice(rows, cols))));
        Ok(())
    })
}

/// k-nearest-neighbour graph on `n` points given as `coords[2*i], coords[2*i+1]`,
/// symmetrised by union.
///
/// # Safety
/// `coords` must point to `2*n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn scsar_weights_knn(
    n: usize,
    coords: *const f64,
    k: usize,
    out: *mut *mut ScsarWeights,
) -> ScsarStatus {
    guard(|| {
        nonnull(out)?;
        let xy: Vec<[f64; 2]> = view(coords, 2 * n)?.chunks(2).map(|c| [c[0], c[1]]).collect();
        let (w, _) = core(SpatialWeights::from_knn(&xy, k))?;
        *out = Box::into_raw(Box::new(ScsarWeights(w)));
        Ok(())
    })
}

/// # Safety
/// `w` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn scsar_weights_free(w: *mut ScsarWeights) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

/// Number of units, or 0 for NULL.
///
/// # Safety
/// `w` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn scsar_weights_n(w: *const ScsarWeights) -> usize {
    w.as_ref().map_or(0, |w| w.0.n())
}

/// Number of undirected edges, or 0 for NULL.
///
/// # Safety
/// `w` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn scsar_weights_n_edges(w: *const ScsarWeights) -> usize {
    w.as_ref().map_or(0, |w| w.0.n_edges())
}

/// Dataset of `n` units and `p` covariates. `x` is row-major `n*p`,
/// `coords` holds `n` (x, y) pairs. With `add_intercept` a leading column of
/// ones is added; otherwise `x` is used as the full design. Unit ids are
/// `0..n` as strings.
///
/// # Safety
/// `y` must point to `n` doubles, `x` to `n*p`, `coords` to `2*n`; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn scsar_dataset_new(
    n: usize,
    p: usize,
    y: *const f64,
    x: *const f64,
    coords: *const f64,
    add_intercept: bool,
    out: *mut *mut ScsarDataset,
) -> ScsarStatus {
    guard(|| {
        nonnull(out)?;
        let y = view(y, n)?.to_vec();
        let x = DMatrix::from_row_slice(n, p, view(x, n * p)?);
        let xy: Vec<[f64; 2]> = view(coords, 2 * n)?.chunks(2).map(|c| [c[0], c[1]]).collect();
        let names: Vec<String> = (1..=p).map(|j| format!("x{j}")).collect();
        let index = UnitIndexMap::sequential(n);
        let d = if add_intercept {
            Dataset::with_intercept(index, xy, y, &x, names)
        } else {
            Dataset::new(index, xy, y, x, names)
        };
        *out = Box::into_raw(Box::new(ScsarDataset(core(d)?)));
        Ok(())
    })
}

/// # Safety
/// `d` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn scsar_dataset_free(d: *mut ScsarDataset) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Options for [`scsar_fit`]. Obtain defaults from [`scsar_fit_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ScsarFitOptions {
    pub family: ScsarFamily,
    pub k: usize,
    pub phi: f64,
    pub max_itr: usize,
    pub eta: f64,
    /// 0 selects the default for the family.
    pub min_cluster_size: usize,
}

#[no_mangle]
pub extern "C" fn scsar_fit_options_default() -> ScsarFitOptions {
    ScsarFitOptions {
        family: ScsarFamily::Sar,
        k: 3,
        phi: 0.5,
        max_itr: engine::DEFAULT_MAX_ITR,
        eta: engine::DEFAULT_ETA,
        min_cluster_size: 0,
    }
}

/// Fits the clustered model once per seed and keeps the run with the highest
/// penalized objective.
///
/// # Safety
/// `d` and `w` must be live handles, `seeds` must point to `n_seeds` values
/// (`n_seeds >= 1`), `opts` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn scsar_fit(
    d: *const ScsarDataset,
    w: *const ScsarWeights,
    opts: *const ScsarFitOptions,
    seeds: *const u64,
    n_seeds: usize,
    out: *mut *mut ScsarResult,
) -> ScsarStatus {
    guard(|| {
        nonnull(d)?;
        nonnull(w)?;
        nonnull(opts)?;
        nonnull(out)?;
        let (d, w, o) = (&(*d).0, &(*w).0, *opts);
        let seeds = view(seeds, n_seeds)?;
        if seeds.is_empty() {
            return Err(fail(ScsarStatus::InvalidInput, "InvalidConfig: at least one seed required"));
        }
        let mut cfg = EngineConfig::new(o.family.into(), o.k, o.phi).with_seed(seeds[0]);
        cfg.max_itr = o.max_itr;
        cfg.eta = o.eta;
        cfg.min_cluster_size = (o.min_cluster_size > 0).then_some(o.min_cluster_size);
        let fit = core(engine::run_best_of(d, w, &cfg, seeds))?;
        let pooled_opts = FitOptions {
            lenient: false,
            std_errors: true,
            slx_lag_intercept: cfg.slx_lag_intercept,
        };
        let pooled = core(likelihood::fit(cfg.family, d.y(), d.x(), w, &pooled_opts))?;
        let report = Report::new(&fit, &pooled, d);
        *out = Box::into_raw(Box::new(ScsarResult { fit, report }));
        Ok(())
    })
}

/// # Safety
/// `r` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn scsar_result_free(r: *mut ScsarResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Number of units in the result, or 0 for NULL.
///
/// # Safety
/// `r` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn scsar_result_n(r: *const ScsarResult) -> usize {
    r.as_ref().map_or(0, |r| r.fit.assignment.n())
}

/// Copies the 1-based cluster label of every unit into `labels[0..len]`.
///
/// # Safety
/// `r` must be a live handle and `labels` must point to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn scsar_result_labels(r: *const ScsarResult, labels: *mut usize, len: usize) -> ScsarStatus {
    guard(|| {
        nonnull(r)?;
        nonnull(labels)?;
        let a = &(*r).fit.assignment;
        if len != a.n() {
            return Err(fail(
                ScsarStatus::InvalidInput,
                format!("LengthMismatch: buffer holds {len}, result has {} units", a.n()),
            ));
        }
        let dst = slice::from_raw_parts_mut(labels, len);
        for (i, v) in dst.iter_mut().enumerate() {
            *v = a.label(i) + 1;
        }
        Ok(())
    })
}

/// Summary numbers of a fit.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ScsarSummary {
    pub k: usize,
    pub loglik: f64,
    pub penalized_objective: f64,
    pub aic: f64,
    pub bic: f64,
    pub iterations: usize,
    pub n_params: usize,
}

/// # Safety
/// `r` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn scsar_result_summary(r: *const ScsarResult, out: *mut ScsarSummary) -> ScsarStatus {
    guard(|| {
        nonnull(r)?;
        let f = &(*r).fit;
        write_out(
            out,
            ScsarSummary {
                k: f.assignment.k(),
                loglik: f.total_loglik,
                penalized_objective: f.penalized_objective,
                aic: f.aic,
                bic: f.bic,
                iterations: f.iterations,
                n_params: f.n_params,
            },
        )
    })
}

/// Full report as pretty-printed JSON. Release with [`scsar_string_free`].
///
/// # Safety
/// `r` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn scsar_result_to_json(r: *const ScsarResult, out: *mut *mut c_char) -> ScsarStatus {
    guard(|| {
        nonnull(r)?;
        nonnull(out)?;
        let json = core((*r).report.to_json())?;
        *out = CString::new(json).map_err(|e| fail(ScsarStatus::Io, format!("Json: {e}")))?.into_raw();
        Ok(())
    })
}

/// Plain-text coefficient table. Release with [`scsar_string_free`].
///
/// # Safety
/// `r` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn scsar_result_to_text(r: *const ScsarResult, out: *mut *mut c_char) -> ScsarStatus {
    guard(|| {
        nonnull(r)?;
        nonnull(out)?;
        let text = (*r).report.text();
        *out = CString::new(text).map_err(|e| fail(ScsarStatus::Io, format!("Io: {e}")))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn scsar_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Grouped Gini index (0-100) of `len` size classes, ascending in output
/// per farm.
///
/// # Safety
/// `counts` and `outputs` must point to `len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn scsar_gini_grouped(
    counts: *const u64,
    outputs: *const f64,
    len: usize,
    out: *mut f64,
) -> ScsarStatus {
    guard(|| {
        nonnull(out)?;
        let d = core(GroupedDistribution::from_counts("", view(counts, len)?, view(outputs, len)?))?;
        write_out(out, core(gini_grouped(&d))?)
    })
}
