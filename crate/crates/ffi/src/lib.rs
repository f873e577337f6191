//! C ABI for the `spenra` estimators.
//!
//! Objects cross the boundary as opaque handles created by `spenra_*_new` or
//! a computation and released with the matching `*_free`. Every fallible call
//! returns a [`SpenraStatus`]; on failure the message is available from
//! [`spenra_last_error`] on the same thread. Bandwidth arrays use table order:
//! `k0` (future) first, then lags from the most recent.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use spenra::entropy::{specific_entropy_series, time_averaged_rate, EntropyRateSeries};
use spenra::selection::{select_order, SelectionReport};
use spenra::synth::{self, Markov2Params};
use spenra::{classic, Bandwidths, Error, EstimationConfig, Series};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpenraStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    InsufficientData = 3,
    /// A numerical procedure failed (degenerate weights, quadrature or
    /// optimiser failure, no template matches, isolated vectors, ...).
    Computation = 4,
    Io = 5,
    Parse = 6,
    /// The output buffer is too small; the required length was written.
    BufferTooSmall = 7,
    Panic = 8,
}

/// A time series, optionally with event times.
pub struct SpenraSeries(Series);

/// Bandwidths and scores for every fitted order, plus the chosen order.
pub struct SpenraSelectionReport(SelectionReport);

/// Specific entropy rates of a series.
pub struct SpenraEntropySeries(EntropyRateSeries);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> SpenraStatus {
    match e {
        Error::InvalidInput(_) | Error::OrderTooLarge { .. } | Error::MissingTimestamps => SpenraStatus::InvalidInput,
        Error::TooShort { .. } | Error::InsufficientData(_) | Error::EmptyAfterLeaveOut => {
            SpenraStatus::InsufficientData
        }
        Error::Io(_) => SpenraStatus::Io,
        Error::Parse { .. } => SpenraStatus::Parse,
        _ => SpenraStatus::Computation,
    }
}

fn guard<F: FnOnce() -> Result<(), (SpenraStatus, String)>>(f: F) -> SpenraStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SpenraStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SpenraStatus::Panic
        }
    }
}

trait IntoFfi<T> {
    fn ffi(self) -> Result<T, (SpenraStatus, String)>;
}

impl<T> IntoFfi<T> for spenra::Result<T> {
    fn ffi(self) -> Result<T, (SpenraStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

fn null(what: &str) -> (SpenraStatus, String) {
    (SpenraStatus::NullPointer, format!("{what} is null"))
}

unsafe fn input<'a>(data: *const f64, len: usize, what: &str) -> Result<&'a [f64], (SpenraStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(data, len))
}

unsafe fn handle<'a, T>(h: *const T, what: &str) -> Result<&'a T, (SpenraStatus, String)> {
    h.as_ref().ok_or_else(|| null(what))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), (SpenraStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn store<T>(out: *mut T, value: T) -> Result<(), (SpenraStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = value;
    Ok(())
}

/// Copies `src` into `buf` when it fits; always reports the length in `len_out`.
unsafe fn copy_out(src: &[f64], buf: *mut f64, cap: usize, len_out: *mut usize) -> Result<(), (SpenraStatus, String)> {
    store(len_out, src.len())?;
    if src.len() > cap {
        return Err((SpenraStatus::BufferTooSmall, format!("need {} values, buffer holds {cap}", src.len())));
    }
    if !src.is_empty() {
        if buf.is_null() {
            return Err(null("buffer"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    }
    Ok(())
}

/// Message for the last failed call on this thread. Valid until the next
/// failing call on the same thread; empty when nothing has failed.
#[no_mangle]
pub extern "C" fn spenra_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn spenra_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a series from `len` values and optional event times (`times` may
/// be null).
#[no_mangle]
pub unsafe extern "C" fn spenra_series_new(
    values: *const f64,
    times: *const f64,
    len: usize,
    out: *mut *mut SpenraSeries,
) -> SpenraStatus {
    guard(|| {
        let v = input(values, len, "values")?.to_vec();
        let s = if times.is_null() {
            Series::new(v)
        } else {
            Series::with_timestamps(v, input(times, len, "times")?.to_vec())
        }
        .ffi()?;
        emit(out, SpenraSeries(s))
    })
}

/// Reads a one-column (`value`) or two-column (`time,value`) CSV file.
#[no_mangle]
pub unsafe extern "C" fn spenra_series_from_csv(path: *const c_char, out: *mut *mut SpenraSeries) -> SpenraStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let path =
            CStr::from_ptr(path).to_str().map_err(|_| (SpenraStatus::InvalidInput, "path is not UTF-8".to_string()))?;
        emit(out, SpenraSeries(Series::from_csv_path(path).ffi()?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn spenra_series_len(s: *const SpenraSeries) -> usize {
    s.as_ref().map_or(0, |s| s.0.len())
}

/// Whether the series carries event times.
#[no_mangle]
pub unsafe extern "C" fn spenra_series_has_times(s: *const SpenraSeries) -> bool {
    s.as_ref().is_some_and(|s| s.0.timestamps().is_some())
}

#[no_mangle]
pub unsafe extern "C" fn spenra_series_values(
    s: *const SpenraSeries,
    buf: *mut f64,
    cap: usize,
    len_out: *mut usize,
) -> SpenraStatus {
    guard(|| copy_out(handle(s, "series")?.0.values(), buf, cap, len_out))
}

#[no_mangle]
pub unsafe extern "C" fn spenra_series_times(
    s: *const SpenraSeries,
    buf: *mut f64,
    cap: usize,
    len_out: *mut usize,
) -> SpenraStatus {
    guard(|| {
        let ts = handle(s, "series")?
            .0
            .timestamps()
            .ok_or_else(|| (SpenraStatus::InvalidInput, Error::MissingTimestamps.to_string()))?;
        copy_out(ts, buf, cap, len_out)
    })
}

#[no_mangle]
pub unsafe extern "C" fn spenra_series_free(s: *mut SpenraSeries) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Two-state-memory Markov benchmark with default parameters, started from
/// `(x_-1, x_0) = (1, 1)`.
#[no_mangle]
pub unsafe extern "C" fn spenra_generate_markov2(n: usize, seed: u64, out: *mut *mut SpenraSeries) -> SpenraStatus {
    guard(|| emit(out, SpenraSeries(synth::gen_markov2(&Markov2Params::default(), n, seed, [1.0, 1.0]).ffi()?)))
}

/// Lorenz-driven interevent intervals (threshold 60).
#[no_mangle]
pub unsafe extern "C" fn spenra_generate_lorenz_iei(n: usize, seed: u64, out: *mut *mut SpenraSeries) -> SpenraStatus {
    guard(|| emit(out, SpenraSeries(synth::lorenz_iei(n, seed).ffi()?)))
}

/// Rössler-driven interevent intervals (threshold 125).
#[no_mangle]
pub unsafe extern "C" fn spenra_generate_rossler_iei(n: usize, seed: u64, out: *mut *mut SpenraSeries) -> SpenraStatus {
    guard(|| emit(out, SpenraSeries(synth::rossler_iei(n, seed).ffi()?)))
}

/// Lorenz, Rössler, Lorenz segments of `n_each` intervals.
#[no_mangle]
pub unsafe extern "C" fn spenra_generate_concat(n_each: usize, seed: u64, out: *mut *mut SpenraSeries) -> SpenraStatus {
    guard(|| emit(out, SpenraSeries(synth::concatenated_iei(n_each, seed).ffi()?)))
}

/// Fits bandwidths at orders `1..=max_order` and chooses an order by block
/// cross-validation with half-width `l`.
#[no_mangle]
pub unsafe extern "C" fn spenra_select_order(
    s: *const SpenraSeries,
    max_order: usize,
    l: usize,
    seed: u64,
    out: *mut *mut SpenraSelectionReport,
) -> SpenraStatus {
    guard(|| {
        let s = handle(s, "series")?;
        let config = EstimationConfig { max_order, block_half_width: l, rng_seed: seed, ..Default::default() };
        emit(out, SpenraSelectionReport(select_order(&s.0, &config).ffi()?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn spenra_report_chosen_order(r: *const SpenraSelectionReport) -> usize {
    r.as_ref().map_or(0, |r| r.0.chosen_order)
}

fn record(r: &SpenraSelectionReport, p: usize) -> Result<&spenra::selection::OrderRecord, (SpenraStatus, String)> {
    r.0.record(p).ok_or_else(|| (SpenraStatus::InvalidInput, format!("order {p} is not in the report")))
}

/// Bandwidths fitted at order `p`, in table order (`p + 1` values).
#[no_mangle]
pub unsafe extern "C" fn spenra_report_bandwidths(
    r: *const SpenraSelectionReport,
    p: usize,
    buf: *mut f64,
    cap: usize,
    len_out: *mut usize,
) -> SpenraStatus {
    guard(|| copy_out(&record(handle(r, "report")?, p)?.bandwidths.table_order(), buf, cap, len_out))
}

/// Leave-one-out and block cross-validation scores at order `p`.
#[no_mangle]
pub unsafe extern "C" fn spenra_report_scores(
    r: *const SpenraSelectionReport,
    p: usize,
    cv0: *mut f64,
    cvl: *mut f64,
) -> SpenraStatus {
    guard(|| {
        let rec = record(handle(r, "report")?, p)?;
        store(cv0, rec.cv0)?;
        store(cvl, rec.cvl)
    })
}

#[no_mangle]
pub unsafe extern "C" fn spenra_report_free(r: *mut SpenraSelectionReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Specific entropy rates with the given table-order bandwidths
/// (`order + 1` values); `abs_tol` is the quadrature tolerance.
#[no_mangle]
pub unsafe extern "C" fn spenra_estimate(
    s: *const SpenraSeries,
    bandwidths: *const f64,
    count: usize,
    abs_tol: f64,
    out: *mut *mut SpenraEntropySeries,
) -> SpenraStatus {
    guard(|| {
        let s = handle(s, "series")?;
        let k = Bandwidths::from_table_order(input(bandwidths, count, "bandwidths")?).ffi()?;
        emit(out, SpenraEntropySeries(specific_entropy_series(&s.0, &k, abs_tol).ffi()?))
    })
}

/// Specific entropy rates with the chosen order's bandwidths from `r`.
#[no_mangle]
pub unsafe extern "C" fn spenra_estimate_from_report(
    s: *const SpenraSeries,
    r: *const SpenraSelectionReport,
    abs_tol: f64,
    out: *mut *mut SpenraEntropySeries,
) -> SpenraStatus {
    guard(|| {
        let s = handle(s, "series")?;
        let k = &handle(r, "report")?.0.chosen().bandwidths;
        emit(out, SpenraEntropySeries(specific_entropy_series(&s.0, k, abs_tol).ffi()?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn spenra_entropy_len(e: *const SpenraEntropySeries) -> usize {
    e.as_ref().map_or(0, |e| e.0.len())
}

/// Entropy rates for 1-based indices `order + 1 ..= T`.
#[no_mangle]
pub unsafe extern "C" fn spenra_entropy_values(
    e: *const SpenraEntropySeries,
    buf: *mut f64,
    cap: usize,
    len_out: *mut usize,
) -> SpenraStatus {
    guard(|| copy_out(&handle(e, "entropy series")?.0.values, buf, cap, len_out))
}

#[no_mangle]
pub unsafe extern "C" fn spenra_entropy_time_averaged(e: *const SpenraEntropySeries, out: *mut f64) -> SpenraStatus {
    guard(|| store(out, time_averaged_rate(&handle(e, "entropy series")?.0).ffi()?))
}

#[no_mangle]
pub unsafe extern "C" fn spenra_entropy_free(e: *mut SpenraEntropySeries) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

unsafe fn classic_call(
    values: *const f64,
    len: usize,
    out: *mut f64,
    f: impl FnOnce(&Series) -> spenra::Result<f64>,
) -> SpenraStatus {
    guard(|| {
        let s = Series::new(input(values, len, "values")?.to_vec()).ffi()?;
        store(out, f(&s).ffi()?)
    })
}

/// Approximate Entropy at embedding `p`, tolerance `r`.
#[no_mangle]
pub unsafe extern "C" fn spenra_apen(values: *const f64, len: usize, p: usize, r: f64, out: *mut f64) -> SpenraStatus {
    classic_call(values, len, out, |s| classic::apen(s, p, r))
}

/// Sample Entropy at embedding `p`, tolerance `r`.
#[no_mangle]
pub unsafe extern "C" fn spenra_sampen(
    values: *const f64,
    len: usize,
    p: usize,
    r: f64,
    out: *mut f64,
) -> SpenraStatus {
    classic_call(values, len, out, |s| classic::sampen(s, p, r))
}

/// Mean log of the normalised uniform-kernel density at each embedding vector.
#[no_mangle]
pub unsafe extern "C" fn spenra_phi_normalized(
    values: *const f64,
    len: usize,
    p: usize,
    r: f64,
    out: *mut f64,
) -> SpenraStatus {
    classic_call(values, len, out, |s| classic::phi_normalized(s, p, r))
}

/// Leave-one-out uniform-kernel entropy rate at order `p`.
#[no_mangle]
pub unsafe extern "C" fn spenra_loo_rate(
    values: *const f64,
    len: usize,
    p: usize,
    r: f64,
    skip_isolated: bool,
    out: *mut f64,
) -> SpenraStatus {
    classic_call(values, len, out, |s| classic::loo_entropy_rate_uniform(s, p, r, skip_isolated))
}
