//! C interface to `rcs-core`.
//!
//! Every function returns an [`RcsStatus`]; results come back through out
//! pointers. Objects are opaque and must be released with their `_free`
//! function. After a failure, [`rcs_last_error_message`] describes it on the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rcs_core::config::ScenarioConfig;
use rcs_core::cost::{retrieval_cost, CostTable};
use rcs_core::report::ReportBundle;
use rcs_core::solver::expected_transform_requests;
use rcs_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RcsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Validation = 3,
    Domain = 4,
    Capacity = 5,
    TooLarge = 6,
    Config = 7,
    Deadlock = 8,
    Io = 9,
    Serialization = 10,
    /// The requested entry does not exist.
    OutOfRange = 11,
    Panic = 12,
}

/// A parsed and validated scenario configuration.
pub struct RcsConfig(ScenarioConfig);

/// Gripper cost lookup table for one stack height.
pub struct RcsCostTable(CostTable);

/// Metrics of one simulated run.
pub struct RcsReport(ReportBundle);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &Error) -> RcsStatus {
    match e {
        Error::Validation(_) => RcsStatus::Validation,
        Error::Domain(_) => RcsStatus::Domain,
        Error::Capacity(_) => RcsStatus::Capacity,
        Error::TooLarge(_) => RcsStatus::TooLarge,
        Error::Config(_) => RcsStatus::Config,
        Error::Deadlock(_) => RcsStatus::Deadlock,
        Error::Io { .. } => RcsStatus::Io,
        Error::Serde(_) => RcsStatus::Serialization,
    }
}

/// Runs `f`, recording any error or panic.
fn guard(f: impl FnOnce() -> Result<(), (RcsStatus, String)>) -> RcsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            RcsStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            RcsStatus::Panic
        }
    }
}

fn core<T>(r: rcs_core::Result<T>) -> Result<T, (RcsStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (RcsStatus, String) {
    (RcsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn text<'a>(s: *const c_char, what: &str) -> Result<&'a str, (RcsStatus, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| (RcsStatus::InvalidUtf8, format!("{what}: {e}")))
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn rcs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rcs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a TOML configuration.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rcs_config_parse(toml: *const c_char, out: *mut *mut RcsConfig) -> RcsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let cfg = core(ScenarioConfig::parse(text(toml, "toml")?))?;
        *out = Box::into_raw(Box::new(RcsConfig(cfg)));
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from [`rcs_config_parse`] or be null.
#[no_mangle]
pub unsafe extern "C" fn rcs_config_free(cfg: *mut RcsConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Builds the cost table for stacks of `height` cells.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rcs_cost_table_new(height: usize, out: *mut *mut RcsCostTable) -> RcsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let t = core(CostTable::build(height))?;
        *out = Box::into_raw(Box::new(RcsCostTable(t)));
        Ok(())
    })
}

/// Placement cost `T(empty_level, layer)`; `OUT_OF_RANGE` where undefined.
///
/// # Safety
/// `table` must be a live table and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rcs_cost_table_get(
    table: *const RcsCostTable,
    empty_level: usize,
    layer: usize,
    out: *mut u64,
) -> RcsStatus {
    guard(|| {
        let t = table.as_ref().ok_or_else(|| null("table"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let v = t.0.get(empty_level, layer).ok_or_else(|| {
            (
                RcsStatus::OutOfRange,
                format!("no entry for empty level {empty_level}, layer {layer}"),
            )
        })?;
        *out = v;
        Ok(())
    })
}

/// Total gripper cost of retrieving a bin at `layer`.
///
/// # Safety
/// `table` must be a live table and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rcs_retrieval_cost(
    table: *const RcsCostTable,
    empty_level: usize,
    layer: usize,
    out: *mut u64,
) -> RcsStatus {
    guard(|| {
        let t = table.as_ref().ok_or_else(|| null("table"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = core(retrieval_cost(layer, empty_level, &t.0))?;
        Ok(())
    })
}

/// # Safety
/// `table` must come from [`rcs_cost_table_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn rcs_cost_table_free(table: *mut RcsCostTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Expected requests until each of `n` bins with popularities `p` has been
/// requested once. Writes infinity when any entry is zero.
///
/// # Safety
/// `p` must point to `n` doubles (or be null with `n == 0`); `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rcs_expected_transform_requests(p: *const f64, n: usize, out: *mut f64) -> RcsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let slice = if n == 0 {
            &[][..]
        } else if p.is_null() {
            return Err(null("p"));
        } else {
            std::slice::from_raw_parts(p, n)
        };
        *out = core(expected_transform_requests(slice))?;
        Ok(())
    })
}

/// Simulates the configuration's first run.
///
/// # Safety
/// `cfg` must be a live configuration and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rcs_simulate(cfg: *const RcsConfig, out: *mut *mut RcsReport) -> RcsStatus {
    guard(|| {
        let c = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let sc = core(c.0.primary())?;
        let log = core(rcs_core::sim::run(&sc))?;
        *out = Box::into_raw(Box::new(RcsReport(ReportBundle::from_log(&log, &sc))));
        Ok(())
    })
}

/// Mean retrieval time in seconds over requests that needed a robot.
///
/// # Safety
/// `report` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rcs_report_mean_retrieval(report: *const RcsReport, out: *mut f64) -> RcsStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = r.0.summary.mean_retrieval;
        Ok(())
    })
}

/// Number of requests served.
///
/// # Safety
/// `report` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rcs_report_requests(report: *const RcsReport, out: *mut u64) -> RcsStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = r.0.summary.requests;
        Ok(())
    })
}

/// The run summary as a JSON object. Release it with [`rcs_string_free`].
///
/// # Safety
/// `report` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rcs_report_summary_json(report: *const RcsReport, out: *mut *mut c_char) -> RcsStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let json = serde_json::to_string(&r.0.summary)
            .map_err(|e| (RcsStatus::Serialization, e.to_string()))?;
        *out = CString::new(json)
            .map_err(|e| (RcsStatus::Serialization, e.to_string()))?
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `report` must come from [`rcs_simulate`] or be null.
#[no_mangle]
pub unsafe extern "C" fn rcs_report_free(report: *mut RcsReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn rcs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
