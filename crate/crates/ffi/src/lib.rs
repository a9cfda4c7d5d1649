//! C ABI over `nagsens`.
//!
//! Configurations and reports are opaque handles owned by the caller and
//! released with the matching `*_free` function. Every entry point returns a
//! [`NagsStatus`]; on failure the JSON error object of the most recent failed
//! call on the current thread is available through [`nags_last_error`].
//! Strings handed out by the library must be released with
//! [`nags_string_free`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use nagsens::cli::{self, Command, ConfigDocument, RunFlags, RunReport};
use nagsens::linalg::Mat;
use nagsens::quadratic::{self, QuadraticGameSpec};
use nagsens::solver;
use nagsens::Error;

/// Status codes. Values 1 to 4 match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NagsStatus {
    Ok = 0,
    Failure = 1,
    InvalidInput = 2,
    Degenerate = 3,
    NonConvergence = 4,
    NullPointer = 10,
    OutOfRange = 11,
    BufferTooSmall = 12,
    Panic = 13,
}

impl NagsStatus {
    fn kind(self) -> &'static str {
        match self {
            NagsStatus::Ok => "ok",
            NagsStatus::Failure => "failure",
            NagsStatus::InvalidInput => "invalid_input",
            NagsStatus::Degenerate => "degenerate",
            NagsStatus::NonConvergence => "non_convergence",
            NagsStatus::NullPointer => "null_pointer",
            NagsStatus::OutOfRange => "out_of_range",
            NagsStatus::BufferTooSmall => "buffer_too_small",
            NagsStatus::Panic => "panic",
        }
    }
}

/// Parsed and validated game configuration.
pub struct NagsConfig {
    doc: ConfigDocument,
    raw: Vec<u8>,
}

/// Result tables and diagnostics of one command run.
pub struct NagsReport {
    report: RunReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(value: serde_json::Value) {
    let text = CString::new(value.to_string()).unwrap_or_else(|_| c"{\"kind\":\"internal\"}".to_owned());
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

enum Failure {
    Lib(Error),
    Status(NagsStatus, String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn status_of(err: &Error) -> NagsStatus {
    match cli::exit_code(err) {
        2 => NagsStatus::InvalidInput,
        3 => NagsStatus::Degenerate,
        4 => NagsStatus::NonConvergence,
        _ => NagsStatus::Failure,
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> NagsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            NagsStatus::Ok
        }
        Ok(Err(Failure::Lib(err))) => {
            set_last_error(cli::error_object(&err));
            status_of(&err)
        }
        Ok(Err(Failure::Status(status, message))) => {
            set_last_error(serde_json::json!({ "kind": status.kind(), "message": message }));
            status
        }
        Err(_) => {
            set_last_error(serde_json::json!({ "kind": "panic", "message": "panic inside nagsens" }));
            NagsStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(NagsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|e| Failure::Status(NagsStatus::InvalidInput, format!("{what} is not UTF-8: {e}")))
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure::Status(NagsStatus::Failure, "output contains a NUL byte".into()))
}

fn new_config(text: &str, out: *mut *mut NagsConfig) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    let doc = cli::parse_config_str(text)?;
    let handle = Box::new(NagsConfig {
        doc,
        raw: text.as_bytes().to_vec(),
    });
    unsafe { *out = Box::into_raw(handle) };
    Ok(())
}

/// Parses and validates a JSON configuration document.
#[no_mangle]
pub unsafe extern "C" fn nags_config_from_json(json: *const c_char, out: *mut *mut NagsConfig) -> NagsStatus {
    guard(|| new_config(unsafe { c_str(json, "json") }?, out))
}

/// Reads, parses and validates a configuration file.
#[no_mangle]
pub unsafe extern "C" fn nags_config_from_file(path: *const c_char, out: *mut *mut NagsConfig) -> NagsStatus {
    guard(|| {
        let path = unsafe { c_str(path, "path") }?;
        let text = std::fs::read_to_string(Path::new(path)).map_err(Error::from)?;
        new_config(&text, out)
    })
}

#[no_mangle]
pub unsafe extern "C" fn nags_config_free(config: *mut NagsConfig) {
    if !config.is_null() {
        drop(unsafe { Box::from_raw(config) });
    }
}

/// Runs a command (`solve`, `certify`, `sens`, `centrality`, `target`,
/// `fj-sim`, `routing-sweep`) on a configuration.
#[no_mangle]
pub unsafe extern "C" fn nags_run(
    config: *const NagsConfig,
    command: *const c_char,
    seed: u64,
    out: *mut *mut NagsReport,
) -> NagsStatus {
    guard(|| {
        let config = unsafe { borrow(config, "config") }?;
        let name = unsafe { c_str(command, "command") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let command = Command::parse(name)
            .ok_or_else(|| Failure::Lib(Error::InvalidArgument(format!("unknown command '{name}'"))))?;
        let flags = RunFlags {
            seed,
            ..RunFlags::default()
        };
        let report = cli::run(command, &config.doc, &config.raw, &flags)?;
        unsafe { *out = Box::into_raw(Box::new(NagsReport { report })) };
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn nags_report_free(report: *mut NagsReport) {
    if !report.is_null() {
        drop(unsafe { Box::from_raw(report) });
    }
}

/// Number of tables in a report; zero for a null handle.
#[no_mangle]
pub unsafe extern "C" fn nags_report_table_count(report: *const NagsReport) -> usize {
    unsafe { report.as_ref() }.map_or(0, |r| r.report.tables.len())
}

unsafe fn table_at<'a>(report: *const NagsReport, index: usize) -> Result<&'a nagsens::cli::Table, Failure> {
    let r: &NagsReport = unsafe { borrow(report, "report") }?;
    let count = r.report.tables.len();
    r.report
        .tables
        .get(index)
        .ok_or_else(|| Failure::Status(NagsStatus::OutOfRange, format!("table {index} of {count}")))
}

#[no_mangle]
pub unsafe extern "C" fn nags_report_table_name(
    report: *const NagsReport,
    index: usize,
    out: *mut *mut c_char,
) -> NagsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let name = unsafe { table_at(report, index) }?.name.clone();
        unsafe { *out = into_c_string(name)? };
        Ok(())
    })
}

/// CSV text (CRLF line endings) of one table.
#[no_mangle]
pub unsafe extern "C" fn nags_report_table_csv(
    report: *const NagsReport,
    index: usize,
    out: *mut *mut c_char,
) -> NagsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let bytes = unsafe { table_at(report, index) }?.to_csv()?;
        let text = String::from_utf8(bytes).map_err(|e| Failure::Status(NagsStatus::Failure, e.to_string()))?;
        unsafe { *out = into_c_string(text)? };
        Ok(())
    })
}

/// The whole report as pretty-printed JSON.
#[no_mangle]
pub unsafe extern "C" fn nags_report_json(report: *const NagsReport, out: *mut *mut c_char) -> NagsStatus {
    guard(|| {
        let r = unsafe { borrow(report, "report") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let text =
            serde_json::to_string_pretty(&r.report).map_err(|e| Failure::Status(NagsStatus::Failure, e.to_string()))?;
        unsafe { *out = into_c_string(text)? };
        Ok(())
    })
}

/// Writes the report tables and JSON into `dir` as the CLI does with `--out`.
#[no_mangle]
pub unsafe extern "C" fn nags_report_write(report: *const NagsReport, dir: *const c_char) -> NagsStatus {
    guard(|| {
        let r = unsafe { borrow(report, "report") }?;
        let dir = unsafe { c_str(dir, "dir") }?;
        r.report.write(Path::new(dir), true, true)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn nags_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// JSON error object of the last failed call on this thread, or null. The
/// pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn nags_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Equilibrium of the configured game at its own parameters. `len` receives
/// the profile length; `out` may be null to query it.
#[no_mangle]
pub unsafe extern "C" fn nags_equilibrium(
    config: *const NagsConfig,
    out: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> NagsStatus {
    guard(|| {
        let config = unsafe { borrow(config, "config") }?;
        if len.is_null() {
            return Err(null("len"));
        }
        let (spec, y) = cli::game_and_params(&config.doc)?;
        let eq = solver::solve_nash(&spec, &y, &config.doc.solver_config())?;
        unsafe { *len = eq.x_star.len() };
        if out.is_null() {
            return Ok(());
        }
        write_slice(eq.x_star.as_slice(), out, capacity)
    })
}

fn write_slice(values: &[f64], out: *mut f64, capacity: usize) -> Result<(), Failure> {
    if capacity < values.len() {
        return Err(Failure::Status(
            NagsStatus::BufferTooSmall,
            format!("need {} values, buffer holds {capacity}", values.len()),
        ));
    }
    unsafe { ptr::copy_nonoverlapping(values.as_ptr(), out, values.len()) };
    Ok(())
}

unsafe fn square_matrix(p: *const f64, n: usize) -> Result<Mat, Failure> {
    if p.is_null() && n > 0 {
        return Err(null("p"));
    }
    let data = if n == 0 {
        &[][..]
    } else {
        unsafe { std::slice::from_raw_parts(p, n * n) }
    };
    Ok(Mat::from_row_slice(n, n, data))
}

/// Leontief matrix `(I − γP)⁻¹` of a row-major `n × n` network, written
/// row-major into `out` (`n²` values).
#[no_mangle]
pub unsafe extern "C" fn nags_leontief(p: *const f64, n: usize, gamma: f64, out: *mut f64) -> NagsStatus {
    guard(|| {
        let p = unsafe { square_matrix(p, n) }?;
        if out.is_null() && n > 0 {
            return Err(null("out"));
        }
        let l = quadratic::leontief(&p, gamma)?;
        let row_major: Vec<f64> = l.transpose().iter().copied().collect();
        write_slice(&row_major, out, n * n)
    })
}

/// Bonacich and key-player centralities of a linear quadratic game with
/// slope `gamma`. Each output holds `n` values.
#[no_mangle]
pub unsafe extern "C" fn nags_centrality(
    p: *const f64,
    n: usize,
    gamma: f64,
    bonacich: *mut f64,
    keyplayer: *mut f64,
) -> NagsStatus {
    guard(|| {
        let p = unsafe { square_matrix(p, n) }?;
        if (bonacich.is_null() || keyplayer.is_null()) && n > 0 {
            return Err(null("output buffer"));
        }
        let spec = QuadraticGameSpec::linear(p, gamma)?;
        let r = quadratic::centrality_report(&spec)?;
        write_slice(r.v.as_slice(), bonacich, n)?;
        write_slice(r.w.as_slice(), keyplayer, n)
    })
}

/// Response of every player to every shock when the players in `pinned`
/// (zero-based, `count` entries) are held fixed. Row-major `n × n` output.
#[no_mangle]
pub unsafe extern "C" fn nags_pinned_sensitivity(
    p: *const f64,
    n: usize,
    gamma: f64,
    pinned: *const usize,
    count: usize,
    out: *mut f64,
) -> NagsStatus {
    guard(|| {
        let p = unsafe { square_matrix(p, n) }?;
        if (pinned.is_null() && count > 0) || (out.is_null() && n > 0) {
            return Err(null("buffer"));
        }
        let pinned = if count == 0 {
            &[][..]
        } else {
            unsafe { std::slice::from_raw_parts(pinned, count) }
        };
        let l = quadratic::leontief(&p, gamma)?;
        let a = quadratic::pinning_matrix(n, pinned)?;
        let s = quadratic::constrained_shock_sensitivity(&l, gamma, &a)?;
        let row_major: Vec<f64> = s.transpose().iter().copied().collect();
        write_slice(&row_major, out, n * n)
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nags_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => c"unknown",
    };
    VERSION.as_ptr()
}
