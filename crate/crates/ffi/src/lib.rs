//! C ABI for the modsolver library.
//!
//! Exposes parsing, solving and case conversion behind opaque handles with
//! integer status codes so other languages can bind. Strings returned by
//! this library are owned by the caller and must be released with
//! [`ms_string_free`]; handles with their matching `_free` functions.
//!
//! The header `include/modsolver.h` is generated by cbindgen at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::ptr;

use modsolver::ast::ReportLevel;
use modsolver::engine::{run_document, RunOptions};
use modsolver::error::Severity;
use modsolver::matpower::{emit_model, load_config, parse_case, ConvertOptions};
use modsolver::report::{emit_report, trace_csv, RunReport};
use modsolver::ModelDocument;

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsStatus {
    Ok = 0,
    /// Lexical or syntax error.
    ParseError = 1,
    /// The document parsed but validation found errors.
    ValidationError = 2,
    /// The run finished without reaching convergence.
    NotConverged = 3,
    /// Runtime failure (evaluation, limit cycling, solver breakdown).
    RuntimeError = 4,
    /// Case file or converter configuration error.
    InputError = 5,
    /// Null pointer or malformed UTF-8 argument.
    BadArgument = 6,
}

/// Report detail levels, mirroring the model-language attribute.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsReportLevel {
    Solved = 0,
    All = 1,
    AllDetails = 2,
}

impl From<MsReportLevel> for ReportLevel {
    fn from(level: MsReportLevel) -> Self {
        match level {
            MsReportLevel::Solved => ReportLevel::Solved,
            MsReportLevel::All => ReportLevel::All,
            MsReportLevel::AllDetails => ReportLevel::AllDetails,
        }
    }
}

/// Opaque parsed-and-validated model handle.
pub struct MsModel {
    doc: ModelDocument,
}

/// Opaque run-report handle.
pub struct MsReport {
    report: RunReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let message = message.into();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(message).ok();
    });
}

fn clear_error() {
    LAST_ERROR.with(|slot| {
        slot.borrow_mut().take();
    });
}

/// # Safety
/// `s` must be a valid NUL-terminated string or null.
unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, MsStatus> {
    if s.is_null() {
        set_error("null pointer argument");
        return Err(MsStatus::BadArgument);
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        set_error("argument is not valid UTF-8");
        MsStatus::BadArgument
    })
}

fn give_string(s: String) -> *mut c_char {
    match CString::new(s) {
        Ok(c) => c.into_raw(),
        Err(_) => ptr::null_mut(),
    }
}

/// Message describing the most recent failure on this thread, or null.
/// The caller owns the returned string.
#[no_mangle]
pub extern "C" fn ms_last_error() -> *mut c_char {
    LAST_ERROR.with(|slot| match slot.borrow().as_ref() {
        Some(msg) => give_string(msg.to_string_lossy().into_owned()),
        None => ptr::null_mut(),
    })
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must be a pointer previously returned by this library and not yet
/// freed, or null.
#[no_mangle]
pub unsafe extern "C" fn ms_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse and validate a model file. On success writes a handle to
/// `out_model`; the caller releases it with [`ms_model_free`].
///
/// # Safety
/// `source` must be a valid NUL-terminated string; `out_model` must be a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ms_model_parse(
    source: *const c_char,
    out_model: *mut *mut MsModel,
) -> MsStatus {
    clear_error();
    if out_model.is_null() {
        set_error("null output pointer");
        return MsStatus::BadArgument;
    }
    *out_model = ptr::null_mut();
    let text = match read_str(source) {
        Ok(t) => t,
        Err(status) => return status,
    };
    let doc = match modsolver::parse_source(text) {
        Ok(doc) => doc,
        Err(e) => {
            set_error(e.to_string());
            return MsStatus::ParseError;
        }
    };
    let diags = modsolver::validate_document(&doc);
    if diags.iter().any(|d| d.severity == Severity::Error) {
        let joined: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
        set_error(joined.join("\n"));
        return MsStatus::ValidationError;
    }
    *out_model = Box::into_raw(Box::new(MsModel { doc }));
    MsStatus::Ok
}

/// # Safety
/// `model` must be a handle from [`ms_model_parse`], not yet freed, or null.
#[no_mangle]
pub unsafe extern "C" fn ms_model_free(model: *mut MsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Run a parsed model with the given random seed. On success (including a
/// non-converged but orderly run) writes a report handle to `out_report`.
///
/// # Safety
/// `model` must be a live handle from [`ms_model_parse`]; `out_report` must
/// be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ms_model_run(
    model: *const MsModel,
    seed: u64,
    out_report: *mut *mut MsReport,
) -> MsStatus {
    clear_error();
    if model.is_null() || out_report.is_null() {
        set_error("null pointer argument");
        return MsStatus::BadArgument;
    }
    *out_report = ptr::null_mut();
    let opts = RunOptions {
        seed,
        report_override: None,
    };
    match run_document(&(*model).doc, &opts) {
        Ok(report) => {
            let converged = report.converged();
            *out_report = Box::into_raw(Box::new(MsReport { report }));
            if converged {
                MsStatus::Ok
            } else {
                set_error("run finished without convergence");
                MsStatus::NotConverged
            }
        }
        Err(e) => {
            set_error(e.to_string());
            MsStatus::RuntimeError
        }
    }
}

/// # Safety
/// `report` must be a handle from [`ms_model_run`], not yet freed, or null.
#[no_mangle]
pub unsafe extern "C" fn ms_report_free(report: *mut MsReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `report` must be a live handle from [`ms_model_run`] or null.
#[no_mangle]
pub unsafe extern "C" fn ms_report_converged(report: *const MsReport) -> bool {
    !report.is_null() && (*report).report.converged()
}

/// Iterations of the final solve, or 0 when nothing ran.
///
/// # Safety
/// `report` must be a live handle from [`ms_model_run`] or null.
#[no_mangle]
pub unsafe extern "C" fn ms_report_iterations(report: *const MsReport) -> u64 {
    if report.is_null() {
        return 0;
    }
    (*report)
        .report
        .last()
        .and_then(|r| r.outcome.as_ref())
        .map(|o| o.iterations() as u64)
        .unwrap_or(0)
}

/// Number of repeat records in the run.
///
/// # Safety
/// `report` must be a live handle from [`ms_model_run`] or null.
#[no_mangle]
pub unsafe extern "C" fn ms_report_records(report: *const MsReport) -> u64 {
    if report.is_null() {
        return 0;
    }
    (*report).report.records.len() as u64
}

/// Render the report at a detail level. The caller owns the string.
///
/// # Safety
/// `report` must be a live handle from [`ms_model_run`].
#[no_mangle]
pub unsafe extern "C" fn ms_report_text(
    report: *const MsReport,
    level: MsReportLevel,
) -> *mut c_char {
    if report.is_null() {
        return ptr::null_mut();
    }
    give_string(emit_report(&(*report).report, level.into()))
}

/// Comma-delimited repeats trace, or null when the model has no Repeats
/// group. The caller owns the string.
///
/// # Safety
/// `report` must be a live handle from [`ms_model_run`].
#[no_mangle]
pub unsafe extern "C" fn ms_report_trace_csv(report: *const MsReport) -> *mut c_char {
    if report.is_null() {
        return ptr::null_mut();
    }
    match trace_csv(&(*report).report) {
        Some(csv) => give_string(csv),
        None => ptr::null_mut(),
    }
}

/// Convert a MATPOWER case file into model text. `config_source` may be
/// null for defaults. On success writes the model text to `out_text`.
///
/// # Safety
/// `case_source` must be a valid NUL-terminated string; `config_source`
/// must be valid or null; `out_text` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ms_convert_case(
    case_source: *const c_char,
    config_source: *const c_char,
    out_text: *mut *mut c_char,
) -> MsStatus {
    clear_error();
    if out_text.is_null() {
        set_error("null output pointer");
        return MsStatus::BadArgument;
    }
    *out_text = ptr::null_mut();
    let case_text = match read_str(case_source) {
        Ok(t) => t,
        Err(status) => return status,
    };
    let options = if config_source.is_null() {
        ConvertOptions::default()
    } else {
        let config_text = match read_str(config_source) {
            Ok(t) => t,
            Err(status) => return status,
        };
        match load_config(config_text) {
            Ok(o) => o,
            Err(e) => {
                set_error(e.to_string());
                return MsStatus::InputError;
            }
        }
    };
    let case = match parse_case(case_text) {
        Ok(c) => c,
        Err(e) => {
            set_error(e.to_string());
            return MsStatus::InputError;
        }
    };
    match emit_model(&case, &options) {
        Ok(text) => {
            *out_text = give_string(text);
            MsStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            MsStatus::InputError
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    fn cstr(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    unsafe fn take_string(ptr: *mut c_char) -> String {
        assert!(!ptr.is_null());
        let s = CStr::from_ptr(ptr).to_string_lossy().into_owned();
        ms_string_free(ptr);
        s
    }

    const MODEL: &str = "Header: end\nModel [type=NL domain=real eps=1e-10]:\nVars [out=true]: x=1\nNLEs: x^2 = 4\nend";

    #[test]
    fn parse_run_report_roundtrip() {
        unsafe {
            let src = cstr(MODEL);
            let mut model: *mut MsModel = ptr::null_mut();
            assert_eq!(ms_model_parse(src.as_ptr(), &mut model), MsStatus::Ok);
            assert!(!model.is_null());

            let mut report: *mut MsReport = ptr::null_mut();
            assert_eq!(ms_model_run(model, 0, &mut report), MsStatus::Ok);
            assert!(ms_report_converged(report));
            assert!(ms_report_iterations(report) >= 1);
            assert_eq!(ms_report_records(report), 1);

            let text = take_string(ms_report_text(report, MsReportLevel::Solved));
            assert!(text.contains("x = 2"), "{text}");
            assert!(ms_report_trace_csv(report).is_null());

            ms_report_free(report);
            ms_model_free(model);
        }
    }

    #[test]
    fn parse_error_reports_status_and_message() {
        unsafe {
            let src = cstr("Model: NLEs: x end");
            let mut model: *mut MsModel = ptr::null_mut();
            assert_eq!(
                ms_model_parse(src.as_ptr(), &mut model),
                MsStatus::ParseError
            );
            assert!(model.is_null());
            let msg = take_string(ms_last_error());
            assert!(msg.contains("Header"), "{msg}");
        }
    }

    #[test]
    fn validation_error_status() {
        unsafe {
            let src = cstr("Header: end\nModel:\nVars: x=1; y=1\nNLEs: x=1\nend");
            let mut model: *mut MsModel = ptr::null_mut();
            assert_eq!(
                ms_model_parse(src.as_ptr(), &mut model),
                MsStatus::ValidationError
            );
            let msg = take_string(ms_last_error());
            assert!(msg.contains("not square"), "{msg}");
        }
    }

    #[test]
    fn non_convergence_status_with_report() {
        unsafe {
            let src =
                cstr("Header: maxIter=5 end\nModel:\nVars: x=0.7 [out=true]\nNLEs: x^2 = -1\nend");
            let mut model: *mut MsModel = ptr::null_mut();
            assert_eq!(ms_model_parse(src.as_ptr(), &mut model), MsStatus::Ok);
            let mut report: *mut MsReport = ptr::null_mut();
            assert_eq!(ms_model_run(model, 0, &mut report), MsStatus::NotConverged);
            assert!(!report.is_null());
            assert!(!ms_report_converged(report));
            ms_report_free(report);
            ms_model_free(model);
        }
    }

    #[test]
    fn convert_case_to_model_text() {
        unsafe {
            let case = cstr(
                "function mpc = two\nmpc.baseMVA = 100;\nmpc.bus = [\n1 3 0 0 0 0 1 1 0 230 1 1.1 0.9;\n2 1 50 20 0 0 1 1 0 230 1 1.1 0.9;\n];\nmpc.gen = [\n1 0 0 300 -300 1.0 100 1 250 10;\n];\nmpc.branch = [\n1 2 0.01 0.1 0.02 250 250 250 0 0 1 -360 360;\n];\n",
            );
            let config = cstr("<config><options><format>complex</format></options></config>");
            let mut text: *mut c_char = ptr::null_mut();
            assert_eq!(
                ms_convert_case(case.as_ptr(), config.as_ptr(), &mut text),
                MsStatus::Ok
            );
            let model_text = take_string(text);
            assert!(model_text.contains("domain=cplx"), "{model_text}");
            // The emitted model parses and runs through the same ABI.
            let src = cstr(&model_text);
            let mut model: *mut MsModel = ptr::null_mut();
            assert_eq!(ms_model_parse(src.as_ptr(), &mut model), MsStatus::Ok);
            let mut report: *mut MsReport = ptr::null_mut();
            assert_eq!(ms_model_run(model, 0, &mut report), MsStatus::Ok);
            ms_report_free(report);
            ms_model_free(model);
        }
    }

    #[test]
    fn null_arguments_are_bad_arguments() {
        unsafe {
            let mut model: *mut MsModel = ptr::null_mut();
            assert_eq!(
                ms_model_parse(ptr::null(), &mut model),
                MsStatus::BadArgument
            );
            let mut report: *mut MsReport = ptr::null_mut();
            assert_eq!(
                ms_model_run(ptr::null(), 0, &mut report),
                MsStatus::BadArgument
            );
            ms_string_free(ptr::null_mut());
            ms_model_free(ptr::null_mut());
            ms_report_free(ptr::null_mut());
        }
    }
}
