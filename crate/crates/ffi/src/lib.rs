//! C ABI for mechcheck.
//!
//! Scenarios and reports are opaque handles owned by the caller and released
//! with their `_free` functions. Every entry point returns an [`McStatus`];
//! on failure [`mc_last_error`] describes the problem. Strings returned to
//! the caller are released with [`mc_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use mechcheck::checker::{self, CheckConfig, CheckReport, GeneralGrid, Mode, TruthGrid, Verdict};
use mechcheck::document::{self, ReportFile};
use mechcheck::ratio;
use mechcheck::rsm::Rsm;
use mechcheck::vcg::PaymentRule;
use mechcheck::{Error, Scenario};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McStatus {
    Ok = 0,
    /// Null pointer, invalid UTF-8, unknown label or bad option.
    InvalidArgument = 1,
    ParseError = 2,
    ValidationError = 3,
    BudgetExceeded = 4,
    IoError = 5,
    /// A Rust panic was caught at the boundary.
    Internal = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McProperty {
    DistPreserve = 0,
    StageChain = 1,
    Bic = 2,
    /// VCG on the scenario's own types, outcomes and valuations.
    VcgTruth = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McVerdict {
    Pass = 0,
    Fail = 1,
    Estimated = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct McOptions {
    /// Non-zero selects Monte Carlo mode.
    pub monte_carlo: u8,
    pub samples: u64,
    pub seed: u64,
    pub jobs: u32,
    pub budget: u64,
    /// Non-zero replaces Clarke payments by first-price payments.
    pub first_price: u8,
}

pub struct McScenario {
    scenario: Scenario,
    source: Vec<u8>,
}

pub struct McReport {
    file: ReportFile,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    let c = CString::new(msg).expect("interior nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: McStatus, msg: impl Into<String>) -> McStatus {
    set_error(msg);
    status
}

fn from_error(e: &Error) -> McStatus {
    let status = match e {
        Error::Parse { .. } => McStatus::ParseError,
        Error::Validation { .. } | Error::BadMass(_) | Error::EmptySupport => McStatus::ValidationError,
        Error::BudgetExceeded { .. } => McStatus::BudgetExceeded,
        _ => McStatus::InvalidArgument,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> McStatus) -> McStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(McStatus::Internal, format!("internal error: {msg}"))
        }
    }
}

/// # Safety
/// `s` must be null or point to a nul-terminated string.
unsafe fn text<'a>(s: *const c_char, what: &str) -> Result<&'a str, McStatus> {
    if s.is_null() {
        return Err(fail(McStatus::InvalidArgument, format!("{what} is null")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(McStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message for the most recent failure on this thread, or null. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn mc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn mc_options_default() -> McOptions {
    let cfg = CheckConfig::default();
    McOptions {
        monte_carlo: 0,
        samples: cfg.samples,
        seed: cfg.seed,
        jobs: cfg.jobs as u32,
        budget: cfg.budget as u64,
        first_price: 0,
    }
}

fn scenario_from_bytes(bytes: Vec<u8>, out: *mut *mut McScenario) -> McStatus {
    let Ok(text) = std::str::from_utf8(&bytes) else {
        return fail(McStatus::InvalidArgument, "scenario is not UTF-8");
    };
    match document::parse_scenario_str(text) {
        Ok(scenario) => {
            let handle = Box::new(McScenario {
                scenario,
                source: bytes,
            });
            // SAFETY: caller guarantees `out` is valid for writes; checked non-null.
            unsafe { *out = Box::into_raw(handle) };
            McStatus::Ok
        }
        Err(e) => from_error(&e),
    }
}

/// Parses a scenario document. On success `*out` receives a handle to
/// release with [`mc_scenario_free`].
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mc_scenario_from_json(json: *const c_char, out: *mut *mut McScenario) -> McStatus {
    guard(|| {
        if out.is_null() {
            return fail(McStatus::InvalidArgument, "out is null");
        }
        match text(json, "json") {
            Ok(s) => scenario_from_bytes(s.as_bytes().to_vec(), out),
            Err(status) => status,
        }
    })
}

/// Reads and parses a scenario file.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mc_scenario_from_path(path: *const c_char, out: *mut *mut McScenario) -> McStatus {
    guard(|| {
        if out.is_null() {
            return fail(McStatus::InvalidArgument, "out is null");
        }
        let path = match text(path, "path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        match std::fs::read(Path::new(path)) {
            Ok(bytes) => scenario_from_bytes(bytes, out),
            Err(e) => fail(McStatus::IoError, format!("cannot read {path}: {e}")),
        }
    })
}

/// # Safety
/// `scenario` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mc_scenario_free(scenario: *mut McScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

fn config(opts: &McOptions) -> Result<CheckConfig, McStatus> {
    let cfg = CheckConfig {
        mode: if opts.monte_carlo != 0 { Mode::MonteCarlo } else { Mode::Exact },
        samples: opts.samples,
        seed: opts.seed,
        jobs: opts.jobs as usize,
        budget: opts.budget as u128,
        ..CheckConfig::default()
    };
    cfg.validate().map_err(|e| fail(McStatus::InvalidArgument, e.to_string()))?;
    Ok(cfg)
}

fn rule(opts: &McOptions) -> PaymentRule {
    if opts.first_price != 0 {
        PaymentRule::FirstPrice
    } else {
        PaymentRule::Clarke
    }
}

fn run_check(sc: &Scenario, property: McProperty, cfg: &CheckConfig, rule: PaymentRule) -> Result<CheckReport, Error> {
    match property {
        McProperty::DistPreserve => checker::check_dist_preservation(sc, cfg),
        McProperty::StageChain => checker::check_stage_chain(sc, cfg),
        McProperty::Bic => checker::check_bic_with(sc, cfg, rule),
        McProperty::VcgTruth => Ok(checker::check_vcg_truth(
            &TruthGrid::General(GeneralGrid::from_scenario(sc, rule)),
            cfg,
        )),
    }
}

/// Runs one property check. `options` may be null for the defaults. On
/// success `*out` receives a report handle to release with
/// [`mc_report_free`]; a violated property is still `MC_STATUS_OK`, read the
/// verdict with [`mc_report_verdict`].
///
/// # Safety
/// `scenario` must be a live handle, `options` null or valid, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn mc_check(
    scenario: *const McScenario,
    property: McProperty,
    options: *const McOptions,
    out: *mut *mut McReport,
) -> McStatus {
    guard(|| {
        if scenario.is_null() || out.is_null() {
            return fail(McStatus::InvalidArgument, "scenario or out is null");
        }
        let handle = &*scenario;
        let opts = if options.is_null() { mc_options_default() } else { *options };
        let cfg = match config(&opts) {
            Ok(c) => c,
            Err(status) => return status,
        };
        let rule = rule(&opts);
        if property == McProperty::VcgTruth && cfg.mode == Mode::MonteCarlo {
            return fail(McStatus::InvalidArgument, "VCG checks run in exact mode only");
        }
        match run_check(&handle.scenario, property, &cfg, rule) {
            Ok(report) => {
                let mut file = ReportFile::new(report, &handle.source);
                file.settings.insert(
                    "mode".into(),
                    if cfg.mode == Mode::Exact { "exact" } else { "mc" }.into(),
                );
                if cfg.mode == Mode::MonteCarlo {
                    file.settings.insert("samples".into(), cfg.samples.to_string());
                    file.settings.insert("seed".into(), cfg.seed.to_string());
                }
                if rule != PaymentRule::Clarke {
                    file.settings.insert("payment".into(), rule.name().into());
                }
                *out = Box::into_raw(Box::new(McReport { file }));
                McStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mc_report_verdict(report: *const McReport) -> McVerdict {
    match (*report).file.report.verdict {
        Verdict::Pass => McVerdict::Pass,
        Verdict::Fail => McVerdict::Fail,
        Verdict::Estimated => McVerdict::Estimated,
    }
}

/// Number of violating instances found.
///
/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mc_report_violations(report: *const McReport) -> u64 {
    (*report).file.report.stats.violations
}

/// The report as JSON (same format as the command line). Release with
/// [`mc_string_free`]. Returns null on a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mc_report_to_json(report: *const McReport) -> *mut c_char {
    if report.is_null() {
        set_error("report is null");
        return ptr::null_mut();
    }
    into_c_string((*report).file.to_json())
}

/// # Safety
/// `report` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mc_report_free(report: *mut McReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Exact expected RSM utility of the agent at 1-based position `agent`
/// with type `true_type` bidding `bid`. `*out` receives the rational as a
/// string (`"p/q"` or an integer); release it with [`mc_string_free`].
///
/// # Safety
/// `scenario` must be a live handle, the labels nul-terminated strings and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mc_my_util(
    scenario: *const McScenario,
    agent: usize,
    true_type: *const c_char,
    bid: *const c_char,
    budget: u64,
    out: *mut *mut c_char,
) -> McStatus {
    guard(|| {
        if scenario.is_null() || out.is_null() {
            return fail(McStatus::InvalidArgument, "scenario or out is null");
        }
        let sc = &(*scenario).scenario;
        let label = |p: *const c_char, what: &str| -> Result<mechcheck::AgentType, McStatus> {
            let s = text(p, what)?;
            sc.type_by_label(s)
                .ok_or_else(|| fail(McStatus::InvalidArgument, format!("unknown type {s:?}")))
        };
        let (t, b) = match (label(true_type, "true_type"), label(bid, "bid")) {
            (Ok(t), Ok(b)) => (t, b),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        if agent == 0 || agent > sc.n {
            return fail(McStatus::InvalidArgument, format!("agent must lie in 1..={}", sc.n));
        }
        let cfg = CheckConfig {
            budget: budget as u128,
            ..CheckConfig::default()
        };
        let value = checker::check_budget(checker::dist_cost(sc) * sc.n as u128, &cfg)
            .and_then(|_| sc.rotate_to_front(agent))
            .and_then(|rotated| Rsm::new(rotated).my_util(t, b));
        match value {
            Ok(v) => {
                *out = into_c_string(ratio::format(&v));
                McStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// # Safety
/// `s` must be null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
