use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use mechcheck_ffi::*;

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/scenarios")
}

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = mc_last_error();
    if p.is_null() {
        return String::new();
    }
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn load(name: &str) -> *mut McScenario {
    let path = c(corpus().join(name).to_str().unwrap());
    let mut sc = ptr::null_mut();
    assert_eq!(unsafe { mc_scenario_from_path(path.as_ptr(), &mut sc) }, McStatus::Ok, "{}", last_error());
    assert!(!sc.is_null());
    sc
}

fn take_string(s: *mut std::os::raw::c_char) -> String {
    assert!(!s.is_null());
    let text = unsafe { CStr::from_ptr(s) }.to_string_lossy().into_owned();
    unsafe { mc_string_free(s) };
    text
}

fn check(sc: *const McScenario, property: McProperty, opts: &McOptions) -> (McStatus, *mut McReport) {
    let mut report = ptr::null_mut();
    let status = unsafe { mc_check(sc, property, opts, &mut report) };
    (status, report)
}

#[test]
fn bic_report_matches_the_command_line_golden() {
    let sc = load("two_type.json");
    let (status, report) = check(sc, McProperty::Bic, &mc_options_default());
    assert_eq!(status, McStatus::Ok);
    unsafe {
        assert_eq!(mc_report_verdict(report), McVerdict::Pass);
        assert_eq!(mc_report_violations(report), 0);
        let json = take_string(mc_report_to_json(report));
        let golden = std::fs::read_to_string(corpus().join("golden/two_type.bic.json")).unwrap();
        assert_eq!(json, golden);
        mc_report_free(report);
        mc_scenario_free(sc);
    }
}

#[test]
fn first_price_payments_fail_bic() {
    let sc = load("two_type.json");
    let opts = McOptions {
        first_price: 1,
        ..mc_options_default()
    };
    let (status, report) = check(sc, McProperty::Bic, &opts);
    assert_eq!(status, McStatus::Ok);
    unsafe {
        assert_eq!(mc_report_verdict(report), McVerdict::Fail);
        assert!(mc_report_violations(report) > 0);
        let json = take_string(mc_report_to_json(report));
        let golden = std::fs::read_to_string(corpus().join("golden/two_type.bic.first-price.json")).unwrap();
        assert_eq!(json, golden);
        mc_report_free(report);
        mc_scenario_free(sc);
    }
}

#[test]
fn monte_carlo_reports_are_estimated() {
    let sc = load("two_type.json");
    let opts = McOptions {
        monte_carlo: 1,
        samples: 2_000,
        seed: 5,
        ..mc_options_default()
    };
    let (status, report) = check(sc, McProperty::Bic, &opts);
    assert_eq!(status, McStatus::Ok);
    unsafe {
        assert_eq!(mc_report_verdict(report), McVerdict::Estimated);
        mc_report_free(report);
    }
    // VCG checks are exact only.
    let (status, report) = check(sc, McProperty::VcgTruth, &opts);
    assert_eq!(status, McStatus::InvalidArgument);
    assert!(report.is_null());
    unsafe { mc_scenario_free(sc) };
}

#[test]
fn stage_chain_flags_slot_sensitive_program() {
    let sc = load("slot_sensitive.json");
    let (status, report) = check(sc, McProperty::StageChain, &mc_options_default());
    assert_eq!(status, McStatus::Ok);
    unsafe {
        let json = take_string(mc_report_to_json(report));
        let golden = std::fs::read_to_string(corpus().join("golden/slot_sensitive.stage-chain.json")).unwrap();
        assert_eq!(json, golden);
        mc_report_free(report);
        mc_scenario_free(sc);
    }
}

#[test]
fn budget_breach_is_reported() {
    let sc = load("two_type.json");
    let opts = McOptions {
        budget: 10,
        ..mc_options_default()
    };
    let (status, report) = check(sc, McProperty::Bic, &opts);
    assert_eq!(status, McStatus::BudgetExceeded);
    assert!(report.is_null());
    assert!(last_error().contains("budget"), "{}", last_error());

    let (t, b) = (c("v2"), c("v2"));
    let mut out = ptr::null_mut();
    let status = unsafe { mc_my_util(sc, 1, t.as_ptr(), b.as_ptr(), 10, &mut out) };
    assert_eq!(status, McStatus::BudgetExceeded);
    assert!(out.is_null());
    unsafe { mc_scenario_free(sc) };
}

#[test]
fn my_util_returns_an_exact_rational() {
    let sc = load("two_type.json");
    let (t, b) = (c("v2"), c("v2"));
    let mut out = ptr::null_mut();
    let status = unsafe { mc_my_util(sc, 1, t.as_ptr(), b.as_ptr(), mc_options_default().budget, &mut out) };
    assert_eq!(status, McStatus::Ok);
    assert_eq!(take_string(out), "11/8");

    let unknown = c("v9");
    let status = unsafe { mc_my_util(sc, 1, unknown.as_ptr(), b.as_ptr(), 1_000, &mut out) };
    assert_eq!(status, McStatus::InvalidArgument);
    assert!(last_error().contains("v9"));
    let status = unsafe { mc_my_util(sc, 3, t.as_ptr(), b.as_ptr(), 1_000, &mut out) };
    assert_eq!(status, McStatus::InvalidArgument);
    unsafe { mc_scenario_free(sc) };
}

#[test]
fn invalid_documents_name_the_offending_key() {
    let text = std::fs::read_to_string(corpus().join("two_type.json"))
        .unwrap()
        .replace("\"v2\": \"1/2\"", "\"v2\": \"2/5\"");
    let json = c(&text);
    let mut sc = ptr::null_mut();
    assert_eq!(unsafe { mc_scenario_from_json(json.as_ptr(), &mut sc) }, McStatus::ValidationError);
    assert!(sc.is_null());
    assert!(last_error().contains("prior"), "{}", last_error());

    let broken = c("{\"agents\": 1,");
    assert_eq!(unsafe { mc_scenario_from_json(broken.as_ptr(), &mut sc) }, McStatus::ParseError);

    let missing = c("/no/such/scenario.json");
    assert_eq!(unsafe { mc_scenario_from_path(missing.as_ptr(), &mut sc) }, McStatus::IoError);
}

#[test]
fn null_pointers_are_rejected() {
    let mut sc = ptr::null_mut();
    let mut report = ptr::null_mut();
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(mc_scenario_from_json(ptr::null(), &mut sc), McStatus::InvalidArgument);
        assert_eq!(mc_scenario_from_path(ptr::null(), &mut sc), McStatus::InvalidArgument);
        let json = c("{}");
        assert_eq!(mc_scenario_from_json(json.as_ptr(), ptr::null_mut()), McStatus::InvalidArgument);
        assert_eq!(
            mc_check(ptr::null(), McProperty::Bic, ptr::null(), &mut report),
            McStatus::InvalidArgument
        );
        assert_eq!(mc_my_util(ptr::null(), 1, ptr::null(), ptr::null(), 0, &mut s), McStatus::InvalidArgument);
        assert!(mc_report_to_json(ptr::null()).is_null());
        // Freeing null is a no-op.
        mc_scenario_free(ptr::null_mut());
        mc_report_free(ptr::null_mut());
        mc_string_free(ptr::null_mut());
    }
}

#[test]
fn null_options_mean_defaults() {
    let sc = load("skewed_prior.json");
    let mut report = ptr::null_mut();
    unsafe {
        assert_eq!(mc_check(sc, McProperty::DistPreserve, ptr::null(), &mut report), McStatus::Ok);
        assert_eq!(mc_report_verdict(report), McVerdict::Pass);
        mc_report_free(report);
        mc_scenario_free(sc);
    }
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(mc_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/mechcheck.h")).unwrap();
    for symbol in [
        "MECHCHECK_H",
        "MC_STATUS_BUDGET_EXCEEDED",
        "MC_PROPERTY_STAGE_CHAIN",
        "MC_VERDICT_ESTIMATED",
        "typedef struct McScenario McScenario",
        "typedef struct McReport McReport",
        "McOptions mc_options_default(void)",
        "mc_scenario_from_json",
        "mc_scenario_from_path",
        "mc_check",
        "mc_report_to_json",
        "mc_my_util",
        "mc_string_free",
        "mc_last_error",
    ] {
        assert!(header.contains(symbol), "header lacks {symbol}");
    }
}

/// Compiles `tests/smoke.c` against the header and the static library.
#[test]
fn c_program_links_against_the_static_library() {
    let Some(cc) = ["cc", "gcc", "clang"]
        .into_iter()
        .find(|cc| Command::new(cc).arg("--version").output().is_ok())
    else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let lib = profile_dir.join("libmechcheck_ffi.a");
    assert!(lib.exists(), "{} missing", lib.display());
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let dir = tempfile_dir();
    let bin = dir.join("smoke");
    let status = Command::new(cc)
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin).arg(corpus().join("two_type.json")).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "verdict=0 violations=0 util=11/8 json=1");
    std::fs::remove_dir_all(dir).ok();
}

fn tempfile_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("mechcheck-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
