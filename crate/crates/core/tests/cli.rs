use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mechcheck::document::ReportFile;

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn mechcheck(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mechcheck"))
        .args(args)
        .env_remove("MECHCHECK_JOBS")
        .output()
        .expect("binary runs")
}

fn scenario(name: &str) -> String {
    corpus().join(name).to_string_lossy().into_owned()
}

/// `<input>.<property>[.<payment>].json` -> command line.
fn golden_args(file: &str) -> Vec<String> {
    let stem = file.trim_end_matches(".json");
    let parts: Vec<&str> = stem.split('.').collect();
    let (input, property) = (parts[0], parts[1]);
    let mut args = vec!["check".to_string(), property.to_string()];
    let plain = corpus().join(format!("{input}.json"));
    if plain.exists() {
        args.extend(["--scenario".into(), plain.to_string_lossy().into_owned()]);
    } else {
        args.extend(["--grid".into(), scenario(&format!("{input}.grid.json"))]);
    }
    if let Some(payment) = parts.get(2) {
        args.extend(["--payment".into(), payment.to_string()]);
    }
    args.extend(["--output".into(), "json".into()]);
    args
}

#[test]
fn reports_match_goldens() {
    let mut seen = 0;
    for entry in std::fs::read_dir(corpus().join("golden")).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let args = golden_args(&name);
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = mechcheck(&refs);
        let expected = std::fs::read_to_string(&path).unwrap();
        let actual = String::from_utf8(out.stdout).unwrap();
        assert_eq!(actual, expected, "golden mismatch for {name}");
        let report = ReportFile::from_json(&actual).unwrap();
        let want = if report.report.passed() { 0 } else { 1 };
        assert_eq!(out.status.code(), Some(want), "{name}");
        seen += 1;
    }
    assert!(seen >= 8);
}

#[test]
fn truthful_rsm_instance_passes() {
    let out = mechcheck(&["check", "bic", "--scenario", &scenario("two_type.json"), "--mode", "exact"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("bic: PASS"));
}

#[test]
fn first_price_grid_exits_one_with_witnesses() {
    let out = mechcheck(&[
        "check",
        "vcg-truth",
        "--grid",
        &scenario("first_price.grid.json"),
        "--output",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let report = ReportFile::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert!(!report.report.witnesses.is_empty());
    assert_eq!(report.settings["payment"], "first-price");
}

#[test]
fn payment_flag_turns_second_price_into_a_control() {
    let grid = scenario("second_price.grid.json");
    assert_eq!(mechcheck(&["check", "vcg-truth", "--grid", &grid]).status.code(), Some(0));
    let out = mechcheck(&["check", "vcg-truth", "--grid", &grid, "--payment", "first-price"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn budget_breach_exits_three() {
    let out = mechcheck(&["check", "bic", "--scenario", &scenario("big.json"), "--mode", "exact", "--budget", "10"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("budget"));
    // The default budget is also too small for this one.
    let out = mechcheck(&["check", "bic", "--scenario", &scenario("big.json")]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bad_documents_exit_two_with_key_paths() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(corpus().join("two_type.json"))
        .unwrap()
        .replace("\"v2\": \"1/2\"", "\"v2\": \"2/5\"");
    let path = dir.path().join("bad.json");
    std::fs::write(&path, text).unwrap();
    let p = path.to_string_lossy();
    for args in [
        vec!["validate", "--scenario", p.as_ref()],
        vec!["check", "bic", "--scenario", p.as_ref()],
    ] {
        let out = mechcheck(&args);
        assert_eq!(out.status.code(), Some(2));
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains("`prior`") && err.contains("9/10"), "{err}");
    }
    std::fs::write(&path, "{\"agents\": 1,").unwrap();
    assert_eq!(mechcheck(&["validate", "--scenario", p.as_ref()]).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(mechcheck(&["check", "no-such-property"]).status.code(), Some(2));
    assert_eq!(mechcheck(&["check", "bic"]).status.code(), Some(2));
    let grid = scenario("second_price.grid.json");
    assert_eq!(
        mechcheck(&["check", "vcg-truth", "--grid", &grid, "--mode", "mc"]).status.code(),
        Some(2)
    );
    let out = Command::new(env!("CARGO_BIN_EXE_mechcheck"))
        .args(["check", "bic", "--scenario", &scenario("two_type.json")])
        .env("MECHCHECK_JOBS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validate_accepts_the_whole_corpus() {
    for entry in std::fs::read_dir(corpus()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().map_or(true, |e| e != "json") {
            continue;
        }
        let flag = if path.to_string_lossy().ends_with(".grid.json") { "--grid" } else { "--scenario" };
        let out = mechcheck(&["validate", flag, &path.to_string_lossy()]);
        assert_eq!(out.status.code(), Some(0), "{}", path.display());
    }
}

#[test]
fn jobs_env_override_keeps_reports_identical() {
    let args = ["check", "stage-chain", "--scenario", &scenario("three_type.json"), "--output", "json"];
    let one = mechcheck(&args);
    let many = Command::new(env!("CARGO_BIN_EXE_mechcheck"))
        .args(args)
        .env("MECHCHECK_JOBS", "4")
        .output()
        .unwrap();
    assert_eq!(one.stdout, many.stdout);
}

#[test]
fn eval_util_prints_exact_values() {
    let sc = scenario("two_type.json");
    let out = mechcheck(&["eval", "util", "--scenario", &sc, "--true-type", "v2", "--bid", "v2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("my_util(agent=1, true_type=v2, bid=v2) = "));
    assert!(!text.contains('.'), "{text}");

    let out = mechcheck(&[
        "eval", "util", "--scenario", &sc, "--true-type", "v2", "--bid", "v1", "--agent", "2", "--mode", "mc",
        "--samples", "2000", "--seed", "4", "--output", "json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["agent"], 2);
    assert!(v["radius"].as_str().unwrap().contains('/'));
}

#[test]
fn out_flag_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = mechcheck(&[
        "check",
        "dist-preserve",
        "--scenario",
        &scenario("skewed_prior.json"),
        "--output",
        "json",
        "--out",
        &path.to_string_lossy(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let golden = std::fs::read_to_string(corpus().join("golden/skewed_prior.dist-preserve.json")).unwrap();
    assert_eq!(std::fs::read_to_string(path).unwrap(), golden);
}

#[test]
fn monte_carlo_reports_are_seed_stable() {
    let args = [
        "check", "bic", "--scenario", &scenario("two_type.json"), "--mode", "mc", "--samples", "3000", "--seed", "9",
        "--output", "json",
    ];
    let a = mechcheck(&args);
    let b = mechcheck(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let report = ReportFile::from_json(&String::from_utf8(a.stdout).unwrap()).unwrap();
    assert_eq!(report.report.stats.estimates.len(), 8);
}
