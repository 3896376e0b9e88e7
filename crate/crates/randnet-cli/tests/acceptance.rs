//! End-to-end acceptance gate.
//!
//! Runs the complete `accept-all` suite through the compiled binary — twice,
//! with different worker counts and output directories — and checks three
//! things: every attainable criterion holds at its stated tolerance, the
//! documented honest failures are reported faithfully (a finite measured
//! metric against a stated target, verdicts consistent with the check flags,
//! exit code consistent with the overall verdict), and the reports plus all
//! emitted curve files are byte-for-byte identical across runs and worker
//! counts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

/// Criteria whose every check is expected to hold at the frozen parameters.
const FULLY_ATTAINABLE: &[u64] = &[1, 2, 3, 4, 6, 8, 9, 10];

/// Checks that cannot land inside their stated bands at the frozen sizes
/// (each carries the analysis in its note): the identity they probe is exact
/// at the origin, so its deviation is roundoff with no quadratic term (5),
/// and single-draw slopes fit past the `t ≈ √n` horizon are realization
/// noise (7).  The gate requires these to be reported, not to pass.
const HONEST_FAIL_CHECKS: &[(u64, &str)] = &[
    (5, "deviation-doubling-ratio"),
    (7, "one-sample-critical-slope"),
    (7, "slope-spread-across-laws"),
];

/// Checks inside the mixed criteria that must pass.
const MIXED_MUST_PASS: &[(u64, &str)] = &[
    (5, "small-case-agreement"),
    (7, "predicted-critical-tail"),
    (7, "geomean-slope-in-band"),
    (7, "geomean-slope-spread"),
];

/// Curve files the suite emits alongside the report.
const CURVE_FILES: &[&str] = &[
    "decay.csv",
    "decay-real-gaussian.csv",
    "decay-rademacher.csv",
    "decay-hermitian.csv",
    "autocorr.csv",
];

fn run_suite(dir: &Path, workers: u32) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_randnet"))
        .args(["accept-all", "--workers", &workers.to_string(), "--out-dir"])
        .arg(dir)
        .output()
        .expect("failed to launch the suite binary");
    let code = out.status.code();
    assert!(
        matches!(code, Some(0) | Some(1)),
        "suite with {workers} worker(s) ended abnormally (status {code:?})\nstdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr),
    );
    out
}

fn find_check<'a>(criteria: &'a [Value], index: u64, name: &str) -> &'a Value {
    criteria[(index - 1) as usize]["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|k| k["name"].as_str() == Some(name))
        .unwrap_or_else(|| panic!("criterion {index} has no check named {name:?}"))
}

#[test]
fn full_suite_verdicts_and_determinism() {
    let base: PathBuf =
        std::env::temp_dir().join(format!("randnet-acceptance-{}", std::process::id()));
    let dir1 = base.join("workers-1");
    let dir2 = base.join("workers-2");

    let out1 = run_suite(&dir1, 1);
    let out2 = run_suite(&dir2, 2);

    let raw1 = fs::read(dir1.join("report.json")).expect("first run wrote no report");
    let raw2 = fs::read(dir2.join("report.json")).expect("second run wrote no report");
    assert_eq!(raw1, raw2, "reports differ across runs / worker counts");
    for file in CURVE_FILES {
        let a = fs::read(dir1.join(file)).unwrap_or_else(|_| panic!("first run missing {file}"));
        let b = fs::read(dir2.join(file)).unwrap_or_else(|_| panic!("second run missing {file}"));
        assert_eq!(a, b, "{file} differs across runs / worker counts");
    }

    let report: Value = serde_json::from_slice(&raw1).expect("report is not valid JSON");
    let criteria = report["criteria"].as_array().expect("missing criteria");
    assert_eq!(criteria.len(), 10, "expected ten criteria");

    println!();
    let mut all_pass = true;
    for (pos, criterion) in criteria.iter().enumerate() {
        let index = criterion["index"].as_u64().expect("criterion index");
        assert_eq!(index, pos as u64 + 1, "criteria out of order");
        let name = criterion["name"].as_str().expect("criterion name");
        let pass = criterion["pass"].as_bool().expect("criterion verdict");
        all_pass &= pass;
        println!(
            "criterion {index:>2} {name:<26} {}",
            if pass { "PASS" } else { "FAIL" }
        );

        // Every check carries a finite measured metric and a stated target,
        // and the criterion verdict is exactly the conjunction of its checks.
        let checks = criterion["checks"].as_array().expect("criterion checks");
        assert!(!checks.is_empty(), "criterion {index} has no checks");
        for check in checks {
            let check_name = check["name"].as_str().expect("check name");
            let metric = check["metric"].as_f64();
            assert!(
                metric.is_some_and(f64::is_finite),
                "criterion {index} check {check_name:?} has no finite metric: {check}"
            );
            let target = check["target"].as_str().expect("check target");
            assert!(
                !target.is_empty(),
                "check {check_name:?} has an empty target"
            );
        }
        let derived = checks.iter().all(|c| c["pass"].as_bool().unwrap());
        assert_eq!(
            pass, derived,
            "criterion {index} verdict contradicts its checks"
        );
    }

    for &index in FULLY_ATTAINABLE {
        let criterion = &criteria[(index - 1) as usize];
        assert!(
            criterion["pass"].as_bool().unwrap(),
            "criterion {index} should pass at the frozen parameters:\n{}",
            serde_json::to_string_pretty(criterion).unwrap()
        );
    }
    for &(index, name) in MIXED_MUST_PASS {
        let check = find_check(criteria, index, name);
        assert!(
            check["pass"].as_bool().unwrap(),
            "criterion {index} check {name:?} should pass:\n{check}"
        );
    }
    for &(index, name) in HONEST_FAIL_CHECKS {
        // Present with its measured value — the assertions above already
        // guarantee the metric is finite and the target stated; the outcome
        // itself is whatever the frozen draw produced.
        find_check(criteria, index, name);
    }

    // The overall verdict aggregates the criteria, and the process exit code
    // mirrors it on both runs.
    assert_eq!(report["pass"].as_bool(), Some(all_pass));
    let expected = if all_pass { 0 } else { 1 };
    assert_eq!(out1.status.code(), Some(expected), "first run exit code");
    assert_eq!(out2.status.code(), Some(expected), "second run exit code");

    let _ = fs::remove_dir_all(&base);
}
