use std::path::Path;
use std::process::{Command, Output};

use gfbm_core::io::{parse_manifest, parse_paths_csv};
use serde_json::Value;

fn gfbm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gfbm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn gfbm_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gfbm"))
        .args(args)
        .env(key, value)
        .output()
        .expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn classify_smooth_pair() {
    let out = gfbm(&["classify", "--alpha", "0.6", "--gamma", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_stdout(&out);
    assert_eq!(v["regime"], "differentiable");
    assert_eq!(v["H"].as_f64(), Some(0.85));
}

#[test]
fn classify_reports_invalid_pairs() {
    let out = gfbm(&["classify", "--alpha", "0.7", "--gamma", "0.2", "--labels"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_stdout(&out);
    assert_eq!(v["regime"], "invalid");
    assert!(v["H"].is_null());
    let bm = json_stdout(&gfbm(&["classify", "--alpha", "0", "--gamma", "0", "--labels"]));
    assert_eq!(bm["regime"], "non_differentiable");
    assert_eq!(bm["is_bm"], true);
}

#[test]
fn kappa_of_brownian_motion_falls_back_to_quadrature() {
    let out = gfbm(&["kappa", "--alpha", "0", "--gamma", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_stdout(&out);
    assert!((v["kappa"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert_eq!(v["route"], "quadrature");
}

#[test]
fn kappa_routes_agree_off_poles() {
    let closed = json_stdout(&gfbm(&[
        "kappa", "--alpha", "0.3", "--gamma", "0.4", "--route", "closed",
    ]));
    let quad = json_stdout(&gfbm(&["kappa", "--alpha", "0.3", "--gamma", "0.4", "--route", "quad"]));
    assert_eq!(closed["route"], "closed_form");
    let (a, b) = (closed["kappa"].as_f64().unwrap(), quad["kappa"].as_f64().unwrap());
    assert!((a - b).abs() <= 10.0 * quad["abs_error_estimate"].as_f64().unwrap().max(1e-14));
}

#[test]
fn closed_route_at_a_pole_is_a_numerical_failure() {
    let out = gfbm(&["kappa", "--alpha", "0.25", "--gamma", "0.5", "--route", "closed"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn out_of_domain_simulation_exits_1() {
    let out = gfbm(&[
        "simulate", "--alpha", "0.7", "--gamma", "0.2", "--paths", "2", "--grid-n", "4", "--seed", "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(
        gfbm(&["classify", "--alpha", "0.1", "--gamma", "0", "--bogus"])
            .status
            .code(),
        Some(64)
    );
    assert_eq!(gfbm(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(gfbm(&["simulate", "--alpha", "0.1"]).status.code(), Some(64));
    assert_eq!(gfbm(&["--help"]).status.code(), Some(0));
}

#[test]
fn thread_setting_is_validated() {
    let out = gfbm_env(&["classify", "--alpha", "0", "--gamma", "0"], "GFBM_THREADS", "zero");
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn seeded_simulation_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for method in ["exact", "riemann"] {
        let args = |p: &Path| {
            vec![
                "simulate".to_string(),
                "--alpha".into(),
                "0.25".into(),
                "--gamma".into(),
                "0.5".into(),
                "--method".into(),
                method.into(),
                "--paths".into(),
                "20".into(),
                "--grid-n".into(),
                "16".into(),
                "--seed".into(),
                "7".into(),
                "--out".into(),
                path_str(p).into(),
            ]
        };
        let args_a = args(&a);
        let args_b = args(&b);
        let run_a = gfbm(&args_a.iter().map(String::as_str).collect::<Vec<_>>());
        let run_b = gfbm_env(
            &args_b.iter().map(String::as_str).collect::<Vec<_>>(),
            "GFBM_THREADS",
            "1",
        );
        assert_eq!(
            run_a.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&run_a.stderr)
        );
        assert_eq!(run_b.status.code(), Some(0));
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap(), "{method}");
    }
}

#[test]
fn every_output_has_one_manifest_that_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("paths.csv");
    let run = gfbm(&[
        "simulate",
        "--alpha",
        "0.6",
        "--gamma",
        "0.5",
        "--paths",
        "5",
        "--grid-n",
        "8",
        "--t-max",
        "2",
        "--seed",
        "11",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(run.status.code(), Some(0));
    let files: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(files.len(), 2);
    let manifest_path = dir.path().join("paths.csv.manifest.json");
    let m = parse_manifest(&std::fs::read_to_string(&manifest_path).unwrap()).unwrap();
    assert_eq!(m.command, "simulate");
    assert_eq!(m.seed, Some(11));
    assert_eq!(m.outputs, vec![path_str(&out).to_string()]);
    assert_eq!(m.params.alpha(), 0.6);
    assert!(m.jitter.is_some());
    assert!(m.timestamp.contains('T') && m.timestamp.ends_with('Z'));

    let first = std::fs::read(&out).unwrap();
    std::fs::remove_file(&out).unwrap();
    let argv: Vec<&str> = m.argv.iter().map(String::as_str).collect();
    assert_eq!(gfbm(&argv).status.code(), Some(0));
    assert_eq!(std::fs::read(&out).unwrap(), first);

    let (grid, rows) = parse_paths_csv(&String::from_utf8(first).unwrap()).unwrap();
    assert_eq!(grid.len(), 9);
    assert_eq!(grid.horizon(), 2.0);
    assert_eq!(rows.len(), 5);
}

#[test]
fn riemann_manifest_records_truncation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let run = gfbm(&[
        "simulate",
        "--alpha",
        "0.25",
        "--gamma",
        "0.5",
        "--method",
        "riemann",
        "--paths",
        "3",
        "--grid-n",
        "4",
        "--seed",
        "2",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(run.status.code(), Some(0));
    let m = parse_manifest(&std::fs::read_to_string(dir.path().join("r.csv.manifest.json")).unwrap()).unwrap();
    let t = m.truncation.expect("truncation diagnostics");
    assert!(t.tail_variance <= t.limit);
}

#[test]
fn derivative_simulation_needs_smooth_regime() {
    let ok = gfbm(&[
        "simulate",
        "--alpha",
        "0.6",
        "--gamma",
        "0.5",
        "--method",
        "derivative",
        "--paths",
        "2",
        "--grid-n",
        "4",
        "--seed",
        "3",
    ]);
    assert_eq!(ok.status.code(), Some(0));
    let text = String::from_utf8(ok.stdout).unwrap();
    assert!(text.starts_with("2.5000000000000000e-1,"));
    let rough = gfbm(&[
        "simulate",
        "--alpha",
        "0.25",
        "--gamma",
        "0.5",
        "--method",
        "derivative",
        "--paths",
        "2",
        "--grid-n",
        "4",
    ]);
    assert_eq!(rough.status.code(), Some(1));
}

#[test]
fn cov_matrix_matches_self_similar_diagonal() {
    let dir = tempfile::tempdir().unwrap();
    let grid_file = dir.path().join("grid.txt");
    std::fs::write(&grid_file, "# times\n0.5, 1\n2\n").unwrap();
    let out = gfbm(&[
        "cov",
        "--alpha",
        "0.625",
        "--gamma",
        "0.75",
        "--grid",
        path_str(&grid_file),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let (grid, rows) = parse_paths_csv(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let h = 0.75f64;
    for (i, &t) in grid.times().iter().enumerate() {
        assert!((rows[i][i] - t.powf(2.0 * h)).abs() < 1e-9 * t.powf(2.0 * h));
        for (j, row) in rows.iter().enumerate() {
            assert_eq!(rows[i][j], row[i]);
        }
    }
    let phi = gfbm(&["phi", "--alpha", "0.625", "--gamma", "0.75", "--uniform", "2,1"]);
    let (_, prow) = parse_paths_csv(&String::from_utf8(phi.stdout).unwrap()).unwrap();
    assert!((prow[0][2] - 1.0).abs() < 1e-9);
    assert_eq!(prow[1][1], 0.0);
    assert!(gfbm(&["cov", "--alpha", "0.2", "--gamma", "0"]).status.code() == Some(64));
    assert_eq!(
        gfbm(&["cov", "--alpha", "0.2", "--gamma", "0", "--uniform", "3"])
            .status
            .code(),
        Some(64)
    );
}

#[test]
fn estimate_reads_simulated_paths() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("h.csv");
    let run = gfbm(&[
        "simulate",
        "--alpha",
        "0.25",
        "--gamma",
        "0.5",
        "--paths",
        "2000",
        "--grid-n",
        "8",
        "--seed",
        "5",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(run.status.code(), Some(0));
    let est = gfbm(&["estimate", "--input", path_str(&out)]);
    assert_eq!(est.status.code(), Some(0));
    let v = json_stdout(&est);
    assert!((v["hurst_estimate"].as_f64().unwrap() - 0.5).abs() < 0.05);
    assert_eq!(v["hurst"].as_f64(), Some(0.5));
    assert_eq!(
        gfbm(&["estimate", "--input", path_str(&dir.path().join("missing.csv"))])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn verify_writes_report_and_flags_failures() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let ok = gfbm(&[
        "verify",
        "--alpha",
        "0.25",
        "--gamma",
        "0.5",
        "--checks",
        "holder,lower_bound",
        "--paths",
        "100",
        "--out",
        path_str(&report),
    ]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let arr = v.as_array().unwrap();
    assert_eq!(arr.len(), 2);
    for r in arr {
        for key in [
            "check_name",
            "claim_ref",
            "measured",
            "target",
            "tolerance",
            "passed",
            "runtime",
        ] {
            assert!(r.get(key).is_some(), "missing {key}");
        }
    }
    assert!(dir.path().join("report.json.manifest.json").exists());

    let failing = gfbm(&[
        "verify", "--alpha", "0.25", "--gamma", "0.5", "--checks", "flil", "--paths", "200",
    ]);
    assert_eq!(failing.status.code(), Some(3));
    assert_eq!(
        gfbm(&["verify", "--alpha", "0.25", "--gamma", "0.5", "--checks", "nope"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn sigma_matches_closed_form() {
    let v = json_stdout(&gfbm(&["sigma", "--alpha", "0.625", "--gamma", "0.75", "--b", "2"]));
    assert!((v["sigma"].as_f64().unwrap() - v["closed_form"].as_f64().unwrap()).abs() < 1e-8);
}
