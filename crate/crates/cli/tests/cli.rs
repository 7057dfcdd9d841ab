use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ccpb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ccpb"))
        .args(args)
        .env_remove("CCPB_THREADS")
        .output()
        .expect("binary runs")
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(files(&path));
        } else {
            out.push((
                path.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&path).unwrap(),
            ));
        }
    }
    out.sort();
    out
}

#[test]
fn validate_reference_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("p0.toml");
    fs::write(
        &cfg,
        "[model]\na = 1.0\nb = 2.0\np = 1.0\nq = 1.0\nradius = 1.0\ndim = 2\n\n\
         [solver]\nladder = { start = 0.0625, factor = 0.7071067811865476, count = 17 }\n",
    )
    .unwrap();
    let out = tmp.path().join("out");
    let res = ccpb(&[
        "validate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stdout)
    );
    let checks = fs::read_to_string(out.join("report_checks.csv")).unwrap();
    assert!(checks.starts_with("check,value,target,tolerance,passed"));
    assert!(checks.lines().skip(1).all(|l| l.ends_with(",true")));
    for f in [
        "report_rows.csv",
        "inequalities.csv",
        "xi.csv",
        "xi.gp",
        "capacitance.gp",
        "profiles/profiles.gp",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn tight_tolerance_reports_validation_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("tight.toml");
    fs::write(&cfg, "[diagnostics.tolerances]\nboundary_gap = 1e-6\n").unwrap();
    let res = ccpb(&[
        "validate",
        "--config",
        cfg.to_str().unwrap(),
        "--ladder",
        "0.25:0.5:5",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stdout).contains("FAIL boundary_value"));
}

#[test]
fn asymptotics_layer_value() {
    let res = ccpb(&[
        "asymptotics",
        "--beta",
        "2",
        "--gamma",
        "4",
        "--eps",
        "1e-3",
    ]);
    assert_eq!(res.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    let total = doc["results"][0]["u"]["total"].as_f64().unwrap();
    let expected = -2.0 * 1000f64.ln() + 32f64.ln();
    assert!((total - expected).abs() < 1e-12, "{total} vs {expected}");
    assert!((32f64.ln() - 3.4657).abs() < 1e-4);
}

#[test]
fn asymptotics_query_file() {
    let tmp = tempfile::tempdir().unwrap();
    let q = tmp.path().join("q.toml");
    fs::write(
        &q,
        "[[queries]]\nepsilon = 0.01\ncase = { kind = \"interior\", kappa = 0.5 }\n\n\
         [[queries]]\nepsilon = 0.01\ncase = { kind = \"power\", beta = 3.0 }\n",
    )
    .unwrap();
    let res = ccpb(&["asymptotics", "--query", q.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert!(doc["results"][0]["u"].is_null());
    assert!((doc["results"][0]["bound"]["kappa"].as_f64().unwrap() - 0.5).abs() < 1e-15);
    let u = doc["results"][1]["u"]["total"].as_f64().unwrap();
    assert!((u - (-2.0 * 100f64.ln() + 8f64.ln())).abs() < 1e-12);
}

#[test]
fn missing_config_is_a_config_error() {
    let res = ccpb(&["solve", "--config", "/nonexistent/p0.toml"]);
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("cannot read"));
}

#[test]
fn bad_input_is_a_config_error() {
    assert_eq!(ccpb(&["nonsense"]).status.code(), Some(3));
    assert_eq!(ccpb(&["solve", "--eps", "-1"]).status.code(), Some(3));
    assert_eq!(
        ccpb(&["sweep", "--ladder", "0.1:2:3"]).status.code(),
        Some(3)
    );
    let bad_threads = Command::new(env!("CARGO_BIN_EXE_ccpb"))
        .args(["asymptotics"])
        .env("CCPB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad_threads.status.code(), Some(3));
}

#[test]
fn newton_failure_is_a_solver_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("starved.toml");
    fs::write(&cfg, "[solver]\nmax_iter = 1\n").unwrap();
    let out = tmp.path().join("out");
    let res = ccpb(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--eps",
        "0.01",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn solve_writes_profile_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let res = ccpb(&[
        "solve",
        "--eps",
        "0.05",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(0));
    let profile = fs::read_to_string(tmp.path().join("profile.csv")).unwrap();
    assert!(profile.starts_with("r,U,dU_dr,rho\n"));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["epsilon"].as_f64(), Some(0.05));
    assert!(summary["u_center"].as_f64().unwrap() > 0.0);
}

#[test]
fn robin_gauge_from_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("robin.json");
    fs::write(&cfg, r#"{"model": {"epsilon": 0.1, "eta": 0.01}}"#).unwrap();
    let res = ccpb(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(0));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("summary.json")).unwrap())
            .unwrap();
    // eta = eps^2 puts U(R) at 0.5 for the reference parameters
    assert!((summary["u_boundary"].as_f64().unwrap() - 0.5).abs() < 1e-9);
}

#[test]
fn outputs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let res = ccpb(&[
            "validate",
            "--ladder",
            "0.25:0.7071067811865476:9",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(res.status.code() == Some(0) || res.status.code() == Some(1));
        let res = ccpb(&[
            "sweep",
            "--ladder",
            "0.5:0.5:4",
            "--format",
            "json",
            "--out",
            dir.path().join("s").to_str().unwrap(),
        ]);
        assert_eq!(res.status.code(), Some(0));
    }
    let fa = files(a.path());
    assert!(fa.len() > 10);
    assert_eq!(fa, files(b.path()));
}
