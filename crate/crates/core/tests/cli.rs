use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ricci-geom"))
        .args(args)
        .output()
        .unwrap()
}

fn config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn check<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == name)
        .unwrap_or_else(|| panic!("no check {name}"))
}

#[test]
fn curvature_flat_passes_with_schema() {
    let out = bin(&[
        "curvature",
        "--metric",
        "builtin:minkowski4",
        "--samples",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["command"], "curvature");
    assert_eq!(r["pass"], true);
    assert_eq!(r["seed"], 42);
    assert_eq!(r["samples"], 10);
    for c in r["checks"].as_array().unwrap() {
        assert!(c["name"].is_string() && c["residual"].is_number() && c["tol"].is_number());
        assert_eq!(c["pass"], true);
    }
    assert!(r["timing_ms"].is_number());
    assert_eq!(r["config"]["metric"], "builtin:minkowski4");
}

#[test]
fn schwarzschild_and_sphere_values() {
    let r = json(&bin(&[
        "curvature",
        "--metric",
        "builtin:schwarzschild",
        "--samples",
        "20",
    ]));
    assert!(
        check(&r, "energy_tensor_vanishes")["residual"]
            .as_f64()
            .unwrap()
            < 1e-6
    );
    let r = json(&bin(&[
        "curvature",
        "--metric",
        "builtin:sphere3",
        "--samples",
        "20",
    ]));
    assert_eq!(r["pass"], true);
    assert!(check(&r, "scalar_curvature")["residual"].as_f64().unwrap() < 1e-6);
}

#[test]
fn atp_negative_control_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "neg.json",
        r#"{"metric": "builtin:hyperbolic_polar2", "fields": {"A": ["rho", "0"]}, "samples": 20}"#,
    );
    let out = bin(&["atp", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let r = json(&out);
    assert!(check(&r, "atp_residual")["residual"].as_f64().unwrap() > 0.1);
}

#[test]
fn radial_field_atp_and_conformal_pass() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "radial.json",
        r#"{"metric": "builtin:hyperbolic_polar2",
            "fields": {"A": ["-2/rho", "0"], "sigma": "-2*log(rho)"},
            "samples": 30}"#,
    );
    let out = bin(&["atp", "--config", &cfg]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let detail = check(&json(&out), "causal_class_uniform")["detail"]
        .as_str()
        .unwrap()
        .to_string();
    assert!(detail.starts_with("spacelike"));
    assert_eq!(bin(&["conformal", "--config", &cfg]).status.code(), Some(0));
}

#[test]
fn flow_defaults_pass_and_table_renders() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "flow.json",
        r#"{"metric": "builtin:hyperbolic_polar2", "fields": {"A": ["-2/rho", "0"]}, "samples": 5,
            "flow": {"pregeodesic_from": [[1.0, 0.0]], "riccati_random": 2}}"#,
    );
    let out = bin(&["flow", "--config", &cfg, "--table"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("flow: PASS"));
    assert!(text.contains("pregeodesic[0]/termination"));
}

#[test]
fn configuration_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let no_sigma = config(
        dir.path(),
        "a.json",
        r#"{"metric": "builtin:hyperbolic_polar2", "fields": {"A": ["-2/rho", "0"]}}"#,
    );
    assert_eq!(
        bin(&["conformal", "--config", &no_sigma]).status.code(),
        Some(2)
    );
    let unknown = config(
        dir.path(),
        "b.json",
        r#"{"metric": "builtin:minkowski4", "sampels": 3}"#,
    );
    assert_eq!(
        bin(&["curvature", "--config", &unknown]).status.code(),
        Some(2)
    );
    assert_eq!(
        bin(&["curvature", "--config", "/nonexistent/x.json"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        bin(&["curvature", "--metric", "builtin:nope"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(bin(&["curvature", "--fourpiG", "0"]).status.code(), Some(2));
    assert_eq!(bin(&["curvature", "--samples", "0"]).status.code(), Some(2));
    assert_eq!(bin(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn report_all_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let out = bin(&["report-all", "--seed", "42", "--out", p.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
        assert!(out.stdout.is_empty());
    }
    let strip = |p: &Path| {
        let mut v: Value = serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("timing_ms");
        v
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn shipped_configs_pass() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let cases: &[(&str, &[&str])] = &[
        (
            "radial_plane.json",
            &["curvature", "conformal", "atp", "flow"],
        ),
        ("cone3.json", &["curvature", "atp", "flow"]),
        ("minkowski4_conformal.json", &["curvature", "conformal"]),
        ("custom_metric.json", &["curvature", "conformal"]),
    ];
    for (file, commands) in cases {
        let cfg = dir.join(file);
        for cmd in *commands {
            let out = bin(&[cmd, "--config", cfg.to_str().unwrap(), "--samples", "10"]);
            assert_eq!(
                out.status.code(),
                Some(0),
                "{cmd} {file}: {}",
                String::from_utf8_lossy(&out.stdout)
            );
        }
    }
}
