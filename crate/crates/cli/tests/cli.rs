use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kde-edof")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

#[test]
fn edof_on_faithful_at_silverman() {
    let v = json(&run(&["edof", "--input", "builtin:faithful", "--kernel", "gaussian", "--bandwidth", "3.9876"]));
    assert_eq!(v["schema"], 1);
    for key in ["nu_hat", "nu1", "nu2", "nu3", "theta_hat", "omega2", "h", "n", "kernel"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert!((v["nu_hat"].as_f64().unwrap() - 3.2).abs() < 0.05);
    assert!((v["nu3"].as_f64().unwrap() - 5.1).abs() < 0.05);
    assert_eq!(v["n"], 272);
}

#[test]
fn fit_writes_density_that_integrates_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.csv");
    let v = json(&run(&[
        "fit",
        "--input",
        "builtin:faithful",
        "--kernel",
        "gaussian",
        "--rule",
        "silverman",
        "--grid-out",
        g.to_str().unwrap(),
    ]));
    assert!((v["integral"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert!((v["h"].as_f64().unwrap() - 3.9876).abs() < 1e-3);
    let (header, rows) = parse_csv(&std::fs::read_to_string(&g).unwrap());
    assert_eq!(header, ["y", "density"]);
    assert_eq!(rows.len(), 512);
    let dy = rows[1][0] - rows[0][0];
    let trapezoid: f64 = rows.windows(2).map(|w| 0.5 * (w[0][1] + w[1][1]) * dy).sum();
    assert!((trapezoid - 1.0).abs() < 1e-3, "{trapezoid}");
}

#[test]
fn missing_input_is_a_usage_error_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.csv");
    let out = run(&["fit", "--input", "/definitely/not/here.csv", "--bandwidth", "2", "--grid-out", g.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(!g.exists());
}

#[test]
fn unknown_flag_and_bad_values_exit_two() {
    assert_eq!(run(&["edof", "--input", "builtin:faithful", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["bandwidth", "--input", "builtin:faithful", "--rule", "nope"]).status.code(), Some(2));
    assert_eq!(run(&[]).status.code(), Some(2));
}

#[test]
fn domain_errors_exit_one() {
    let out = run(&["edof", "--input", "builtin:faithful", "--bandwidth=-1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
    assert!(out.stdout.is_empty());
}

#[test]
fn bandwidth_rules_and_curve() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("curve.csv");
    let v = json(&run(&[
        "bandwidth",
        "--input",
        "builtin:faithful",
        "--rule",
        "aic",
        "--penalty",
        "1.5",
        "--curve-out",
        c.to_str().unwrap(),
        "--threads",
        "1",
    ]));
    let h = v["h"].as_f64().unwrap();
    assert!((1.95..=2.55).contains(&h), "{h}");
    let (header, rows) = parse_csv(&std::fs::read_to_string(&c).unwrap());
    assert_eq!(header, ["h", "criterion", "nu_hat", "loglik"]);
    assert_eq!(rows.len(), 61);

    let v = json(&run(&["bandwidth", "--input", "builtin:faithful", "--rule", "bcv", "--grid", "1:10:91"]));
    assert!((v["h"].as_f64().unwrap() - 2.5947).abs() < 0.01);
    let v = json(&run(&["bandwidth", "--input", "builtin:faithful", "--rule", "amkld"]));
    assert!((v["h"].as_f64().unwrap() - 4.8737).abs() < 0.002);
}

#[test]
fn amkld_reports_root_and_rule() {
    let v = json(&run(&["amkld", "--n", "1000000", "--sigma", "2"]));
    assert!(v["residual"].as_f64().unwrap().abs() < 1e-10);
    let ratio = v["h_star"].as_f64().unwrap() / v["h_rule"].as_f64().unwrap();
    assert!((0.98..=1.02).contains(&ratio), "{ratio}");
    let b = &v["at_optimum"];
    let total = b["b"].as_f64().unwrap() + b["v"].as_f64().unwrap() + b["bv"].as_f64().unwrap();
    assert!((total - b["total"].as_f64().unwrap()).abs() < 1e-15);
}

#[test]
fn sensmat_all_gaussian_diagonal() {
    let dir = tempfile::tempdir().unwrap();
    let (m, d) = (dir.path().join("m.csv"), dir.path().join("d.csv"));
    let v = json(&run(&[
        "sensmat",
        "--oracle",
        "normal",
        "--bandwidth",
        "1",
        "--max-degree",
        "30",
        "--out",
        m.to_str().unwrap(),
        "--diag-out",
        d.to_str().unwrap(),
    ]));
    assert!((v["nu"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    let (header, rows) = parse_csv(&std::fs::read_to_string(&m).unwrap());
    assert_eq!(header.len(), 32);
    for (j, row) in rows.iter().enumerate().take(10) {
        assert!((row[j + 1] - 2f64.powf(-(j as f64) / 2.0)).abs() < 1e-6, "{j}");
    }
    let (_, diag) = parse_csv(&std::fs::read_to_string(&d).unwrap());
    assert_eq!(diag.len(), 30);
}

#[test]
fn ops_diag_csv() {
    let out = run(&["ops-diag", "--input", "builtin:faithful", "--max-degree", "12"]);
    assert!(out.status.success());
    let (header, rows) = parse_csv(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(header, ["k", "alpha", "beta", "defect"]);
    assert_eq!(rows.len(), 13);
    assert!(rows.iter().all(|r| r[3] < 1e-6));
}

#[test]
fn replicate_table1_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let v = json(&run(&["replicate", "table1", "--out", d.to_str().unwrap(), "--seed", "7"]));
        assert_eq!(v["schema"], 1);
    }
    let read = |d: &std::path::Path, f: &str| std::fs::read_to_string(d.join(f)).unwrap();
    assert!(a.join("manifest.json").exists());
    let names: Vec<String> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    assert!(!names.is_empty());
    for n in names {
        assert_eq!(read(&a, &n), read(&b, &n));
    }
}

#[test]
fn replicate_rejects_unknown_experiment() {
    assert_eq!(run(&["replicate", "fig9", "--out", "/tmp/x"]).status.code(), Some(2));
}
