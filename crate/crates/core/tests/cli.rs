use assert_cmd::Command;
use std::fs;
use tempfile::tempdir;

fn bin() -> Command {
    Command::cargo_bin("relu-cascade").unwrap()
}

#[test]
fn compile_then_verify_and_report() {
    let dir = tempdir().unwrap();
    let net = dir.path().join("net.json");
    let out = bin()
        .args([
            "compile", "--mask", "hat", "--seed", "hat", "--n", "4", "--out",
        ])
        .arg(&net)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["bounds_ok"], true);
    assert!(net.exists());

    let rep = dir.path().join("report.json");
    bin()
        .args([
            "verify", "--mask", "hat", "--seed", "hat", "--n", "4", "--tol", "1e-9", "--net",
        ])
        .arg(&net)
        .arg("--report")
        .arg(&rep)
        .assert()
        .code(0);
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&rep).unwrap()).unwrap();
    for key in [
        "max_dev",
        "mean_dev",
        "width",
        "depth",
        "params",
        "bounds_ok",
    ] {
        assert!(r.get(key).is_some(), "{key}");
    }

    let out = bin().args(["report", "--net"]).arg(&net).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["lowered"], true);
}

#[test]
fn verify_failures_exit_one() {
    let dir = tempdir().unwrap();
    let net = dir.path().join("net.json");
    bin()
        .args([
            "compile", "--mask", "d4", "--seed", "H", "--n", "3", "--out",
        ])
        .arg(&net)
        .assert()
        .code(0);
    // float arithmetic cannot meet this
    let out = bin()
        .args([
            "verify", "--mask", "d4", "--seed", "H", "--n", "3", "--tol", "1e-300", "--net",
        ])
        .arg(&net)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("max_dev"));
    // verified against the wrong seed
    bin()
        .args([
            "verify", "--mask", "d4", "--seed", "hat", "--n", "3", "--net",
        ])
        .arg(&net)
        .assert()
        .code(1);
}

#[test]
fn input_errors_exit_two() {
    let dir = tempdir().unwrap();
    bin()
        .args(["compile", "--mask", "db8", "--n", "2"])
        .assert()
        .code(2);
    bin()
        .args(["compile", "--mask", "hat", "--n", "0"])
        .assert()
        .code(2);
    bin().args(["compile", "--bogus"]).assert().code(2);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"layers\": 3").unwrap();
    bin()
        .args([
            "verify", "--mask", "hat", "--seed", "hat", "--n", "2", "--net",
        ])
        .arg(&bad)
        .assert()
        .code(2);
    bin()
        .args(["verify", "--mask", "hat", "--n", "2", "--net"])
        .arg(dir.path().join("missing.json"))
        .assert()
        .code(2);
    bin()
        .args(["converge", "--mask", "d4", "--nmax", "2", "--out"])
        .arg(dir.path().join("no/such/dir"))
        .assert()
        .code(2);
    // seed wider than the mask support
    let seed = dir.path().join("seed.json");
    fs::write(&seed, r#"{"breakpoints":[0,2,5],"values":[0,1,0]}"#).unwrap();
    bin()
        .args(["compile", "--mask", "hat", "--n", "2", "--seed"])
        .arg(&seed)
        .assert()
        .code(2);
}

#[test]
fn converge_writes_outputs() {
    let dir = tempdir().unwrap();
    bin()
        .args(["converge", "--mask", "d4", "--nmax", "8", "--out"])
        .arg(dir.path())
        .assert()
        .code(0);
    let csv = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "n,error,width,depth,params");
    assert_eq!(lines.len(), 9);
    let s: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert!(s["fitted_lambda"].as_f64().unwrap() < 0.9);
    assert!(dir.path().join("increments.csv").exists());

    let hat = tempdir().unwrap();
    bin()
        .args(["converge", "--mask", "hat", "--nmax", "6", "--out"])
        .arg(hat.path())
        .assert()
        .code(0);
    let csv = fs::read_to_string(hat.path().join("convergence.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let err: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(err <= 1e-10, "{line}");
    }
}

#[test]
fn config_file_with_flag_precedence() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let net = dir.path().join("n.json");
    fs::write(
        &cfg,
        format!(
            r#"{{"mask":"bspline3","seed":"H","n":5,"out":{}}}"#,
            serde_json::to_string(&net).unwrap()
        ),
    )
    .unwrap();
    let out = bin()
        .args(["compile", "--n", "2", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let s: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(s["n"], 2);
    assert_eq!(s["mask"], "bspline3");
    assert_eq!(s["stage"], "special");
    assert!(net.exists());
    fs::write(&cfg, r#"{"unknown":1}"#).unwrap();
    bin()
        .args(["compile", "--config"])
        .arg(&cfg)
        .assert()
        .code(2);
}

#[test]
fn custom_mask_file() {
    let dir = tempdir().unwrap();
    let mask = dir.path().join("mask.json");
    fs::write(&mask, r#"{"name":"half","coefficients":[0.5,1.0,0.5]}"#).unwrap();
    let net = dir.path().join("net.json");
    bin()
        .args(["compile", "--seed", "H", "--n", "2", "--mask"])
        .arg(&mask)
        .arg("--out")
        .arg(&net)
        .assert()
        .code(0);
    bin()
        .args(["verify", "--seed", "H", "--n", "2", "--mask"])
        .arg(&mask)
        .arg("--net")
        .arg(&net)
        .assert()
        .code(0);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let a = tempdir().unwrap();
    let b = tempdir().unwrap();
    for d in [&a, &b] {
        bin()
            .args([
                "compile", "--mask", "d4", "--seed", "hat", "--n", "2", "--out",
            ])
            .arg(d.path().join("net.json"))
            .assert()
            .code(0);
        bin()
            .args(["converge", "--mask", "bspline3", "--nmax", "3", "--out"])
            .arg(d.path())
            .assert()
            .code(0);
    }
    for f in [
        "net.json",
        "convergence.csv",
        "increments.csv",
        "summary.json",
    ] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}
