use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ultracalc"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("spawn ultracalc")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8")
}

fn in_process(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("ultracalc").chain(args.iter().copied());
    let code = ultracalc::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write_space(dir: &TempDir, ell: &str, p: &str) {
    let o = run_in(dir.path(), &["space", "--ell", ell, "-p", p, "--out", "s.json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn verify_is_byte_identical_across_runs_and_thread_counts() {
    let args = ["verify", "--suite", "all", "--trials", "30", "--seed", "7"];
    let a = bin().args(args).env("ULTRACALC_THREADS", "1").output().unwrap();
    let b = bin().args(args).env("ULTRACALC_THREADS", "4").output().unwrap();
    let c = bin().args(args).output().unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    let other = bin().args(["verify", "--trials", "30", "--seed", "8"]).output().unwrap();
    assert_ne!(a.stdout, other.stdout);
}

#[test]
fn verify_json_report() {
    let (code, out, _) = in_process(&["verify", "--suite", "ibp", "--trials", "5", "--format", "json"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["passed"], true);
    let names: Vec<&str> = v["suites"].as_array().unwrap().iter().map(|s| s["suite"].as_str().unwrap()).collect();
    assert_eq!(names, ["ibp", "ibp-naive"]);
}

#[test]
fn exit_codes() {
    assert_eq!(in_process(&["frobnicate"]).0, 2);
    assert_eq!(in_process(&["verify", "--no-such-flag"]).0, 2);
    assert_eq!(in_process(&["verify", "--suite", "nope"]).0, 2);
    assert_eq!(in_process(&["project", "--fn", "sin(y)"]).0, 2);
    assert_eq!(in_process(&["grid", "--beta", "1"]).0, 2);
    let (code, out, _) = in_process(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("verify"));
    assert_eq!(in_process(&["pair", "--help"]).0, 0);

    let (code, _, err) = in_process(&["integrate", "--from", "0.1", "--to", "1"]);
    assert_eq!(code, 1);
    assert!(err.contains("not a node"), "{err}");
    let bad = bin().args(["integrate", "--from", "0.03", "--to", "1"]).env("ULTRACALC_THREADS", "zero").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn integrate_defaults_to_constant_one() {
    let (code, out, _) = in_process(&["integrate", "--from", "-0.5", "--to", "1"]);
    assert_eq!(code, 0);
    assert!((out.trim().parse::<f64>().unwrap() - 1.5).abs() < 1e-14);
    let (_, out, _) = in_process(&["integrate", "--fn", "x^2", "--from", "-1", "--to", "1"]);
    assert!((out.trim().parse::<f64>().unwrap() - 2.0 / 3.0).abs() < 1e-14);
}

#[test]
fn files_round_trip_through_commands() {
    let dir = TempDir::new().unwrap();
    write_space(&dir, "4", "1");
    let o = run_in(dir.path(), &["project", "--space", "s.json", "--fn", "x^2 - 1", "--out", "u.json"]);
    assert!(o.status.success());
    let o = run_in(dir.path(), &["derive", "--space", "s.json", "--in", "u.json", "--kind", "D2", "--out", "du.json"]);
    assert!(o.status.success());
    let o = run_in(dir.path(), &["sample", "--space", "s.json", "--in", "du.json", "--points", "-0.75,0.25"]);
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,value"));
    for line in lines {
        let (x, v) = line.split_once(',').unwrap();
        let (x, v): (f64, f64) = (x.parse().unwrap(), v.parse().unwrap());
        // degree-1 projection of x^2 has slope 2 * (cell midpoint)
        let mid = if x < 0.0 { -0.75 } else { 0.25 };
        assert!((v - 2.0 * mid).abs() < 1e-12, "{line}");
    }

    // the ultrafunction file names its space by hash
    fs::write(dir.path().join("other.json"), r#"{"beta":1.0,"nodes":[-1.0,0.0,1.0],"degree":1}"#).unwrap();
    let o = run_in(dir.path(), &["derive", "--space", "other.json", "--in", "u.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn delta_and_basis_files() {
    let dir = TempDir::new().unwrap();
    write_space(&dir, "4", "0");
    let o = run_in(dir.path(), &["delta", "--space", "s.json", "--at", "-0.5", "--side", "plus"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let blocks = v["blocks"].as_array().unwrap();
    // p = 0 on cells of width 1/2: the kernel value is 1/sqrt(h)
    assert!((blocks[1][0].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-14);
    assert_eq!(blocks[0][0], 0.0);
    let o = run_in(dir.path(), &["delta", "--space", "s.json", "--at", "0.1", "--side", "plus"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run_in(dir.path(), &["basis", "--space", "s.json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["points"].as_array().unwrap().len(), 4);
    let o = run_in(dir.path(), &["basis", "--space", "s.json", "--points", "-0.9,-0.5,0.1,0.6"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn export_operator() {
    let dir = TempDir::new().unwrap();
    write_space(&dir, "3", "1");
    let o = run_in(dir.path(), &["export-op", "--space", "s.json", "--kind", "D", "--format", "csv"]);
    let text = stdout(&o);
    let rows: Vec<Vec<f64>> = text.lines().map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.len() == 6));
    let o = run_in(dir.path(), &["export-op", "--space", "s.json", "--kind", "D2", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["kind"], "D2");
    assert_eq!(v["dim"], 6);
    // D2 has no coupling between cells
    assert_eq!(v["matrix"][0][2], 0.0);
    assert_ne!(rows[1][2], 0.0);
}

#[test]
fn pairing_and_ladders() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("dirac.json"), r#"{"k":3,"fn":"x*abs(x)/4","label":"dirac"}"#).unwrap();
    let test = "cos(x)*max(0.64-x^2,0)^3";
    let o = run_in(dir.path(), &["pair", "--dist", "dirac.json", "--test", test, "--support", "-0.8,0.8"]);
    assert!(o.status.success());
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!((v - 0.64f64.powi(3)).abs() < 1e-4, "{v}");

    let o = run_in(dir.path(), &["pair", "--dist", "dirac.json", "--test", test, "--support", "-1,0.8"]);
    assert_eq!(o.status.code(), Some(1));

    let o = run_in(
        dir.path(),
        &["pair", "--dist", "dirac.json", "--test", test, "--support", "-0.8,0.8", "--refine", "3", "--target", "0.262144"],
    );
    let text = stdout(&o);
    assert!(text.starts_with("level,value,error,order\n"));
    assert_eq!(text.lines().count(), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("fitted_order="));

    let o = run_in(dir.path(), &["pair", "--dist", "dirac.json", "--test", test, "--support", "-0.8,0.8", "--refine", "2"]);
    assert_eq!(o.status.code(), Some(1));

    fs::write(
        dir.path().join("ladder.json"),
        r#"{"beta":1.0,"ell":4,"degree":1,"levels":4,
            "observables":{"sin":{"kind":"l2_error","fn":"sin(x)"},
                           "line":{"kind":"value_at","fn":"1+x","x":0.3}}}"#,
    )
    .unwrap();
    let o = run_in(dir.path(), &["refine", "--config", "ladder.json", "--observe", "sin"]);
    assert!(o.status.success());
    let last = stdout(&o).lines().last().unwrap().to_string();
    let order: f64 = last.rsplit(',').next().unwrap().parse().unwrap();
    assert!((order - 2.0).abs() < 0.2, "{last}");
    let o = run_in(dir.path(), &["refine", "--config", "ladder.json", "--observe", "line"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("flag=order_undefined"));
    let o = run_in(dir.path(), &["refine", "--config", "ladder.json", "--observe", "nothing"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn grids() {
    let (code, out, _) = in_process(&["grid", "--beta", "1", "--tags", "-0.3,0.3", "--h-max", "0.5"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let nodes: Vec<f64> = v["nodes"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!(nodes.contains(&-0.3) && nodes.contains(&0.3));
    assert!(nodes.windows(2).all(|w| w[1] - w[0] <= 0.5 + 1e-15));
    let (code, _, _) = in_process(&["grid", "--ell", "0"]);
    assert_eq!(code, 1);
}
