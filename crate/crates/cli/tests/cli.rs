use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn posthoc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_posthoc")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = posthoc(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

const SMALL: [&str; 8] = ["--b", "100", "--b-train", "100", "--b-calib", "50", "--alpha", "0.1"];

fn simulate(dir: &Path) -> String {
    let out = dir.to_str().unwrap();
    ok(&[
        "simulate", "--dims", "10,10,8", "--n-subjects", "12", "--sigma", "1", "--region", "4,4,4,2.5,1.5", "--seed", "3",
        "--out", out,
    ]);
    dir.join("sim.phdat").to_str().unwrap().to_string()
}

#[test]
fn simulate_then_analyse() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let input = simulate(dir.path());
    let truth: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("sim_truth.json")).unwrap()).unwrap();
    assert_eq!(truth["m"], 800);

    let z = ["--z", "2.5,3"];
    let with = |cmd: &[&str]| {
        let mut a: Vec<&str> = cmd.to_vec();
        a.extend(SMALL);
        a.extend(z);
        a.extend(["--input", &input, "--out", out]);
        ok(&a)
    };
    with(&["calibrate"]);
    let t: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("templates.json")).unwrap()).unwrap();
    assert!(t["templates"]["pARI"]["thresholds"].is_array());

    with(&["clusters"]);
    let csv = fs::read_to_string(dir.path().join("clusters_z2.5.csv")).unwrap();
    assert!(csv.starts_with("# config: {"));
    assert_eq!(csv.lines().nth(1).unwrap(), "ID,X,Y,Z,PeakStat,Size_mm3,ARI,Notip,pARI");

    with(&["bound", "--top-k", "20"]);
    let b: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("bound.json")).unwrap()).unwrap();
    assert_eq!(b["size"], 20);
    with(&["bound", "--indices", "0,1,2"]);

    with(&["curve", "--points", "15", "--format", "csv,svg"]);
    let curve = fs::read_to_string(dir.path().join("curve.csv")).unwrap();
    assert_eq!(curve.lines().nth(1).unwrap().split(',').count(), 5);

    with(&["drill", "--cluster", "1", "--z-new", "3.5"]);
    with(&["nullcache"]);
    assert!(dir.path().join("null.pnul").exists());
}

#[test]
fn bench_is_deterministic_and_report_rerenders() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let mut args = vec!["bench", "--design", "two-cluster", "--sigma", "2", "--points", "30", "--format", "csv,json,svg"];
        args.extend(SMALL);
        args.extend(["--seed", "5", "--out", d.path().to_str().unwrap()]);
        ok(&args);
    }
    let names = ["curve.csv", "scatter.csv", "bundle.json", "curve.svg", "scatter.svg", "clusters_z3.csv"];
    for name in names {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let c = tempfile::tempdir().unwrap();
    let bundle = a.path().join("bundle.json");
    ok(&["report", "--bundle", bundle.to_str().unwrap(), "--format", "csv,svg", "--out", c.path().to_str().unwrap()]);
    for name in ["curve.csv", "scatter.csv", "curve.svg", "scatter.svg"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(c.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    // parameter errors
    assert_eq!(posthoc(&["clusters", "--out", out]).status.code(), Some(2));
    assert_eq!(posthoc(&["coverage", "--reps", "50", "--out", out]).status.code(), Some(2));
    assert_eq!(posthoc(&["bench", "--alpha", "1.5", "--out", out]).status.code(), Some(2));
    assert_eq!(posthoc(&["bench", "--connectivity", "7", "--out", out]).status.code(), Some(2));
    assert_eq!(posthoc(&["bench", "--z", "4,3", "--out", out]).status.code(), Some(2));
    // format / io errors
    assert_eq!(posthoc(&["clusters", "--input", "/nonexistent.phdat", "--out", out]).status.code(), Some(3));
    let junk = dir.path().join("junk.phdat");
    fs::write(&junk, b"PHD0 not a stack").unwrap();
    assert_eq!(posthoc(&["clusters", "--input", junk.to_str().unwrap(), "--out", out]).status.code(), Some(3));
    assert_eq!(posthoc(&["report", "--bundle", "/nonexistent/bundle.json", "--out", out]).status.code(), Some(3));
}
