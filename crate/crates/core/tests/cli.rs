use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fiberflow::scenario::{constant_singletons, two_point, ScenarioFile};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fiberflow"))
}

fn write(dir: &Path, name: &str, file: &ScenarioFile) -> PathBuf {
    let p = dir.join(name);
    file.write(&p).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn evolve_two_point() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "tp.json", &two_point());
    let o = run(&["evolve", p.to_str().unwrap(), "--times", "0.5,1,2"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let u: Vec<&str> = out
        .lines()
        .filter(|l| l.starts_with("b,"))
        .map(|l| l.split(',').nth(2).unwrap())
        .collect();
    assert_eq!(u, ["1.00000000000e0", "1.00000000000e0", "5.00000000000e-1"]);
}

#[test]
fn check_constant_section_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "c.json", &constant_singletons());
    let out = dir.path().join("rep");
    let o = run(&["check", p.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("verdicts.json")).unwrap()).unwrap();
    let list = v.as_array().unwrap();
    assert!(list.iter().all(|e| e["status"] != "FAIL"));
    assert!(list.iter().all(|e| e.get("check").is_some() && e.get("worst_slack").is_some()));
}

#[test]
fn check_counterexample_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["paper-example", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(dir.path().join("paper_counterexample.json").exists());
    let refs = std::fs::read_to_string(dir.path().join("report/reference_triples.csv")).unwrap();
    assert!(refs.contains("x1.0,x7.0,x6.0,1.11483519287e0,sqrt(5/4)"));
    assert!(refs.contains("DISCREPANCY"));
}

#[test]
fn report_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "tp.json", &two_point());
    let mut bodies = Vec::new();
    for jobs in ["1", "3"] {
        let out = dir.path().join(format!("rep{jobs}"));
        let o = bin()
            .env("FIBERFLOW_JOBS", jobs)
            .args(["check", p.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .output()
            .unwrap();
        assert!(o.status.code().is_some());
        let mut files: Vec<_> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        bodies.push(files.iter().map(|f| std::fs::read(f).unwrap()).collect::<Vec<_>>());
    }
    assert_eq!(bodies[0], bodies[1]);
}

#[test]
fn transform_and_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "tp.json", &two_point());
    let o = run(&["transform", p.to_str().unwrap(), "--y", "b", "--t", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("y,t,xi,lstar,argmax_w,claimed,claim_gap\n"));
    assert_eq!(out.lines().count(), 102);
    let o = run(&["slopes", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("a,2.00000000000e0,1.00000000000e0,1.00000000000e0,1.00000000000e0,"));
}

#[test]
fn variational_reports_gap() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "tp.json", &two_point());
    let o = run(&["variational", p.to_str().unwrap(), "--y", "b", "--t", "2", "--steps", "8"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("best_z,a\n"));
    assert_eq!(out.lines().filter(|l| l.chars().next().is_some_and(|c| c.is_ascii_digit())).count(), 9);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let mut file = two_point();
    file.base[0].param = None;
    let p = write(dir.path(), "np.json", &file);
    let p = p.to_str().unwrap();
    assert_eq!(run(&["variational", p, "--y", "b", "--t", "1"]).status.code(), Some(4));
    assert_eq!(run(&["evolve", p, "--times", "1", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["evolve", p]).status.code(), Some(2));
    assert_eq!(run(&["transform", p, "--y", "nope", "--t", "1"]).status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    assert_eq!(run(&["validate", missing.to_str().unwrap()]).status.code(), Some(3));
    let mut bad = two_point();
    bad.section[1].value[0] += 0.1;
    let b = write(dir.path(), "bad.json", &bad);
    let o = run(&["validate", b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("'b'"));
    let unwritable = dir.path().join("np.json").join("sub");
    assert_eq!(
        run(&["evolve", p, "--times", "1", "--out", unwritable.to_str().unwrap()]).status.code(),
        Some(5)
    );
    assert_eq!(run(&["validate", p]).status.code(), Some(0));
}
