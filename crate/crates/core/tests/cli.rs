//! End-to-end runs of the `fpm` binary.

mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::fixture;

fn fpm(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fpm"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Every file below `dir`, relative to it.
fn tree(dir: &Path) -> Vec<String> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).unwrap().display().to_string());
            }
        }
    }
    out.sort();
    out
}

#[test]
fn mesh_info_reports_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fpm(
        &[
            "mesh-info",
            "--mesh",
            fixture("cube5.mesh").to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("dimension 3"));
    assert!(text.contains("nodes 8"));
    assert!(text.contains("elements 5"));
    assert!(text.contains("boundary set zmax: 2 facets"));
    assert!(text.contains("dual cells 8"));
}

#[test]
fn missing_mesh_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fpm(&["mesh-info", "--mesh", "no/such.mesh"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no/such.mesh"));
}

#[test]
fn bar_solve_writes_only_under_the_output_dir() {
    let tmp = tempfile::tempdir().unwrap();
    for f in ["bar_extension.json", "bar125.mesh"] {
        std::fs::copy(fixture(f), tmp.path().join(f)).unwrap();
    }
    let o = fpm(
        &[
            "solve",
            "--config",
            "bar_extension.json",
            "--out",
            "run",
            "--log",
            "progress.csv",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        tree(tmp.path()),
        [
            "bar125.mesh",
            "bar_extension.json",
            "run/progress.csv",
            "run/report.json",
            "run/solution.vtk"
        ]
    );

    let vtk = std::fs::read_to_string(tmp.path().join("run/solution.vtk")).unwrap();
    let data = vtk.split("VECTORS displacement double\n").nth(1).unwrap();
    let ux: Vec<f64> = data
        .lines()
        .map(|l| l.split_whitespace().next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(ux.len(), 125);
    assert_eq!(ux.iter().cloned().fold(f64::MIN, f64::max), 2.0);
    assert_eq!(ux.iter().cloned().fold(f64::MAX, f64::min), 0.0);

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("run/report.json")).unwrap())
            .unwrap();
    assert_eq!(report["status"]["kind"], "converged");
    let log = std::fs::read_to_string(tmp.path().join("run/progress.csv")).unwrap();
    assert!(log.starts_with("step,time,load_factor,max_speed,ke\n100,"));
}

#[test]
fn escaping_log_path_and_bad_values_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = std::fs::read_to_string(fixture("bar_extension.json"))
        .unwrap()
        .replace("\"penalty\": 20.0", "\"penalty\": -1.0")
        .replace("\"nu\": 0.45", "\"nu\": 0.5");
    std::fs::write(tmp.path().join("bad.json"), cfg).unwrap();
    std::fs::copy(fixture("bar125.mesh"), tmp.path().join("bar125.mesh")).unwrap();
    let o = fpm(
        &["solve", "--config", "bad.json", "--log", "../escape.csv"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(
        err.contains("penalty") && err.contains("nu") && err.contains("escape.csv"),
        "{err}"
    );
    assert_eq!(tree(tmp.path()), ["bad.json", "bar125.mesh"]);
}

#[test]
fn unknown_boundary_set_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = std::fs::read_to_string(fixture("bar_extension.json"))
        .unwrap()
        .replace("\"xmax\"", "\"right\"");
    std::fs::write(tmp.path().join("c.json"), cfg).unwrap();
    std::fs::copy(fixture("bar125.mesh"), tmp.path().join("bar125.mesh")).unwrap();
    let o = fpm(&["solve", "--config", "c.json"], tmp.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("unknown boundary set 'right'"));
}

#[test]
fn unknown_case_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fpm(&["bench", "--case", "sphere", "--out", "b"], tmp.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(tree(tmp.path()).is_empty());
}
