use std::fs;
use std::path::PathBuf;

use optcert::cli::{run_from_args, EXIT_ERROR, EXIT_FAIL, EXIT_PASS};
use serde_json::Value;

fn problem(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("problems")
        .join(name)
        .display()
        .to_string()
}

fn run(args: &[&str], out: &std::path::Path) -> (i32, Option<Value>) {
    let mut all = vec!["optcert".to_string()];
    all.extend(args.iter().map(|s| s.to_string()));
    all.extend(["--out".to_string(), out.display().to_string()]);
    let code = run_from_args(all);
    let report = fs::read_to_string(out)
        .ok()
        .map(|t| serde_json::from_str(&t).unwrap());
    (code, report)
}

#[test]
fn certify_fj_passes_on_ex_fj() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fj.json");
    let (code, report) = run(&["certify-fj", &problem("ex_fj.toml")], &out);
    let report = report.unwrap();
    assert_eq!(code, EXIT_PASS);
    assert_eq!(report["command"], "certify-fj");
    assert_eq!(report["verdict"], "pass");
    assert_eq!(report["results"]["gamma"]["source"], "threshold+1");
    assert_eq!(report["problem_digest"].as_str().unwrap().len(), 64);
    for key in ["config", "results", "warnings", "timestamp"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn violated_direction_gives_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("lin.json");
    let (code, report) = run(
        &[
            "certify-fj",
            &problem("linear_unconstrained.toml"),
            "--gamma",
            "1",
        ],
        &out,
    );
    assert_eq!(code, EXIT_FAIL);
    let report = report.unwrap();
    assert_eq!(report["verdict"], "fail");
    assert_eq!(report["results"]["violated_directions"][0][0], -1.0);
}

#[test]
fn penalty_path_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("path.json");
    let (code, report) = run(&["penalty-path", &problem("ex_pen.toml")], &out);
    assert_eq!(code, EXIT_PASS);
    assert_eq!(report.unwrap()["results"]["threshold_s"], 1.0);
    let csv = fs::read_to_string(dir.path().join("path.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("gamma,x1,x2,min_value,dist_to_xbar"));
    assert_eq!(lines.count(), 13);
}

#[test]
fn check_cq_requires_a() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cq.json");
    let (code, report) = run(&["check-cq", &problem("ex_pen.toml")], &out);
    assert_eq!(code, EXIT_ERROR);
    assert!(report.is_none());
}

#[test]
fn invalid_inputs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.json");
    let cases: [&[&str]; 6] = [
        &["certify-fj", "/nonexistent/problem.toml"],
        &["certify-fj", &problem("ex_fj.toml"), "--gamma", "-1"],
        &["penalty-path", &problem("ex_pen.toml"), "--grid-step", "0"],
        &[
            "derivative",
            &problem("ex_pen.toml"),
            "--direction",
            "1,0,0",
        ],
        &["derivative", &problem("ex_pen.toml"), "--target", "g7"],
        &["frobnicate", &problem("ex_pen.toml")],
    ];
    for args in cases {
        assert_eq!(run(args, &out).0, EXIT_ERROR, "{args:?}");
    }
}

#[test]
fn malformed_problem_file_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.toml");
    fs::write(
        &file,
        "[problem]\ndim = 1\nobjective = \"x1 +\"\n[candidate]\npoint = [0]\ndelta = 1\n",
    )
    .unwrap();
    let out = dir.path().join("x.json");
    assert_eq!(
        run(&["tangent", file.to_str().unwrap()], &out).0,
        EXIT_ERROR
    );
}

#[test]
fn derivative_with_explicit_direction() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.json");
    let (code, report) = run(
        &[
            "derivative",
            &problem("abs.toml"),
            "--direction",
            "-2",
            "--target",
            "f",
        ],
        &out,
    );
    assert_eq!(code, EXIT_PASS);
    let row = &report.unwrap()["results"]["per_direction"][0];
    assert_eq!(row["direction"][0], -1.0);
    let v = row["lower_hadamard"]["value"].as_f64().unwrap();
    assert!((v - 1.0).abs() < 5e-2);
}

#[test]
fn tangent_reports_off_cone_directions() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.json");
    let (code, report) = run(&["tangent", &problem("ex_fj.toml"), "--set", "G"], &out);
    assert_eq!(code, EXIT_PASS);
    let rows = report.unwrap()["results"]["per_direction"]
        .as_array()
        .unwrap()
        .clone();
    let inside: Vec<(f64, bool)> = rows
        .iter()
        .map(|r| {
            (
                r["direction"][0].as_f64().unwrap(),
                r["in_cone"].as_bool().unwrap(),
            )
        })
        .collect();
    assert_eq!(inside, vec![(1.0, false), (-1.0, true)]);
}
