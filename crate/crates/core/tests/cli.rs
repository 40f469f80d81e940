use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn splitctl(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_splitctl"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn summary(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON summary on stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn solve_reproduces_reported_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = splitctl(
        &[
            "solve", "--method", "aac", "--alpha", "1", "--beta", "0.8617", "--a", "2.5", "--n",
            "2000", "--eps", "1e-8",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = summary(&out);
    assert_eq!(v["iterations"], 64);
    assert_eq!(v["converged"], true);
    assert_eq!(v["params"]["beta"], 0.8617);

    let out = splitctl(
        &[
            "solve", "--method", "dykstra", "--a", "2.5", "--n", "2000", "--eps", "1e-8",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(summary(&out)["iterations"], 530);
}

#[test]
fn solve_writes_control_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = splitctl(
        &[
            "solve",
            "--method",
            "dr",
            "--lambda",
            "0.7466",
            "--n",
            "50",
            "--out",
            "u.csv",
            "--trace",
            "trace.csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let iterations = summary(&out)["iterations"].as_u64().unwrap() as usize;

    let control = std::fs::read_to_string(dir.path().join("u.csv")).unwrap();
    let mut lines = control.lines();
    assert_eq!(lines.next(), Some("t,u"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (t, u) = l.split_once(',').unwrap();
            (t.parse().unwrap(), u.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 50);
    assert_eq!(rows[1].0, 0.02);
    assert!(rows.iter().all(|(_, u)| u.abs() <= 2.5));

    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("k,t,u\n"));
    assert_eq!(trace.lines().count(), 1 + 50 * iterations);

    // Restarting from the written control converges immediately.
    let out = splitctl(
        &[
            "solve",
            "--method",
            "dr",
            "--lambda",
            "0.7466",
            "--n",
            "50",
            "--init-file",
            "u.csv",
            "--out",
            "again.csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}

#[test]
fn non_convergence_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = splitctl(
        &[
            "solve",
            "--method",
            "map",
            "--a",
            "2.4",
            "--n",
            "200",
            "--max-iter",
            "500",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let v = summary(&out);
    assert_eq!(v["converged"], false);
    assert_eq!(v["iterations"], 500);
}

#[test]
fn invalid_flags_exit_one_and_name_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[(&[&str], &str)] = &[
        (&["solve", "--method", "map", "--a", "0"], "a"),
        (
            &["solve", "--method", "dykstra", "--lambda", "0.5"],
            "--lambda",
        ),
        (&["solve", "--method", "dr"], "--lambda"),
        (&["solve", "--method", "dr", "--lambda", "1.5"], "lambda"),
        (
            &["solve", "--method", "aac", "--beta", "0.5", "--alpha", "0"],
            "alpha",
        ),
        (&["solve", "--method", "nope"], "--method"),
        (&["solve", "--method", "map", "--eps", "0"], "eps"),
        (&["sweep", "--method", "dr", "--a-list", ""], "--a-list"),
        (
            &["sweep", "--method", "dr", "--lambda-grid", "0.9:0.1:0.1"],
            "grid",
        ),
        (
            &["sweep", "--method", "aac", "--lambda-grid", "0.1:0.5:0.1"],
            "--lambda-grid",
        ),
        (
            &["errors", "--n-list", "3000", "--ref-n", "10000"],
            "nested",
        ),
    ];
    for (args, needle) in cases {
        let out = splitctl(args, dir.path());
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", stderr(&out));
        assert!(stderr(&out).contains(needle), "{args:?}: {}", stderr(&out));
    }
}

#[test]
fn sweep_csv_and_refinement() {
    let dir = tempfile::tempdir().unwrap();
    let out = splitctl(
        &[
            "sweep",
            "--method",
            "aac",
            "--alpha-grid",
            "1:1:1",
            "--beta-grid",
            "0.3:0.7:0.1",
            "--a-list",
            "4",
            "--n",
            "500",
            "--out",
            "s.csv",
            "--refine",
            "--refine-levels",
            "2",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("a,alpha,beta,iterations,converged"));
    assert_eq!(lines.count(), 5);
    assert!(csv.contains("\n4.0,1.0,0.5,2,true\n"), "{csv}");
    let refined: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(refined["a"], 4.0);
    assert!(refined["iterations"].as_u64().unwrap() <= 2);
}

#[test]
fn sweep_to_stdout_marks_non_converged_cells() {
    let dir = tempfile::tempdir().unwrap();
    let out = splitctl(
        &[
            "sweep",
            "--method",
            "dr",
            "--lambda-grid",
            "0.05:0.75:0.7",
            "--a-list",
            "2.5",
            "--n",
            "200",
            "--max-iter",
            "50",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        csv,
        "a,lambda,iterations,converged\n2.5,0.05,,false\n2.5,0.75,,false\n"
    );
}

#[test]
fn errors_builds_reference_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let out = splitctl(
        &[
            "errors",
            "--n-list",
            "100,1000",
            "--methods",
            "dykstra,aac",
            "--ref-n",
            "10000",
            "--reference",
            "ref.bin",
            "--out",
            "errors.csv",
            "--per-iteration",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(dir.path().join("ref.bin").exists());
    let csv = std::fs::read_to_string(dir.path().join("errors.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "method,n,sigma_u,sigma_x,iterations");
    assert_eq!(rows.len(), 5);
    assert!(rows[1].starts_with("dykstra,100,"));
    assert!(rows[4].starts_with("aac,1000,"));
    for row in &rows[1..] {
        let f: Vec<&str> = row.split(',').collect();
        let su: f64 = f[2].parse().unwrap();
        let sx: f64 = f[3].parse().unwrap();
        assert!(su > 0.0 && su < 0.5 && sx > 0.0 && sx <= su, "{row}");
    }
    let trace = std::fs::read_to_string(dir.path().join("trace_aac_1000.csv")).unwrap();
    assert!(trace.starts_with("k,residual,sigma_u,sigma_x\n0,"));
    let last_iterations: usize = rows[4].rsplit(',').next().unwrap().parse().unwrap();
    assert_eq!(trace.lines().count(), 1 + last_iterations);

    // Cached reference is reused; output is byte-identical.
    let again = splitctl(
        &[
            "errors",
            "--n-list",
            "100,1000",
            "--methods",
            "dykstra,aac",
            "--ref-n",
            "10000",
            "--reference",
            "ref.bin",
        ],
        dir.path(),
    );
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(String::from_utf8(again.stdout).unwrap(), csv);
}

#[test]
fn oracle_reports_feasibility() {
    let dir = tempfile::tempdir().unwrap();
    let out = splitctl(&["oracle", "--n", "2000", "--a", "2.4"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(summary(&out)["feasible"], false);

    let out = splitctl(
        &[
            "oracle",
            "--n",
            "2000",
            "--out",
            "r.bin",
            "--control-csv",
            "u.csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = summary(&out);
    assert_eq!(v["feasible"], true);
    assert!(v["c1"].as_f64().unwrap() > 14.0);
    assert!(dir.path().join("r.bin").exists());
    assert!(dir.path().join("u.csv").exists());
}

#[test]
fn emit_config_and_help() {
    let dir = tempfile::tempdir().unwrap();
    let out = splitctl(
        &[
            "sweep",
            "--method",
            "dr",
            "--emit-config",
            "--a-list",
            "2.5,4",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = summary(&out);
    assert_eq!(v["a_list"], serde_json::json!([2.5, 4.0]));
    assert_eq!(v["axes"]["lambda"].as_array().unwrap().len(), 99);

    let out = splitctl(&["--help"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let out = splitctl(&[], dir.path());
    assert_eq!(out.status.code(), Some(1));
}
