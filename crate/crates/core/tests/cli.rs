use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

use lowrank::cli::{
    read_matrix_csv, write_matrix_csv, EXIT_DEGENERATE, EXIT_IO, EXIT_PARSE, EXIT_USAGE,
};
use lowrank::Mat;

fn lowrank(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lowrank"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn rank_zero_fit_leaves_all_of_y_in_the_residual() {
    let dir = tempfile::tempdir().unwrap();
    let x = write(dir.path(), "x.csv", "1,0.5\n0,2\n3,1\n");
    let y = write(dir.path(), "y.csv", "y1,y2,y3\n1,2,3\n-1,0.5,2\n4,0,-2\n");
    let out = dir.path().join("r.json");
    let o = lowrank(&[
        "fit-rr",
        "--x",
        s(&x),
        "--y",
        s(&y),
        "--rank",
        "0",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 1);

    let report = json(&out);
    assert_eq!(report["subcommand"], "fit-rr");
    assert_eq!(report["config"]["rank"], 0);
    let y_norm_sq: f64 = [1.0, 2.0, 3.0, -1.0, 0.5, 2.0, 4.0, 0.0, -2.0]
        .iter()
        .map(|v: &f64| v * v)
        .sum();
    assert_eq!(report["result"]["rss"].as_f64().unwrap(), y_norm_sq);
    assert_eq!(report["result"]["rank_hat"], 0);
}

#[test]
fn zero_design_is_rejected_as_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let x = write(dir.path(), "x.csv", "0,0\n0,0\n");
    let o = lowrank(&["check-design", "--x", s(&x)]);
    assert_eq!(o.status.code(), Some(EXIT_DEGENERATE));
    assert!(String::from_utf8_lossy(&o.stderr).contains("degenerate design"));
}

#[test]
fn error_classes_map_to_their_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        lowrank(&["no-such-command"]).status.code(),
        Some(EXIT_USAGE)
    );
    let missing = dir.path().join("missing.csv");
    assert_eq!(
        lowrank(&["check-design", "--x", s(&missing)]).status.code(),
        Some(EXIT_IO)
    );
    let ragged = write(dir.path(), "r.csv", "1,2\n3\n");
    let o = lowrank(&["check-design", "--x", s(&ragged)]);
    assert_eq!(o.status.code(), Some(EXIT_PARSE));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let help = String::from_utf8_lossy(&lowrank(&["--help"]).stdout).into_owned();
    for code in ["2", "3", "4", "5", "6", "7"] {
        assert!(
            help.contains(&format!("  {code}  ")),
            "--help lacks exit code {code}"
        );
    }
}

#[test]
fn check_design_reports_summary_fields() {
    let dir = tempfile::tempdir().unwrap();
    let x = write(dir.path(), "x.csv", "2,0\n0,1\n0,0\n");
    let out = dir.path().join("d.json");
    let o = lowrank(&[
        "check-design",
        "--x",
        s(&x),
        "--mu-max",
        "1",
        "--eta-max",
        "2",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success());
    let r = &json(&out)["result"];
    assert_eq!(r["q"], 2);
    assert!((r["eta"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert!((r["mu"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(r["assumption1"]["holds"], true);
    assert_eq!(r["ri_property"], true);

    let o = lowrank(&["check-design", "--x", s(&x), "--out", s(&out)]);
    assert!(o.status.success());
    assert!(json(&out)["result"]["assumption1"].is_null());
}

#[test]
fn simulated_data_flows_through_fit_bound_and_select() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let o = lowrank(&[
        "gen-data",
        "--dir",
        s(&data),
        "--seed",
        "3",
        "--n",
        "10",
        "--p",
        "6",
        "--t",
        "4",
        "--r0",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (x, y, a0) = (data.join("x.csv"), data.join("y.csv"), data.join("a0.csv"));
    assert_eq!(read_matrix_csv(&x).unwrap().shape(), (10, 6));

    let out = dir.path().join("nnp.json");
    let o = lowrank(&[
        "fit-nnp",
        "--x",
        s(&x),
        "--y",
        s(&y),
        "--lambda",
        "2",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success());
    let fit = json(&out);
    assert_eq!(fit["result"]["converged"], true);
    for key in ["rss", "nuclear_norm", "rank_hat", "iterations", "objective"] {
        assert!(!fit["result"][key].is_null(), "missing {key}");
    }

    let out = dir.path().join("bound.json");
    let o = lowrank(&[
        "bound",
        "--x",
        s(&x),
        "--a0",
        s(&a0),
        "--y",
        s(&y),
        "--k",
        "2",
        "--sigma",
        "1",
        "--constant",
        "relaxed",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = &json(&out)["result"];
    for key in [
        "lhs",
        "rhs",
        "argmin_r",
        "lambda_used",
        "lambda_min_event",
        "holds",
        "constant_mode",
    ] {
        assert!(!r["oracle"][key].is_null(), "missing oracle.{key}");
    }
    assert_eq!(r["oracle"]["constant_mode"], "relaxed");
    assert!(r["calibrated"]["per_rank_term"].as_f64().unwrap() > 0.0);

    let o = lowrank(&["bound", "--x", s(&x), "--a0", s(&a0), "--k", "2"]);
    assert_eq!(o.status.code(), Some(3));

    let out = dir.path().join("sel.json");
    for criterion in ["crit", "crit-log"] {
        let o = lowrank(&[
            "select-rank",
            "--x",
            s(&x),
            "--y",
            s(&y),
            "--criterion",
            criterion,
            "--sigma",
            "1",
            "--out",
            s(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let r = &json(&out)["result"];
        assert_eq!(r["penalty_placeholder"], true);
        assert_eq!(r["values"].as_array().unwrap().len(), 5);
    }
    let o = lowrank(&[
        "select-rank",
        "--x",
        s(&x),
        "--y",
        s(&y),
        "--criterion",
        "crit",
    ]);
    assert_eq!(o.status.code(), Some(3), "crit without --sigma");
}

#[test]
fn monte_carlo_report_is_self_describing_and_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mc.json");
    let args = [
        "monte-carlo",
        "--trials",
        "6",
        "--seed",
        "9",
        "--constant",
        "relaxed",
        "--out",
        s(&out),
    ];
    assert!(lowrank(&args).status.success());
    let first = std::fs::read(&out).unwrap();
    assert!(lowrank(&args).status.success());
    assert_eq!(first, std::fs::read(&out).unwrap());

    let report: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(report["config"]["trials"], 6);
    assert_eq!(report["config"]["trial"]["seed"], 9);
    assert_eq!(report["config"]["trial"]["n"], 15);
    for key in [
        "trials",
        "violation_count",
        "event_fail_count",
        "bound_probability",
    ] {
        assert!(!report["result"][key].is_null(), "missing {key}");
    }
}

#[test]
fn csv_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    let m = Mat::from_rows(&[
        [0.1, -2.5e-300, 1.0 / 3.0],
        [std::f64::consts::PI, 7e22, -0.0],
        [1.0, 2.0, 123_456_789.123_456_79],
        [f64::MIN_POSITIVE, f64::MAX, -1e-5],
        [5.0, 6.0, 7.0],
    ])
    .unwrap();
    write_matrix_csv(&m, &path).unwrap();
    let back = read_matrix_csv(&path).unwrap();
    for (a, b) in m.to_row_major().iter().zip(back.to_row_major()) {
        assert!((a - b).abs() <= 1e-15 * a.abs());
    }
}
