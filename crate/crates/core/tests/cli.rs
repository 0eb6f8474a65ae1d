use std::process::Command;

use berger_flow::cli::{run, CSV_HEADER, EXIT_INTEGRATION, EXIT_OK, EXIT_USAGE, EXIT_VERIFY};
use berger_flow::{energy, FlowParams};

fn capture(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(
        std::iter::once("berger-flow").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn rows(csv_text: &str) -> Vec<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(csv_text.as_bytes());
    let header = reader.headers().unwrap().clone();
    assert_eq!(header.iter().collect::<Vec<_>>().join(","), CSV_HEADER);
    reader
        .records()
        .map(|r| {
            r.unwrap()
                .iter()
                .map(|v| v.parse::<f64>().unwrap())
                .collect()
        })
        .collect()
}

#[test]
fn simulate_closed_form_end_point() {
    let (code, out, _) = capture(&[
        "simulate",
        "--flow",
        "collapse",
        "--a",
        "2",
        "--kappa",
        "1",
        "--epsilon",
        "1",
        "--t-end",
        "15",
    ]);
    assert_eq!(code, EXIT_OK);
    let last = rows(&out).pop().unwrap();
    assert_eq!(last[0], 15.0);
    assert!((last[1] - 0.25).abs() <= 1e-8 && (last[2] - 0.25).abs() <= 1e-8);
    assert!(out.trim_end().ends_with("t=1.5000000000000000e1"));
    assert!(out
        .lines()
        .last()
        .unwrap()
        .starts_with("# termination=ReachedTEnd"));
}

#[test]
fn simulate_critical_point_is_static() {
    let (code, out, _) = capture(&[
        "simulate",
        "--flow",
        "normalized",
        "--a",
        "2",
        "--kappa",
        "0.5",
        "--epsilon",
        "1",
        "--t-end",
        "10",
    ]);
    assert_eq!(code, EXIT_OK);
    let root = (2.0 * std::f64::consts::PI.powi(2)).powf(-1.0 / 3.0);
    let rows = rows(&out);
    assert!(rows.len() > 2);
    assert_eq!(rows.last().unwrap()[0], 10.0);
    for r in rows {
        assert!((r[1] - root).abs() <= 1e-10 && (r[2] - root).abs() <= 1e-10);
        assert!((r[3] - 1.0).abs() <= 1e-10);
    }
}

#[test]
fn csv_round_trip_recomputes_columns() {
    let (code, out, _) = capture(&[
        "simulate",
        "--flow",
        "normalized",
        "--a",
        "-2",
        "--kappa",
        "0.5",
        "--epsilon",
        "2.5",
        "--t-end",
        "30",
    ]);
    assert_eq!(code, EXIT_OK);
    let p = FlowParams::normalized(-2.0, 0.5, 2.5).unwrap();
    for r in rows(&out) {
        let (x, y) = (r[1], r[2]);
        let vol = 2.0 * std::f64::consts::PI.powi(2) * x * y * y;
        let e = energy(&p, x, y).unwrap();
        assert!((vol - r[3]).abs() <= 1e-12 * r[3].abs());
        assert!((e - r[4]).abs() <= 1e-12 * r[4].abs());
    }
}

#[test]
fn output_is_deterministic() {
    let args = [
        "simulate",
        "--flow",
        "collapse",
        "--kappa",
        "-1",
        "--epsilon",
        "0.7",
        "--t-end",
        "200",
        "--stride",
        "3",
    ];
    assert_eq!(capture(&args).1, capture(&args).1);
    let portrait = ["portrait", "--grid", "7,5"];
    assert_eq!(capture(&portrait).1, capture(&portrait).1);
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    let (code, out, _) = capture(&["simulate", "--t-end", "3", "--out", path.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    assert!(out.is_empty());
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.starts_with(CSV_HEADER));
    assert!(rows(&text).len() > 3);
}

#[test]
fn portrait_grid_and_seed_blocks() {
    let (code, out, _) = capture(&[
        "portrait",
        "--grid",
        "3,3",
        "--x-range",
        "0.5,1",
        "--y-range",
        "0.5,1",
        "--seeds",
        "",
    ]);
    assert_eq!(code, EXIT_OK);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 10);
    let corner: Vec<f64> = lines[9].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!((corner[0], corner[1]), (1.0, 1.0));
    let h = -std::f64::consts::FRAC_1_SQRT_2;
    assert!((corner[2] - h).abs() < 1e-15 && (corner[3] - h).abs() < 1e-15);
    assert!((corner[4] - 2f64.sqrt() / 32.0).abs() < 1e-15);

    let (code, out, _) = capture(&[
        "portrait",
        "--grid",
        "3,3",
        "--x-range",
        "0.5,1",
        "--y-range",
        "0.5,1",
    ]);
    assert_eq!(code, EXIT_OK);
    let blocks: Vec<&str> = out.split("\n\n").collect();
    assert_eq!(blocks.len(), 3);
    assert!(blocks[1].contains("# seed=1.0000000000000000e0,1.0000000000000000e0"));
    assert!(blocks[2].contains("# seed=6.6666666666666663e-1,1.0000000000000000e0"));
}

#[test]
fn portrait_rejects_axis_grid() {
    let (code, _, err) = capture(&["portrait", "--x-range", "0,1"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("x-range"), "{err}");
}

#[test]
fn equilibria_json() {
    let (code, out, _) = capture(&["equilibria", "--flow", "normalized", "--kappa", "0.5"]);
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let list = v.as_array().unwrap();
    assert_eq!(list.len(), 2);
    assert!((list[0]["epsilon_star"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-10);
    assert_eq!(list[0]["stability"], "repelling");
    assert_eq!(list[1]["stability"], "attracting");
    let x = list[1]["point"][0].as_f64().unwrap();
    assert!((x - 0.370_018_484_153_678).abs() < 1e-12);

    let (_, out, _) = capture(&["equilibria", "--flow", "normalized", "--kappa", "-0.5"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 1);
    assert_eq!(v[0]["epsilon_star"], 1.0);
}

#[test]
fn verify_filter_and_fault_injection() {
    let (code, out, _) = capture(&["verify", "--filter", "oracle"]);
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["status"], "pass");
    let checks = v["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    assert!(checks
        .iter()
        .all(|c| c["name"].as_str().unwrap().contains("oracle")));

    let (code, out, _) = capture(&["verify", "--filter", "oracle", "--oracle-tol", "1e-18"]);
    assert_eq!(code, EXIT_VERIFY);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["status"], "fail");
}

#[test]
fn full_verify_passes() {
    let (code, out, _) = capture(&["verify"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(code, EXIT_OK, "{out}");
    assert!(v["checks"].as_array().unwrap().len() >= 12);
    assert_eq!(v["params"]["epsilon"], 1.0);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_berger-flow");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap();

    let ok = status(&["simulate", "--t-end", "1"]);
    assert_eq!(ok.status.code(), Some(EXIT_OK));

    let bad = status(&["simulate", "--epsilon", "-1", "--t-end", "1"]);
    assert_eq!(bad.status.code(), Some(EXIT_USAGE));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("--epsilon"));

    let missing = status(&["simulate"]);
    assert_eq!(missing.status.code(), Some(EXIT_USAGE));

    let underflow = status(&["simulate", "--collapse-tol", "1e-300", "--t-end", "20"]);
    assert_eq!(underflow.status.code(), Some(EXIT_INTEGRATION));
    assert!(String::from_utf8_lossy(&underflow.stdout).contains("# termination=StepUnderflow"));

    let fault = status(&["verify", "--filter", "max_error", "--oracle-tol", "1e-18"]);
    assert_eq!(fault.status.code(), Some(EXIT_VERIFY));

    let help = status(&["--help"]);
    assert_eq!(help.status.code(), Some(EXIT_OK));
}
