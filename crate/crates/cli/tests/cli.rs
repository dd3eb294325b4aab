use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use ustat_cs::boundaries::g_inv;
use ustat_cs::kernels::{KernelId, Point};
use ustat_cs::sequences::{CsRecord, Method};
use ustat_cs::simharness::ExperimentConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ustat-cs"))
}

fn run_with_stdin(args: &[&str], stdin: &str) -> Output {
    let mut child = bin()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    // The process may exit before reading its input.
    let _ = child.stdin.take().unwrap().write_all(stdin.as_bytes());
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn records(o: &Output) -> Vec<CsRecord> {
    let text = stdout(o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(CsRecord::CSV_HEADER));
    lines.map(|l| CsRecord::from_csv_row(l).unwrap()).collect()
}

#[test]
fn variance_file_matches_hand_enumeration() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("x.csv");
    fs::write(&data, "x\n1\n2\n4\n").unwrap();
    let o = bin()
        .args(["cs", "--kernel", "variance", "--m", "2", "--has-header", "--input"])
        .arg(&data)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let recs = records(&o);
    assert_eq!(recs.iter().map(|r| r.n).collect::<Vec<_>>(), vec![2, 3]);
    // h(x, y) = (x - y)^2 / 2 over the pairs (1,2), (1,4), (2,4).
    assert_eq!(recs[0].center, 0.5);
    assert!((recs[1].center - (0.5 + 4.5 + 2.0) / 3.0).abs() < 1e-15);
    // Leave-one-out means (2.5, 1.25, 3.25).
    let q: [f64; 3] = [2.5, 1.25, 3.25];
    let sigma2 = q.iter().map(|v| v * v).sum::<f64>() / 3.0 - (7.0f64 / 3.0).powi(2);
    assert!((recs[1].sigma_hat.unwrap() - sigma2.sqrt()).abs() < 1e-14);
    assert!(recs.iter().all(|r| r.method == Method::AsympCsGm));
}

#[test]
fn empty_or_short_input_gives_header_only() {
    for input in ["", "1\n2\n"] {
        let o = run_with_stdin(&["cs", "--kernel", "gmd", "--m", "5"], input);
        assert!(o.status.success());
        assert_eq!(stdout(&o), format!("{}\n", CsRecord::CSV_HEADER));
    }
}

#[test]
fn malformed_rows_exit_3_with_row_number() {
    for (kernel, input, row) in [
        ("gmd", "1\n2\nabc\n", "row 3"),
        ("mmd-gauss", "1,2\n3\n", "row 2"),
        ("spatial-kendall", "1,2\n\n1,inf\n", "row 3"),
    ] {
        let o = run_with_stdin(&["cs", "--kernel", kernel, "--m", "2"], input);
        assert_eq!(o.status.code(), Some(3), "{kernel}");
        assert!(stderr(&o).contains(row), "{}", stderr(&o));
    }
}

#[test]
fn invalid_flags_exit_2() {
    let cases: &[&[&str]] = &[
        &["cs", "--kernel", "gmd", "--m", "10", "--alpha", "1.5"],
        &["cs", "--kernel", "gmd", "--m", "0"],
        &["cs", "--kernel", "nope", "--m", "10"],
        &["cs", "--kernel", "gmd", "--m", "10", "--eta", "1"],
        &["cs", "--kernel", "gmd", "--m", "10", "--boundary", "xyz"],
        &["cs", "--kernel", "mmd-gauss", "--m", "10", "--weights", "poly:1"],
        &["cs", "--kernel", "mmd-gauss", "--m", "10", "--trunc-a", "1.5"],
        &["cs", "--kernel", "mmd-gauss", "--m", "10", "--method", "Classical-Test", "--draws", "10"],
        &["cs", "--kernel", "gmd", "--m", "10", "--input", "/nonexistent/data.csv"],
        &["boundary", "--m", "10", "--n-max", "5"],
        &["simulate", "--config", "/nonexistent/config.json"],
        &["cs", "--kernel", "gmd"],
    ];
    for args in cases {
        let o = run_with_stdin(args, "1\n2\n3\n");
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
        assert_eq!(stderr(&o).trim().lines().count(), 1, "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn output_round_trips_and_is_deterministic() {
    let data: String = (0..300).map(|i| format!("{},{}\n", (i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
    let args = [
        "cs",
        "--kernel",
        "mmd-gauss",
        "--m",
        "50",
        "--method",
        "SAGE-GM,SAGE-LIL,Classical-Test",
        "--draws",
        "2000",
        "--seed",
        "9",
    ];
    let a = run_with_stdin(&args, &data);
    let b = run_with_stdin(&args, &data);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert!(stderr(&a).contains("heuristic"));
    let recs = records(&a);
    assert_eq!(recs.len(), 3 * 251);
    for r in &recs {
        assert_eq!(CsRecord::from_csv_row(&r.to_csv_row()).unwrap(), *r);
        assert_eq!(r.hi, f64::INFINITY);
    }
}

#[test]
fn sequential_test_decisions() {
    let data: String = (0..200).map(|i| format!("{}\n", (i as f64 * 1.7).sin())).collect();
    let o = run_with_stdin(&["test", "--kernel", "gmd", "--m", "20", "--theta0", "-5"], &data);
    assert!(o.status.success());
    let err = stderr(&o);
    assert!(err.contains("reject=true first_rejection_n=20"), "{err}");

    // Constant data: U_n = theta0 = 0 at every n.
    let o = run_with_stdin(
        &["test", "--kernel", "gmd", "--m", "5", "--method", "AsympCS-LIL,Classical-CI"],
        &"0.3\n".repeat(50),
    );
    let err = stderr(&o);
    assert_eq!(err.matches("reject=false first_rejection_n=none").count(), 2, "{err}");
    assert!(records(&o).iter().all(|r| r.lo == 0.0 && r.hi == 0.0));
}

fn boundary_table(args: &[&str]) -> Vec<(u64, String, f64)> {
    let o = bin().arg("boundary").args(args).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    stdout(&o)
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].to_string(), f[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn boundary_table_closed_form_and_alpha_order() {
    let t = boundary_table(&["--m", "100", "--n-max", "1000", "--boundary", "gm"]);
    assert_eq!(t[0].0, 100);
    assert!((t[0].2 - g_inv(0.05).unwrap() / 10.0).abs() < 1e-14);
    assert_eq!(t.last().unwrap().0, 1000);
    assert!(t.windows(2).all(|w| w[0].2 > w[1].2));

    let loose = boundary_table(&["--m", "100", "--n-max", "1000", "--alpha", "0.2"]);
    let tight = boundary_table(&["--m", "100", "--n-max", "1000", "--alpha", "0.01"]);
    assert_eq!(loose.len(), tight.len());
    assert!(loose.iter().any(|r| r.1 == "lil") && loose.iter().any(|r| r.1 == "gm"));
    for (a, b) in loose.iter().zip(&tight) {
        assert_eq!((a.0, &a.1), (b.0, &b.1));
        assert!(a.2 < b.2);
    }
}

#[test]
fn spectrum_dump_matches_trace_oracle() {
    let pts: Vec<(f64, f64)> = (0..81).map(|i| ((i as f64 * 0.9).sin(), (i as f64 * 0.4).cos())).collect();
    let data: String = pts.iter().map(|(x, y)| format!("{x},{y}\n")).collect();
    let o = run_with_stdin(&["spectrum", "--kernel", "mmd-gauss", "--weights", "poly:2"], &data);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows: Vec<Vec<f64>> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    // L = floor(81^{1/4}).
    assert_eq!(rows.len(), 3);
    assert!(rows.windows(2).all(|w| w[0][1].abs() >= w[1][1].abs()));

    // Trace of the centered Gram matrix over n: mean of h(X_i, X_i) minus U_n.
    let n = pts.len();
    let h = |i: usize, j: usize| {
        let (a, b) = (Point::Pair(pts[i].0, pts[i].1), Point::Pair(pts[j].0, pts[j].1));
        KernelId::MmdGauss.eval(&a, &b).unwrap()
    };
    let mut pair = 0.0;
    for i in 0..n {
        for j in 0..i {
            pair += h(i, j);
        }
    }
    let u = 2.0 * pair / (n * (n - 1)) as f64;
    let trace = (0..n).map(|i| h(i, i)).sum::<f64>() / n as f64 - u;

    let err = stderr(&o);
    let field = |key: &str, line: &str| -> f64 {
        line.split_whitespace()
            .find_map(|kv| kv.strip_prefix(key))
            .unwrap()
            .parse()
            .unwrap()
    };
    let head = err.lines().find(|l| l.starts_with("n=")).unwrap();
    let total = field("lambda_total=", head);
    assert!((total - trace).abs() < 1e-12, "{total} vs {trace}");
    let plus = err.lines().find(|l| l.starts_with("plus:")).unwrap();
    let contrib: f64 = rows.iter().map(|r| r[3]).sum();
    assert!((contrib - field("g_weighted=", plus)).abs() <= 1e-12 * contrib.abs().max(1e-300));
    let pos: f64 = rows.iter().map(|r| r[1].max(0.0)).sum();
    assert!((pos - field("total=", plus)).abs() <= 1e-12 * pos.max(1e-300));
}

fn write_config(dir: &Path, json: &str) -> std::path::PathBuf {
    let p = dir.join("cfg.json");
    fs::write(&p, json).unwrap();
    p
}

#[test]
fn simulate_smoke_and_rejections() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::gmd_coverage(1, 3);
    cfg.m = 20;
    cfg.n_max = 100;
    let path = write_config(dir.path(), &cfg.to_json());
    let out = dir.path().join("res");
    let o = bin().args(["simulate", "--config"]).arg(&path).arg("--out").arg(&out).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("miscoverage"));
    assert!(out.join("coverage.csv").exists() && out.join("config.json").exists());

    let bad = cfg.to_json().replacen('{', "{\n  \"bogus\": 1,", 1);
    let path = write_config(dir.path(), &bad);
    let o = bin().args(["simulate", "--config"]).arg(&path).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bogus"));

    let path = write_config(dir.path(), &cfg.to_json());
    let o = bin().args(["simulate", "--reps", "0", "--config"]).arg(&path).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}
