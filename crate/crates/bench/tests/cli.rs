use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tensormin_bench::{read_trace_csv, Summary};

const BIN: &str = env!("CARGO_BIN_EXE_tensormin");

fn tensormin(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn run_into(dir: &Path, args: &[&str]) -> Output {
    let out_dir = dir.to_str().unwrap();
    let mut all = vec!["run", "--out", out_dir];
    all.extend_from_slice(args);
    tensormin(&all)
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// One small run per scheme; goldens are rewritten with `UPDATE_GOLDEN=1`.
const GOLDEN: &[(&str, &[&str])] = &[
    ("alg1", &["--instance", "quadratic:n=6,cond=10", "--scheme", "alg1", "--eps", "1e-6", "--seed", "1", "--record-x"]),
    ("alg2", &["--instance", "quadratic:n=6,cond=10", "--scheme", "alg2", "--eps", "1e-6", "--seed", "1", "--record-x"]),
    (
        "alg3",
        &["--instance", "power_norm:n=5,q=3", "--scheme", "alg3", "--nu", "1", "--eps", "1e-6", "--composite", "l1:weight=0.1"],
    ),
    (
        "alg4",
        &["--instance", "power_norm:n=5,q=3", "--scheme", "alg4", "--nu", "1", "--eps", "1e-6", "--composite", "box:lo=-0.5,hi=0.5"],
    ),
    ("alg5", &["--instance", "hard:n=8,k=6", "--scheme", "alg5", "--nu", "1", "--eps", "1e-4", "--iterations", "20"]),
    ("alg6", &["--instance", "power_norm:n=5,q=3", "--scheme", "alg6", "--nu", "1", "--eps", "1e-4"]),
    ("algA", &["--instance", "hard:n=8,k=6", "--scheme", "algA", "--nu", "1", "--eps", "1e-4", "--iterations", "15"]),
];

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-12)
}

#[test]
fn golden_traces() {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for (name, args) in GOLDEN {
        let dir = tempfile::tempdir().unwrap();
        let out = run_into(dir.path(), args);
        assert_eq!(code(&out), 0, "{name}: {}", String::from_utf8_lossy(&out.stderr));
        let produced = dir.path().join("trace.csv");
        let golden = golden_dir().join(format!("{name}.csv"));
        if update {
            fs::copy(&produced, &golden).unwrap();
            continue;
        }
        let got = read_trace_csv(fs::File::open(&produced).unwrap()).unwrap();
        let want = read_trace_csv(fs::File::open(&golden).unwrap()).unwrap();
        assert_eq!(got.len(), want.len(), "{name}: row count");
        for (i, (g, w)) in got.iter().zip(&want).enumerate() {
            assert_eq!((g.iter, g.inner_trials, g.oracle_calls_cum, g.tag), (w.iter, w.inner_trials, w.oracle_calls_cum, w.tag), "{name} row {i}");
            assert!(close(g.f_value, w.f_value), "{name} row {i}: f {} vs {}", g.f_value, w.f_value);
            assert!(close(g.grad_norm, w.grad_norm), "{name} row {i}: grad {} vs {}", g.grad_norm, w.grad_norm);
            assert!(close(g.h, w.h), "{name} row {i}: H");
            assert_eq!(g.htilde.is_some(), w.htilde.is_some());
            if let (Some(gx), Some(wx)) = (&g.x, &w.x) {
                assert!(gx.iter().zip(wx.iter()).all(|(a, b)| close(*a, *b)), "{name} row {i}: x");
            }
        }
    }
}

#[test]
fn run_writes_summary_and_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["--instance", "log_sum_exp:n=4", "--scheme", "alg2", "--eps", "1e-6", "--x0", "random", "--seed", "9"];
    assert_eq!(code(&run_into(a.path(), &args)), 0);
    assert_eq!(code(&run_into(b.path(), &args)), 0);
    for file in ["trace.csv", "summary.json", "accel.json"] {
        assert_eq!(fs::read(a.path().join(file)).unwrap(), fs::read(b.path().join(file)).unwrap(), "{file}");
    }
    let summary: Summary = serde_json::from_str(&fs::read_to_string(a.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.seed, 9);
    assert!(summary.min_grad_norm <= 1e-6);
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["--instance", "nope:n=3", "--scheme", "alg1", "--eps", "1e-6"][..],
        &["--instance", "quadratic:n=3", "--scheme", "alg1", "--eps", "-1"],
        &["--instance", "quadratic:n=3", "--scheme", "alg9", "--eps", "1e-6"],
        &["--instance", "quadratic:n=3", "--scheme", "alg1", "--eps", "1e-6", "--composite", "l1:weight=1"],
        &["--instance", "quadratic:n=3", "--scheme", "alg1", "--eps", "1e-6", "--nu", "abc"],
    ] {
        let out = run_into(dir.path(), args);
        assert_eq!(code(&out), 1, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(code(&tensormin(&["frobnicate"])), 1);
    assert_eq!(code(&tensormin(&["--help"])), 0);
}

#[test]
fn runtime_failures_exit_with_two() {
    let out = tensormin(&["replay", "--trace", "/nonexistent/trace.csv"]);
    assert_eq!(code(&out), 2);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("trace.csv");
    fs::write(&bad, "not,a,trace\n").unwrap();
    assert_eq!(code(&tensormin(&["slope", "--trace", bad.to_str().unwrap(), "--from", "0", "--to", "3"])), 2);
}

#[test]
fn replay_accepts_genuine_and_flags_tampered_traces() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--instance", "quadratic:n=6,cond=10", "--scheme", "alg1", "--eps", "1e-8", "--seed", "2"];
    assert_eq!(code(&run_into(dir.path(), &args)), 0);
    let trace = dir.path().join("trace.csv");
    let t = trace.to_str().unwrap();
    let out = tensormin(&["replay", "--trace", t]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let json = tensormin(&["replay", "--trace", t, "--bounds", "oracle_calls", "--json"]);
    assert_eq!(code(&json), 0);
    let reports: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 1);

    // inflate the oracle count of the last row far beyond the bound
    let text = fs::read_to_string(&trace).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let last = lines.pop().unwrap();
    let mut cols: Vec<&str> = last.split(',').collect();
    cols[6] = "1000000000";
    lines.push(cols.join(","));
    fs::write(&trace, lines.join("\n") + "\n").unwrap();
    let out = tensormin(&["replay", "--trace", t, "--bounds", "oracle_calls"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(code(&tensormin(&["replay", "--trace", t, "--bounds", "no_such_bound"])), 1);
}

#[test]
fn slope_and_lowerbound_print_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--instance", "hard:n=12,k=10", "--scheme", "alg1", "--nu", "1", "--eps", "1e-3", "--max-iters", "40"];
    assert_eq!(code(&run_into(dir.path(), &args)), 0);
    let t = dir.path().join("trace.csv");
    let out = tensormin(&["slope", "--trace", t.to_str().unwrap(), "--from", "1", "--to", "8"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let s: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert!(s.is_finite());

    let lb = |t: &str| -> f64 {
        let out = tensormin(&["lowerbound", "--p", "2", "--nu", "1", "--t", t, "--mode", "distance"]);
        assert_eq!(code(&out), 0);
        String::from_utf8(out.stdout).unwrap().trim().parse().unwrap()
    };
    assert!(lb("20") > lb("10"));
    assert_eq!(code(&tensormin(&["lowerbound", "--p", "2", "--nu", "1", "--t", "5", "--mode", "sideways"])), 1);
}
