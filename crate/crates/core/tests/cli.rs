use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_framecode"));
    cmd.args(args);
    if let Some(t) = threads {
        cmd.env("FRAMECODE_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn without_timestamp(text: &str) -> String {
    text.lines()
        .filter(|l| !l.contains("generated_at"))
        .collect::<Vec<_>>()
        .join("\n")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn gen_writes_frame_and_reports_etf() {
    let dir = tempfile::tempdir().unwrap();
    let frame = dir.path().join("qr7.txt");
    let out = run(&["gen", "--family", "ncp", "--n", "7", "--powers", "qr", "--out", frame.to_str().unwrap()], None);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["result"]["properties"]["equiangular"], Value::Bool(true));
    assert_eq!(doc["result"]["m"], 3);
    assert_eq!(doc["metadata"]["config"]["source"]["powers"], "qr");
    assert!(read(&frame).starts_with("3 7\n"));
}

#[test]
fn validation_errors_exit_2_and_name_the_flag() {
    let cases: [(&[&str], &str); 5] = [
        (&["noiseamp", "--family", "uspc", "--n", "8", "--m", "4", "--k", "2"], "--k"),
        (&["noiseamp", "--family", "uspc", "--n", "8", "--m", "4", "--bogus", "1"], "--bogus"),
        (&["sweep", "--m", "5", "--inv-gamma", "4:2", "--k-over-n", "0.5"], "--inv-gamma"),
        (&["simulate", "--family", "uspc", "--n", "8", "--m", "4", "--k", "6", "--noise", "bits:99"], "--noise"),
        (&["gen", "--family", "ncp", "--n", "8", "--powers", "0,1,2", "--out", "/dev/null"], "--powers"),
    ];
    for (args, flag) in cases {
        let out = run(args, None);
        assert_eq!(code(&out), 2, "{args:?}: {}", stderr(&out));
        assert!(stderr(&out).contains(flag), "{args:?}: {}", stderr(&out));
    }
}

#[test]
fn runtime_errors_exit_3() {
    let out = run(&["noiseamp", "--frame", "/nonexistent/frame.txt", "--k", "3"], None);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "2 2\n1 0\n").unwrap();
    let out = run(&["noiseamp", "--frame", bad.to_str().unwrap(), "--k", "2"], None);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn sweep_csv_is_reproducible_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "4", "4"] {
        let path = dir.path().join("sweep.csv");
        let out = run(
            &[
                "sweep", "--m", "6", "--inv-gamma", "2:4", "--k-over-n", "0.75", "--candidates", "3",
                "--trials", "50", "--seed", "9", "--out", path.to_str().unwrap(),
            ],
            Some(threads),
        );
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        outputs.push(read(&path));
    }
    let text = &outputs[0];
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert!(header.starts_with("gamma_inv,family,mean_amp,mp_benchmark,manova_benchmark"));
    assert!(text.lines().any(|l| l.starts_with("# config: ") && l.contains("\"trials\":50")));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 3 * 3);
    for other in &outputs[1..] {
        assert_eq!(without_timestamp(text), without_timestamp(other));
    }
}

#[test]
fn compare_reports_metrics_for_both_frames() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.json");
    assert_eq!(code(&run(&["gen", "--family", "uspc", "--n", "12", "--m", "5", "--out", a.to_str().unwrap()], None)), 0);
    assert_eq!(
        code(&run(&["gen", "--family", "ncp", "--n", "12", "--m", "5", "--powers", "0,1,3,6,8", "--out", b.to_str().unwrap()], None)),
        0
    );
    let report = dir.path().join("cmp.json");
    let args = [
        "compare", "--frame-a", a.to_str().unwrap(), "--frame-b", b.to_str().unwrap(), "--m", "5", "--n", "12",
        "--k", "9", "--noise", "gaussian:0.001", "--trials", "20", "--h", "40", "--l", "3", "--out",
        report.to_str().unwrap(),
    ];
    let out = run(&args, None);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let doc: Value = serde_json::from_str(&read(&report)).unwrap();
    for frame in ["frame_a", "frame_b"] {
        for key in ["mse", "rel_frobenius", "kappa_mean", "kappa_min", "kappa_max"] {
            assert!(doc["result"][frame][key].is_number(), "{frame}.{key}");
        }
    }
    let first = read(&report);
    assert_eq!(code(&run(&args, Some("1"))), 0);
    assert_eq!(without_timestamp(&first), without_timestamp(&read(&report)));

    let wrong = run(&["compare", "--frame-a", a.to_str().unwrap(), "--frame-b", b.to_str().unwrap(), "--m", "6", "--k", "9"], None);
    assert_eq!(code(&wrong), 2);
}

#[test]
fn search_and_spectrum_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let best = dir.path().join("best.txt");
    let log = dir.path().join("log.csv");
    let out = run(
        &[
            "search", "--family", "ncp", "--n", "11", "--m", "5", "--k", "8", "--candidates", "4", "--trials", "30",
            "--inject-qr", "--best-frame", best.to_str().unwrap(), "--out", log.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = read(&log);
    assert!(text.contains("index,code,mean_amp,stddev,max_amp,best"));
    assert!(read(&best).starts_with("5 11\n"));

    let spec = run(
        &["spectrum", "--frame", best.to_str().unwrap(), "--k", "8", "--trials", "30", "--bins", "10"],
        None,
    );
    assert_eq!(code(&spec), 0, "{}", stderr(&spec));
    let doc: Value = serde_json::from_slice(&spec.stdout).unwrap();
    assert_eq!(doc["result"]["histogram"].as_array().unwrap().len(), 10);
    assert_eq!(doc["result"]["eigenvalue_count"], 150);
}

#[test]
fn noiseamp_reports_literal_reading_diagnostic() {
    let out = run(&["noiseamp", "--family", "uspc", "--n", "10", "--m", "5", "--k", "10", "--trials", "5"], None);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    let mean = doc["result"]["estimate"]["mean"].as_f64().unwrap();
    assert!((mean - 0.5).abs() < 1e-12);
    let literal = doc["result"]["mean_amp_per_response"].as_f64().unwrap();
    assert!((literal - 0.25).abs() < 1e-12);
}
