//! Command-line surface tests: exit codes, usage errors, output artifacts.

use std::process::Command;

fn attrib(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_attrib"))
        .args(args)
        .output()
        .expect("spawn attrib")
}

#[test]
fn help_exits_zero() {
    let out = attrib(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    for sub in [
        "converge",
        "invert-bench",
        "score",
        "detect",
        "select",
        "gen-dump",
    ] {
        let out = attrib(&[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{sub} --help");
    }
}

#[test]
fn missing_required_flag_is_usage_error() {
    let out = attrib(&["score"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--manifest"), "{stderr}");
    assert!(stderr.to_lowercase().contains("usage"), "{stderr}");
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = attrib(&["converge", "--dimz", "8", "--out", "/tmp/x"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_estimator_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = attrib(&[
        "detect",
        "--estimators",
        "magic",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_manifest_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = attrib(&[
        "score",
        "--manifest",
        "/nonexistent/manifest.json",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn truncated_dump_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let dump_dir = dir.path().join("dump");
    let out = attrib(&[
        "gen-dump",
        "--n-examples",
        "4",
        "--blocks",
        "w:6:2",
        "--seed",
        "1",
        "--out",
        dump_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let train = dump_dir.join("w.train.bin");
    let bytes = std::fs::read(&train).unwrap();
    std::fs::write(&train, &bytes[..bytes.len() - 8]).unwrap();
    let out = attrib(&[
        "score",
        "--manifest",
        dump_dir.join("manifest.json").to_str().unwrap(),
        "--out",
        dir.path().join("s").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("expected"), "{stderr}");
}

#[test]
fn converge_smoke_produces_trace_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let out = attrib(&[
        "converge",
        "--dims",
        "64",
        "--samples",
        "200",
        "--seed",
        "7",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let traces = std::fs::read_to_string(dir.path().join("traces.csv")).unwrap();
    assert!(traces.starts_with("dim,samples,method,metric,iteration,error"));
    assert!(traces.lines().count() > 25);
    let svg = std::fs::read_to_string(dir.path().join("converge_d64_n200.svg")).unwrap();
    assert!(attrib_core::io::is_well_formed_xml(&svg));
    assert!(std::path::Path::new(&dir.path().join("run.json")).exists());
}

#[test]
fn detect_outputs_respect_recall_bound() {
    let dir = tempfile::tempdir().unwrap();
    let out = attrib(&[
        "detect",
        "--n-train",
        "100",
        "--n-val",
        "40",
        "--dim",
        "10",
        "--flip",
        "0.2",
        "--seeds",
        "3",
        "--estimators",
        "tracin",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let recall = std::fs::read_to_string(dir.path().join("recall.csv")).unwrap();
    for line in recall.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let p: f64 = cols[1].parse().unwrap();
        let rt: f64 = cols[2].parse().unwrap();
        let bound = (p / 20.0).min(1.0);
        assert!(rt <= bound + 1e-9, "recall bound violated: {line}");
        assert!(rt >= 0.0);
    }
    let svg = std::fs::read_to_string(dir.path().join("recall.svg")).unwrap();
    assert!(attrib_core::io::is_well_formed_xml(&svg));
}

#[test]
fn invert_bench_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let out = attrib(&[
        "invert-bench",
        "--dims",
        "16,32",
        "--samples",
        "256",
        "--seeds",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let table = std::fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    assert!(table.starts_with("dim,method,mean_error,std_error,mean_time_s,std_time_s"));
    // 2 dims x 4 methods
    assert_eq!(table.lines().count(), 9);
    for line in table.lines().skip(1) {
        if line.starts_with("16,ge") || line.starts_with("32,ge") {
            let err: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
            assert_eq!(err, 0.0);
        }
    }
}

#[test]
fn select_produces_table_with_baselines() {
    let dir = tempfile::tempdir().unwrap();
    let out = attrib(&[
        "select",
        "--n-train",
        "80",
        "--n-val",
        "40",
        "--dim",
        "8",
        "--seeds",
        "1",
        "--estimators",
        "tracin",
        "--k-grid",
        "50,100",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = std::fs::read_to_string(dir.path().join("selection.csv")).unwrap();
    assert!(table.contains("tracin,50"));
    assert!(table.contains("random,100"));
    assert!(table.contains("full,100"));
}
