//! End-to-end runs of the binary.

use std::fs;
use std::path::Path;
use std::process::Command;

fn heaping(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_heaping")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn simulate(dir: &Path) -> String {
    let out = dir.join("sim");
    let (code, _, err) = heaping(&[
        "simulate", "--stations", "3000", "--label", "toy", "--seed", "9",
        "--mechanism", "integer-rounding", "--affected-fraction", "0.05", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    out.join("toy.tsv").to_str().unwrap().to_string()
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn analyze_is_reproducible_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulate(dir.path());
    let mut trees = Vec::new();
    for workers in ["1", "3"] {
        let out = dir.path().join(format!("w{workers}"));
        let (code, stdout, err) = heaping(&[
            "--workers", workers, "analyze", "--input", &input, "--iterations", "200", "--seed", "4",
            "--format", "csv,json", "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "{err}");
        assert!(!stdout.is_empty());
        trees.push(tree(&out));
    }
    assert_eq!(trees[0], trees[1]);
    assert!(!trees[0].is_empty());
    for (name, bytes) in &trees[0] {
        let text = String::from_utf8(bytes.clone()).unwrap();
        if name.ends_with(".csv") {
            assert!(text.starts_with("# config_hash: "), "{name}");
            assert!(text.lines().nth(1).unwrap() == "# seed: 4", "{name}");
        } else if name.ends_with(".json") {
            let v: serde_json::Value = serde_json::from_str(&text).unwrap();
            assert_eq!(v["seed"], 4);
            assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);
        }
    }
}

#[test]
fn every_command_runs_on_a_small_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulate(dir.path());
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    for cmd in [
        vec!["validate", "--input", &input],
        vec!["histogram", "--input", &input, "--iterations", "100", "--out", out, "--format", "csv,json,svg"],
        vec!["spectrum", "--input", &input, "--iterations", "100", "--out", out],
        vec!["regions", "--input", &input, "--iterations", "100", "--out", out],
        vec!["fingerprint", "--input", &input, "--out", out, "--format", "csv,svg"],
    ] {
        let (code, _, err) = heaping(&cmd);
        assert_eq!(code, 0, "{cmd:?}: {err}");
    }
    assert!(fs::read_dir(out).unwrap().count() > 5);
}

#[test]
fn exit_codes_distinguish_usage_data_and_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulate(dir.path());
    assert_eq!(heaping(&["--help"]).0, 0);
    assert_eq!(heaping(&["analyze", "--no-such-flag"]).0, 2);
    assert_eq!(heaping(&["analyze", "--input", &input, "--iterations", "5"]).0, 2);
    assert_eq!(heaping(&["analyze", "--input", &input, "--profile", "xx"]).0, 2);
    assert_eq!(heaping(&["analyze", "--input", "/nonexistent/file.tsv"]).0, 1);

    let bad = dir.path().join("bad.tsv");
    fs::write(&bad, "station_id\tregistered\nA\t10\n").unwrap();
    let (code, _, err) = heaping(&["validate", "--input", bad.to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");
}
