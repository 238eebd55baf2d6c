use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dcd_cluster::io::ClusterResultFile;
use tempfile::TempDir;

fn dcd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dcd"))
        .args(args)
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &TempDir, name: &str, contents: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

/// Two 3-cliques joined by nothing, as a MatrixMarket file.
fn two_cliques(dir: &TempDir) -> PathBuf {
    let mut body = String::from("%%MatrixMarket matrix coordinate real symmetric\n6 6 6\n");
    for (i, j) in [(2, 1), (3, 1), (3, 2), (5, 4), (6, 4), (6, 5)] {
        body.push_str(&format!("{i} {j} 1\n"));
    }
    write(dir, "cliques.mtx", &body)
}

#[test]
fn two_points_give_a_single_edge() {
    let dir = TempDir::new().unwrap();
    let csv = write(&dir, "x.csv", "0,0\n1,1\n");
    let mtx = dir.path().join("g.mtx");
    let out = dcd(&["build-graph", s(&csv), "-k", "1", "-o", s(&mtx)]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&mtx).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[1], "2 2 1");
    assert_eq!(lines[2], "2 1 1");
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("nnz: 2"));
}

#[test]
fn missing_input_is_a_bad_input_error() {
    let dir = TempDir::new().unwrap();
    let out = dcd(&[
        "build-graph",
        "/nonexistent/x.csv",
        "-k",
        "2",
        "-o",
        s(&dir.path().join("g.mtx")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
    let out = dcd(&["cluster", "/nonexistent/g.mtx", "-r", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_arguments_exit_two() {
    assert_eq!(dcd(&["cluster"]).status.code(), Some(2));
    assert_eq!(dcd(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn k_out_of_range_is_rejected() {
    let dir = TempDir::new().unwrap();
    let csv = write(&dir, "x.csv", "0,0\n1,1\n2,2\n");
    let out = dcd(&[
        "build-graph",
        s(&csv),
        "-k",
        "3",
        "-o",
        s(&dir.path().join("g.mtx")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn isolated_node_is_rejected() {
    let dir = TempDir::new().unwrap();
    let mtx = write(
        &dir,
        "g.mtx",
        "%%MatrixMarket matrix coordinate real symmetric\n3 3 1\n2 1 1\n",
    );
    let out = dcd(&["cluster", s(&mtx), "-r", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn clusters_two_cliques_and_scores_them() {
    let dir = TempDir::new().unwrap();
    let mtx = two_cliques(&dir);
    let result = dir.path().join("res.json");
    let trace = dir.path().join("trace.jsonl");
    let out = dcd(&[
        "cluster",
        s(&mtx),
        "-r",
        "2",
        "-o",
        s(&result),
        "--soft",
        "--trace",
        s(&trace),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("2 connected components"));

    let parsed = ClusterResultFile::read(&result).unwrap();
    assert_eq!((parsed.n, parsed.r), (6, 2));
    let l = &parsed.labels;
    assert!(l[0] == l[1] && l[1] == l[2] && l[3] == l[4] && l[4] == l[5] && l[0] != l[3]);
    assert_eq!(parsed.candidates.len(), 4);
    assert_eq!(parsed.soft_assignments.as_ref().unwrap().len(), 6);
    assert_eq!(parsed.config.seed, 42);

    let lines = std::fs::read_to_string(&trace).unwrap();
    for line in lines.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["kl_error"].is_number() && v["candidate"].is_string());
    }

    let truth = write(&dir, "truth.txt", "1\n1\n1\n0\n0\n0\n");
    let out = dcd(&["eval", s(&result), s(&truth)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "purity: 1.0000\n");

    let short = write(&dir, "short.txt", "1\n1\n1\n0\n0\n");
    assert_eq!(dcd(&["eval", s(&result), s(&short)]).status.code(), Some(2));
}

#[test]
fn one_cluster_puts_everyone_in_cluster_zero() {
    let dir = TempDir::new().unwrap();
    let mtx = two_cliques(&dir);
    let out = dcd(&["cluster", s(&mtx), "-r", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let parsed: ClusterResultFile = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(parsed.labels, vec![0; 6]);
}

#[test]
fn output_is_byte_identical_across_runs_and_threads() {
    let dir = TempDir::new().unwrap();
    let mtx = two_cliques(&dir);
    let run = |threads: &str| {
        let out = dcd(&[
            "cluster",
            s(&mtx),
            "-r",
            "2",
            "--soft",
            "--threads",
            threads,
            "--seed",
            "7",
        ]);
        assert_eq!(out.status.code(), Some(0));
        out.stdout
    };
    let first = run("1");
    assert_eq!(run("1"), first);
    assert_eq!(run("4"), first);
}

#[test]
fn graph_file_round_trips_through_the_cli() {
    let dir = TempDir::new().unwrap();
    let csv = write(&dir, "x.csv", "a,b\n0,0\n0,1\n5,5\n5,6\n0.5,0.5\n");
    let mtx = dir.path().join("g.mtx");
    let out = dcd(&["build-graph", s(&csv), "-k", "2", "-o", s(&mtx), "--header"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let g = dcd_cluster::io::read_matrix_market_file(&mtx).unwrap();
    let features = dcd_cluster::io::read_features_csv(&csv, true).unwrap();
    assert_eq!(g, dcd_cluster::knn_graph(&features, 2).unwrap());
}
