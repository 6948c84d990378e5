//! End-to-end checks of the binary: exit codes, strictness override,
//! output schemas, and the JSONL ingestion path.

use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qrelgauge"))
}

fn write(path: &Path, contents: &str) {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).unwrap();
    }
    fs::write(path, contents).unwrap();
}

fn tiny_dataset(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let runs_dir = dir.join("runs");
    write(
        &runs_dir.join("a.run"),
        "q1 Q0 d1 1 3.0 sysa\nq1 Q0 d2 2 2.0 sysa\nq2 Q0 d3 1 3.0 sysa\nq2 Q0 d4 2 2.0 sysa\n",
    );
    write(
        &runs_dir.join("b.run"),
        "q1 Q0 d2 1 3.0 sysb\nq1 Q0 d9 2 2.0 sysb\nq2 Q0 d4 1 3.0 sysb\nq2 Q0 d8 2 2.0 sysb\n",
    );
    let qrels = dir.join("qrels.txt");
    write(&qrels, "q1 0 d1 1\nq1 0 d2 1\nq2 0 d3 1\nq2 0 d4 1\n");
    (runs_dir, qrels)
}

#[test]
fn missing_qrels_exits_2_without_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let (runs_dir, _) = tiny_dataset(dir.path());
    let out_dir = dir.path().join("out");
    let status = bin()
        .arg("evaluate")
        .arg("--runs-dir")
        .arg(&runs_dir)
        .arg("--qrels")
        .arg(dir.path().join("does_not_exist"))
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
    assert!(!out_dir.join("evaluate.json").exists());
}

#[test]
fn unknown_flag_exits_2() {
    let status = bin().args(["evaluate", "--no-such-flag"]).output().unwrap();
    assert_eq!(status.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3() {
    // A single run cannot support a log fit over subset sizes.
    let dir = tempfile::tempdir().unwrap();
    let (runs_dir, qrels) = tiny_dataset(dir.path());
    fs::remove_file(runs_dir.join("b.run")).unwrap();
    let status = bin()
        .arg("pooling")
        .arg("--runs-dir")
        .arg(&runs_dir)
        .arg("--qrels")
        .arg(&qrels)
        .args(["--k", "2", "--extrapolate-to", "10"])
        .arg("--out-dir")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(3));
}

#[test]
fn strict_env_overrides_lenient_flag() {
    let dir = tempfile::tempdir().unwrap();
    let (runs_dir, qrels) = tiny_dataset(dir.path());
    // Corrupt one run line; lenient parsing would skip it.
    let path = runs_dir.join("a.run");
    let mut text = fs::read_to_string(&path).unwrap();
    text.push_str("q2 Q0 d5 3 not_a_number sysa\n");
    fs::write(&path, text).unwrap();

    let lenient = bin()
        .arg("evaluate")
        .arg("--runs-dir")
        .arg(&runs_dir)
        .arg("--qrels")
        .arg(&qrels)
        .arg("--lenient")
        .arg("--out-dir")
        .arg(dir.path().join("out1"))
        .output()
        .unwrap();
    assert!(lenient.status.success());

    let forced = bin()
        .arg("evaluate")
        .arg("--runs-dir")
        .arg(&runs_dir)
        .arg("--qrels")
        .arg(&qrels)
        .arg("--lenient")
        .arg("--out-dir")
        .arg(dir.path().join("out2"))
        .env("QRELGAUGE_STRICT", "1")
        .output()
        .unwrap();
    assert_eq!(forced.status.code(), Some(2));
}

#[test]
fn rank_compare_identity_and_pinned_headers() {
    let dir = tempfile::tempdir().unwrap();
    let (runs_dir, qrels) = tiny_dataset(dir.path());
    let out_dir = dir.path().join("out");
    let status = bin()
        .arg("rank-compare")
        .arg("--runs-dir")
        .arg(&runs_dir)
        .arg("--qrels")
        .arg(&qrels)
        .arg("--alt-qrels")
        .arg(&qrels)
        .args(["--metric", "recall@2"])
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(status.status.success());
    let summary = fs::read_to_string(out_dir.join("rank_compare_summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(
        lines.next().unwrap(),
        "systems,tau,error_rate_pct,concordant,discordant,tied"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[1], "1");
    assert_eq!(row[2], "0");
    // Discordant listing exists (and is empty for identical qrels).
    let discordant = fs::read_to_string(out_dir.join("rank_compare_discordant_pairs.csv")).unwrap();
    assert_eq!(discordant.lines().count(), 1);
}

#[test]
fn selection_tau_csv_has_pinned_schema() {
    let dir = tempfile::tempdir().unwrap();
    let (runs_dir, qrels) = tiny_dataset(dir.path());
    let out_dir = dir.path().join("out");
    let status = bin()
        .arg("simulate-selection")
        .arg("--runs-dir")
        .arg(&runs_dir)
        .arg("--qrels")
        .arg(&qrels)
        .args(["--policies", "random,system_based"])
        .args(["--trials", "10", "--seed", "4", "--buckets", "none"])
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let tau = fs::read_to_string(out_dir.join("simulate_selection_tau.csv")).unwrap();
    assert!(tau.starts_with("selection,tau,error_rate_pct\n"));
    assert!(tau.contains("random,"));
    assert!(tau.contains("system_based,"));
}

#[test]
fn dmerit_ingestion_feeds_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let (runs_dir, _) = tiny_dataset(dir.path());
    let dmerit = dir.path().join("dataset.jsonl");
    write(
        &dmerit,
        concat!(
            r#"{"query_id":"q1","query":"first group","evidence":["d1","d2","d8","d9","d10"]}"#,
            "\n",
            r#"{"query_id":"q2","query":"second group","evidence":["d3","d4","d11","d12","d13"]}"#,
            "\n",
        ),
    );
    let out_dir = dir.path().join("out");
    let status = bin()
        .arg("evaluate")
        .arg("--runs-dir")
        .arg(&runs_dir)
        .arg("--dmerit")
        .arg(&dmerit)
        .args(["--metrics", "recall@2"])
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let metrics = fs::read_to_string(out_dir.join("evaluate_metrics.csv")).unwrap();
    assert!(metrics.starts_with("system,recall@2\n"));
}

#[test]
fn synth_outputs_parse_back() {
    let dir = tempfile::tempdir().unwrap();
    let data_dir = dir.path().join("data");
    let status = bin()
        .args(["synth", "--systems", "3", "--queries", "10"])
        .args(["--evidence-min", "2", "--evidence-max", "5"])
        .args(["--corpus-size", "500", "--pool-size", "40", "--run-depth", "20"])
        .args(["--seed", "2"])
        .arg("--out-dir")
        .arg(&data_dir)
        .output()
        .unwrap();
    assert!(status.status.success());
    // The generated dataset immediately works end to end.
    let out_dir = dir.path().join("out");
    let eval = bin()
        .arg("evaluate")
        .arg("--runs-dir")
        .arg(data_dir.join("runs"))
        .arg("--qrels")
        .arg(data_dir.join("qrels.txt"))
        .args(["--metrics", "recall@5,r_precision"])
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(
        eval.status.success(),
        "{}",
        String::from_utf8_lossy(&eval.stderr)
    );
    assert!(out_dir.join("evaluate.json").exists());
}
