use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use simjoin_core::harness::read_csv_rows;
use simjoin_core::{naive_join, Dataset, GroundTruth, RunReport};
use tempfile::TempDir;

fn simjoin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simjoin"))
        .env_remove("SIMJOIN_SEED")
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &TempDir, name: &str, content: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, content).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

const SMALL: &str = "1 2 3 4\n2 3 4 5\n1 2 3 5\n10 11 12\n10 11 13\n20 21\n";

#[test]
fn stats_of_two_records() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "two.txt", "1 2 3\n2 3 4\n");
    let out = simjoin(&["stats", s(&input)]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "records\t2\naverage_size\t3.000\ndistinct_tokens\t4\nmax_token_frequency\t2\n");
}

#[test]
fn stats_of_empty_file_is_all_zero() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "empty.txt", "");
    let out = simjoin(&["stats", s(&input)]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "records\t0\naverage_size\t0.000\ndistinct_tokens\t0\nmax_token_frequency\t0\n");
}

#[test]
fn parse_error_names_the_line() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "bad.txt", "1 2 3\n4 five 6\n");
    let out = simjoin(&["stats", s(&input)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn missing_input_is_an_io_error() {
    let out = simjoin(&["stats", "/nonexistent/data.txt"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn invalid_lambda_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "d.txt", SMALL);
    let out = simjoin(&["join", s(&input), "--lambda", "0", "--alg", "allpairs"]);
    assert_eq!(out.status.code(), Some(2));
    let out = simjoin(&["join", s(&input), "--lambda", "0.5", "--alg", "bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn randomized_join_without_truth_explains_what_to_do() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "d.txt", SMALL);
    let out = simjoin(&["join", s(&input), "--lambda", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("simjoin groundtruth"));
}

#[test]
fn groundtruth_matches_naive_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "d.txt", SMALL);
    let (a, b) = (dir.path().join("a.gt"), dir.path().join("b.gt"));
    let out = simjoin(&["groundtruth", s(&input), "--lambda", "0.5", "-o", s(&a)]);
    assert!(out.status.success());
    assert!(simjoin(&["groundtruth", s(&input), "--lambda", "0.5", "-o", s(&b)]).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let ds = Dataset::parse(SMALL.as_bytes()).unwrap();
    let expected = naive_join(&ds, 0.5).unwrap().pairs;
    assert_eq!(stdout(&out).trim(), expected.len().to_string());
    assert_eq!(GroundTruth::load(&a).unwrap().pairs, expected);
    assert!(GroundTruth::sidecar_path(&a).exists());
}

#[test]
fn groundtruth_of_dissimilar_data_is_empty() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "d.txt", "1 2\n3 4\n5 6\n");
    let gt = dir.path().join("d.gt");
    let out = simjoin(&["groundtruth", s(&input), "--lambda", "0.99", "-o", s(&gt)]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "0");
    assert!(GroundTruth::load(&gt).unwrap().pairs.is_empty());
}

#[test]
fn allpairs_join_reports_full_recall_in_one_pass() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "d.txt", SMALL);
    let out = simjoin(&["join", s(&input), "--lambda", "0.5", "--alg", "allpairs"]);
    assert!(out.status.success());
    let report: RunReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report.repetitions_used, 1);
    assert_eq!(report.final_recall, Some(1.0));
}

#[test]
fn cpsjoin_with_truth_writes_csv_rows() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "d.txt", SMALL);
    let gt = dir.path().join("d.gt");
    assert!(simjoin(&["groundtruth", s(&input), "--lambda", "0.5", "-o", s(&gt)]).status.success());
    let out =
        simjoin(&["join", s(&input), "--lambda", "0.5", "--truth", s(&gt), "--format", "csv", "--seed", "7"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv_rows(&out.stdout).unwrap();
    assert!(!rows.is_empty());
    assert_eq!(rows.last().unwrap().cum_recall, Some(1.0));
}

#[test]
fn truth_for_another_threshold_is_rejected() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "d.txt", SMALL);
    let gt = dir.path().join("d.gt");
    assert!(simjoin(&["groundtruth", s(&input), "--lambda", "0.6", "-o", s(&gt)]).status.success());
    let out = simjoin(&["join", s(&input), "--lambda", "0.5", "--truth", s(&gt)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unreached_recall_exits_3_and_still_writes_the_report() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "d.txt", SMALL);
    let gt = dir.path().join("d.gt");
    let report = dir.path().join("r.json");
    assert!(simjoin(&["groundtruth", s(&input), "--lambda", "0.5", "-o", s(&gt)]).status.success());
    // a one-position embedding almost never splits similar records together
    let out = simjoin(&[
        "join",
        s(&input),
        "--lambda",
        "0.5",
        "--truth",
        s(&gt),
        "--phi",
        "1",
        "--max-reps",
        "1",
        "--limit",
        "1",
        "--t",
        "1",
        "--seed",
        "3",
        "-o",
        s(&report),
    ]);
    let code = out.status.code();
    let parsed: RunReport = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(parsed.repetitions_used, 1);
    if parsed.final_recall == Some(1.0) {
        assert_eq!(code, Some(0));
    } else {
        assert_eq!(code, Some(3));
        assert!(!parsed.reached_target);
    }
}

#[test]
fn fixed_l_echoes_derived_repetitions() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "d.txt", SMALL);
    let out = simjoin(&[
        "join",
        s(&input),
        "--alg",
        "minhash",
        "--k",
        "4",
        "--lambda",
        "0.5",
        "--phi",
        "0.9",
        "--fixed-L",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: RunReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report.params["resolved_repetitions"], 37);
    assert_eq!(report.params["resolved_k"], 4);
}

#[test]
fn same_seed_gives_identical_masked_reports() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "d.txt", SMALL);
    let gt = dir.path().join("d.gt");
    assert!(simjoin(&["groundtruth", s(&input), "--lambda", "0.5", "-o", s(&gt)]).status.success());
    let run = || {
        simjoin(&["join", s(&input), "--lambda", "0.5", "--truth", s(&gt), "--seed", "7", "--mask-timing"])
            .stdout
    };
    assert_eq!(run(), run());
}

#[test]
fn gen_then_sweep() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("gen.txt");
    let out = simjoin(&["gen", "--records", "400", "--planted", "20", "--seed", "5", "-o", s(&data)]);
    assert!(out.status.success());
    let ds = Dataset::parse(std::fs::read(&data).unwrap().as_slice()).unwrap();
    assert_eq!(ds.len(), 400);

    let out = simjoin(&["sweep", s(&data), "--lambdas", "0.5,0.7", "--algs", "cpsjoin,allpairs"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("algorithm,lambda,"));
    assert!(lines[1].starts_with("cpsjoin,0.5,"));
    assert!(lines[2].starts_with("allpairs,0.5,"));
}
