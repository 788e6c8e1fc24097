use std::fs;
use std::path::Path;

use graphsim::cli::{cli_dispatch, EXIT_DATA, EXIT_OK, EXIT_USAGE};

fn run(args: &[&str]) -> i32 {
    cli_dispatch(std::iter::once("graphsim").chain(args.iter().copied()))
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

#[test]
fn gen_writes_one_graph_per_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "c.jsonl");
    assert_eq!(run(&["gen", "--count", "12", "--max-nodes", "5", "--out", &out]), EXIT_OK);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 12);
    assert!(text.lines().all(|l| l.starts_with('{')));
}

#[test]
fn label_then_eval_writes_report_and_rankings() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, labels, out) = (path(dir.path(), "c.jsonl"), path(dir.path(), "l.jsonl"), path(dir.path(), "eval"));
    assert_eq!(run(&["gen", "--count", "20", "--max-nodes", "5", "--seed", "3", "--out", &corpus]), EXIT_OK);
    assert_eq!(run(&["label", "--corpus", &corpus, "--out", &labels]), EXIT_OK);
    let code = run(&[
        "eval", "--corpus", &corpus, "--labels", &labels, "--method", "groundtruth", "--method", "vj,astar",
        "--k", "3", "--no-timing", "--out", &out,
    ]);
    assert_eq!(code, EXIT_OK);
    let report = fs::read_to_string(dir.path().join("eval/report.csv")).unwrap();
    let mut lines = report.lines();
    assert_eq!(lines.next(), Some("method,mse_e3,tau,p_at_3,mean_time_ms"));
    assert_eq!(lines.next(), Some("groundtruth,0,1,1,NA"));
    assert_eq!(lines.count(), 2);
    for method in ["groundtruth", "vj", "astar"] {
        assert!(dir.path().join(format!("eval/rankings_{method}.csv")).exists());
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["--help"]), EXIT_OK);
    assert_eq!(run(&["frobnicate"]), EXIT_USAGE);
    assert_eq!(run(&["gen", "--count", "zero", "--out", "x"]), EXIT_USAGE);
    assert_eq!(run(&["gen", "--count", "0", "--out", &path(dir.path(), "c.jsonl")]), EXIT_USAGE);
    let missing = path(dir.path(), "missing.jsonl");
    assert_eq!(
        run(&["eval", "--corpus", &missing, "--labels", &missing, "--method", "vj", "--out", &path(dir.path(), "e")]),
        EXIT_DATA
    );
}
