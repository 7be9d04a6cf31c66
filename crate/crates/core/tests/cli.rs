use std::path::Path;
use std::process::{Command, Output};

use bbv_core::stats::{MatrixReport, StatsReport, SCHEMA_VERSION};
use tempfile::tempdir;

fn bbv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bbv")).args(args).output().expect("spawn bbv")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_tree_sum_reports_tag_tests() {
    let out = bbv(&["run", "corpus/tree-sum.js", "--mode", "entry+cont"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert!(text(&out.stderr).contains("dynTagTests="));
}

#[test]
fn run_writes_schema_valid_stats() {
    let dir = tempdir().unwrap();
    let stats = dir.path().join("s.json");
    let out = bbv(&["run", "corpus/f.js", "--mode", "baseline", "--stats", path_str(&stats)]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert_eq!(text(&out.stdout), "5050\n");
    let report: StatsReport = serde_json::from_str(&std::fs::read_to_string(&stats).unwrap()).unwrap();
    assert_eq!(report.schema_version, SCHEMA_VERSION);
    assert_eq!(report.mode, "baseline");
    assert_eq!(report.dyn_tag_tests, 401);
    let raw: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&stats).unwrap()).unwrap();
    for key in ["dynTagTests", "versionsPerBlock", "knownCalleeCalls", "totalReturns", "tagTestSites"] {
        assert!(raw.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn run_missing_file_is_a_usage_error() {
    let out = bbv(&["run", "missing.js"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("missing.js"));
}

#[test]
fn halting_program_exits_with_one() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("halt.js");
    std::fs::write(&p, "var o = null;\nprint(o.x);\n").unwrap();
    let out = bbv(&["run", path_str(&p)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("non-object"));
}

#[test]
fn parse_error_is_a_usage_error() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("bad.js");
    std::fs::write(&p, "var = ;\n").unwrap();
    assert_eq!(bbv(&["run", path_str(&p)]).status.code(), Some(2));
}

#[test]
fn unknown_mode_is_a_usage_error() {
    assert_eq!(bbv(&["run", "f.js", "--mode", "fast"]).status.code(), Some(2));
}

#[test]
fn oracle_mode_reports_both_counts() {
    let out = bbv(&["run", "tree-sum.js", "--mode", "oracle"]);
    assert_eq!(out.status.code(), Some(0));
    let err = text(&out.stderr);
    assert!(err.contains("dynTagTests=511"), "{err}");
    assert!(err.contains("recordedTagTests="), "{err}");
}

#[test]
fn dump_versions_lists_sum_entries() {
    let out = bbv(&["run", "tree-sum.js", "--dump-versions"]);
    let s = text(&out.stdout);
    assert!(s.contains("function id1 sum"), "{s}");
    assert!(s.contains("entry {r1: null}"), "{s}");
}

#[test]
fn bench_default_iterations() {
    let dir = tempdir().unwrap();
    let json = dir.path().join("b.json");
    let out = bbv(&["bench", "tree-sum.js", "--json", path_str(&json)]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["warmupIters"], 10);
    assert_eq!(v["samplesMs"].as_array().unwrap().len(), 10);
    assert!(v["dynInstructions"].as_array().unwrap().iter().all(|n| n.as_u64().unwrap() > 0));
}

#[test]
fn bench_single_sample() {
    let dir = tempdir().unwrap();
    let json = dir.path().join("b.json");
    let out = bbv(&["bench", "fib.js", "--warmup", "0", "--iters", "1", "--json", path_str(&json)]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["samplesMs"].as_array().unwrap().len(), 1);
}

#[test]
fn bench_without_benchmark_run_violates_convention() {
    let out = bbv(&["bench", "f.js"]);
    assert_ne!(out.status.code(), Some(0));
    assert!(text(&out.stderr).contains("corpus convention violated"));
}

#[test]
fn matrix_single_baseline_cell_is_one() {
    let dir = tempdir().unwrap();
    let json = dir.path().join("m.json");
    let out = bbv(&["matrix", "f.js", "--modes", "baseline", "--json", path_str(&json)]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let m: MatrixReport = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(m.programs.len(), 1);
    assert_eq!(m.programs[0].proportion.len(), 1);
    assert_eq!(m.programs[0].proportion["baseline"], 1.0);
}

#[test]
fn matrix_csv_is_deterministic() {
    let dir = tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert!(bbv(&["matrix", "--csv", path_str(&a)]).status.success());
    assert!(bbv(&["matrix", "--csv", path_str(&b)]).status.success());
    let a = std::fs::read(&a).unwrap();
    assert_eq!(a, std::fs::read(&b).unwrap());
    let header = text(&a).lines().next().unwrap().to_string();
    assert_eq!(header, "program,baseline,intra,shapes,entry,entry+cont,oracle");
}

#[test]
fn matrix_tree_sum_row_beats_oracle() {
    let dir = tempdir().unwrap();
    let json = dir.path().join("m.json");
    assert!(bbv(&["matrix", "tree-sum.js", "--json", path_str(&json)]).status.success());
    let m: MatrixReport = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let row = &m.programs[0];
    assert!(row.proportion["entry+cont"] < row.proportion["oracle"]);
}

#[test]
fn fuzz_subcommand_runs_clean() {
    let out = bbv(&["fuzz", "--seed", "11", "--count", "10"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("10 programs"));
    assert!(text(&out.stdout).contains("0 mismatches"));
}
