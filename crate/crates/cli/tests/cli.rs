//! Black-box tests of the `espatial` binary: exit codes, outputs, and the
//! golden benchmark report.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use espatial::bench::strip_wall_clock;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_espatial"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

#[test]
fn no_arguments_prints_usage_and_exits_2() {
    let o = run(&[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage:"));
}

#[test]
fn help_and_version_exit_0() {
    let o = run(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    for sub in [
        "build-graph",
        "query",
        "plan",
        "validate",
        "bench",
        "gen-dataset",
        "reassembly",
    ] {
        assert!(stdout(&o).contains(sub), "{sub}");
    }
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_2_with_subcommand_help() {
    let o = run(&["query", "--graph", "g.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--category"));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["bench", "--items", "many"]).status.code(), Some(2));
    assert_eq!(
        run(&["gen-dataset", "--mix", "colour=1"]).status.code(),
        Some(2)
    );
}

#[test]
fn floating_brick_fixture_fails_validation() {
    let o = run(&[
        "validate",
        "--structure",
        path(&fixture("floating.lego.json")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stdout(&o).contains("violation: green 1x1 at (4, 0) layer 2 floating"),
        "{}",
        stdout(&o)
    );
    let ok = run(&["validate", "--structure", path(&fixture("tower.lego.json"))]);
    assert_eq!(ok.status.code(), Some(0));
}

#[test]
fn plan_emits_the_shipped_command_list() {
    let o = run(&["plan", "--target", path(&fixture("tower.lego.json"))]);
    assert_eq!(o.status.code(), Some(0));
    let expected = std::fs::read_to_string(fixture("tower.commands.txt")).unwrap();
    assert_eq!(stdout(&o), expected);
    let v = run(&[
        "validate",
        "--commands",
        path(&fixture("tower.commands.txt")),
    ]);
    assert_eq!(v.status.code(), Some(0));
    let bad = run(&["plan", "--target", path(&fixture("floating.lego.json"))]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn graph_then_query_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.json");
    let o = run(&[
        "build-graph",
        "--scene",
        path(&fixture("tabletop.scene.json")),
        "--out",
        path(&g),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        std::fs::read_to_string(&g).unwrap(),
        std::fs::read_to_string(fixture("tabletop.graph.json")).unwrap()
    );

    let a = dir.path().join("a.json");
    let o = run(&[
        "query",
        "--graph",
        path(&g),
        "--query",
        path(&fixture("bowl-feasible.query.json")),
        "--out",
        path(&a),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("blocked by apple-0"));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&a).unwrap()).unwrap();
    assert_eq!(doc["schema"], "espatial-answer/1");
    assert_eq!(doc["value"]["value"], false);

    let t = dir.path().join("t.json");
    let o = run(&[
        "query",
        "--graph",
        path(&g),
        "--category",
        "adjacency",
        "--subject",
        "cup-0",
        "--object",
        "bowl-0",
        "--reason",
        "--out",
        path(&t),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&t).unwrap()).unwrap();
    assert_eq!(doc["schema"], "espatial-trace/1");
    assert_eq!(doc["outcome"], "answered");

    let o = run(&[
        "query",
        "--graph",
        path(&g),
        "--category",
        "distance",
        "--subject",
        "ghost-0",
        "--object",
        "cup-0",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("ghost-0"));
}

#[test]
fn domain_errors_exit_1() {
    let o = run(&["build-graph", "--scene", "/nonexistent/scene.json"]);
    assert_eq!(o.status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"thresholds": {"tau_dir": "wide"}}"#).unwrap();
    let o = run(&["--config", path(&cfg), "reassembly", "--runs", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("thresholds.tau_dir"), "{}", stderr(&o));
}

#[test]
fn shipped_dataset_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("qa.json");
    let o = run(&[
        "gen-dataset",
        "--seed",
        "42",
        "--items",
        "100",
        "--out",
        path(&ds),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        std::fs::read_to_string(&ds).unwrap(),
        std::fs::read_to_string(fixture("qa-100.json")).unwrap()
    );
}

#[test]
fn bench_on_shipped_fixture_matches_golden_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = run(&[
        "bench",
        "--dataset",
        path(&fixture("qa-100.json")),
        "--out",
        path(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(
        stdout(&o).contains("overall             100/100   1.000"),
        "{}",
        stdout(&o)
    );
    let got = strip_wall_clock(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let want =
        strip_wall_clock(&std::fs::read_to_string(fixture("report-100.golden.json")).unwrap())
            .unwrap();
    assert_eq!(got, want);
}

#[test]
fn reassembly_reports_dropout() {
    let o = run(&["reassembly", "--runs", "2", "--dropout"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("description accuracy 0/2"));
    assert!(stdout(&o).contains("missing:"));
}
