use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ofms(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ofms")).args(args).env_remove("OFMS_NUMERIC").output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn field<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines().find_map(|l| l.strip_prefix(key)).map(str::trim).unwrap_or_else(|| panic!("no {key} in {text}"))
}

#[test]
fn run_tight_instance_prints_phi() {
    let dir = tempfile::tempdir().unwrap();
    let tap = write(dir.path(), "tight.json", r#"{"tasks":[{"f":"10","s":"100","t":"0"}]}"#);
    let out = ofms(&["run", &tap]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(field(&stdout(&out), "ratio"), "φ (≈1.6180339887)");
}

#[test]
fn run_trivial_instance() {
    let dir = tempfile::tempdir().unwrap();
    let tap = write(dir.path(), "one.json", r#"{"tasks":[{"f":1,"s":1,"t":0}]}"#);
    let out = ofms(&["run", &tap]);
    assert_eq!(out.status.code(), Some(0));
    assert!(field(&stdout(&out), "ratio").starts_with("1 (≈1.0000000000)"));
}

#[test]
fn malformed_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let tap = write(dir.path(), "bad.json", "{not json");
    assert_eq!(ofms(&["run", &tap]).status.code(), Some(1));
    let bad_order = write(dir.path(), "order.json", r#"{"tasks":[{"f":1,"s":1,"t":2},{"f":1,"s":1,"t":1}]}"#);
    assert_eq!(ofms(&["verify", &bad_order]).status.code(), Some(1));
    assert_eq!(ofms(&["run", "/nonexistent/tap.json"]).status.code(), Some(1));
}

#[test]
fn trace_round_trips_through_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let tap = write(dir.path(), "two.json", r#"{"tasks":[{"f":"1","s":"3","t":"0"},{"f":"3","s":"100","t":"0.7"}]}"#);
    let trace = dir.path().join("trace.tsv");
    let run = ofms(&["run", &tap, "--trace-out", trace.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(0));
    let analyze = ofms(&["analyze", &tap, trace.to_str().unwrap(), "--lemmas"]);
    assert_eq!(analyze.status.code(), Some(0));
    assert_eq!(field(&stdout(&run), "ratio"), field(&stdout(&analyze), "ratio"));
    assert_eq!(field(&stdout(&analyze), "F_big"), "{0}");
    assert_eq!(field(&stdout(&analyze), "A"), "{1}");
}

#[test]
fn float_mode_prints_banner() {
    let dir = tempfile::tempdir().unwrap();
    let tap = write(dir.path(), "tight.json", r#"{"tasks":[{"f":"10","s":"100","t":"0"}]}"#);
    let out =
        Command::new(env!("CARGO_BIN_EXE_ofms")).args(["run", &tap]).env("OFMS_NUMERIC", "float").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning: float mode"));
    assert_eq!(field(&stdout(&out), "ratio"), "φ (≈1.6180339887)");
}

#[test]
fn fuzz_reports() {
    let out = ofms(&["fuzz", "--seed", "1", "--count", "100", "--policy", "h"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(field(&stdout(&out), "failures"), "0");

    let empty = ofms(&["fuzz", "--count", "0"]);
    assert_eq!(empty.status.code(), Some(0));
    assert_eq!(field(&stdout(&empty), "cases"), "0 (seed 0)");
}

#[test]
fn fuzz_writes_minimized_witnesses() {
    // keep-fast has no φ guarantee; its violations exercise the witness path
    let dir = tempfile::tempdir().unwrap();
    let wdir = dir.path().join("w");
    let args = [
        "fuzz",
        "--policy",
        "keep-fast",
        "--count",
        "200",
        "--witness-dir",
        wdir.to_str().unwrap(),
        "--max-witnesses",
        "2",
    ];
    let out = ofms(&args);
    assert_eq!(out.status.code(), Some(2), "{}", stdout(&out));
    let files: Vec<_> = fs::read_dir(&wdir).unwrap().collect();
    assert!(!files.is_empty() && files.len() <= 2);

    let mut expect = args.to_vec();
    expect.push("--expect-violations");
    assert_eq!(ofms(&expect).status.code(), Some(0));
}

#[test]
fn adversary_exit_codes() {
    let out = ofms(&["adversary", "--policy", "keep-fast", "--k", "10"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(field(&stdout(&out), "ratio").starts_with("43/30"));

    let out = ofms(&["adversary", "--policy", "bail-to-slow", "--k", "10"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(field(&stdout(&out), "ratio").starts_with("3/2"));

    assert_eq!(ofms(&["adversary", "--k", "5"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let out = ofms(&["adversary", "--policy", "h", "--k", "4", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("delivered.json").exists());
    assert!(fs::read_to_string(dir.path().join("trace.tsv")).unwrap().contains("truncate"));
}

#[test]
fn verify_prints_prefix_table() {
    let dir = tempfile::tempdir().unwrap();
    let gen = ofms(&["adversary", "--policy", "keep-fast", "--k", "10", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(gen.status.code(), Some(0));
    let lb = dir.path().join("delivered.json");
    let out = ofms(&["verify", lb.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    for c in ["C^t = 1 ", "C^t = 11/10", "C^t = 6/5", "C^t = 13/10", "C^t = 7/5", "C^t = 3/2"] {
        assert!(text.contains(c), "{c} missing from\n{text}");
    }

    let pair = write(dir.path(), "pair.json", r#"{"tasks":[{"f":1,"s":2,"t":0},{"f":1,"s":3,"t":0}]}"#);
    let out = ofms(&["verify", &pair, "--oracle"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("(match)"));

    let empty = write(dir.path(), "empty.json", r#"{"tasks":[]}"#);
    let out = ofms(&["verify", &empty]);
    assert_eq!(out.status.code(), Some(0));
    assert!(field(&stdout(&out), "C^inf").starts_with("0 "));
}

#[test]
fn gen_is_deterministic() {
    let a = ofms(&["gen", "--seed", "9", "--n", "5", "--style", "staircase"]);
    let b = ofms(&["gen", "--seed", "9", "--n", "5", "--style", "staircase"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let doc: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(doc["tasks"].as_array().unwrap().len(), 5);
}
