//! End-to-end checks of the `toolattn` binary: registry round-trips,
//! byte-identical benchmark reports, routing output shape, and the
//! stdio gateway transport.

use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Output, Stdio};

fn toolattn() -> Command {
    Command::new(env!("CARGO_BIN_EXE_toolattn"))
}

fn run(args: &[&str]) -> Output {
    toolattn().args(args).output().expect("binary runs")
}

#[test]
fn help_exits_zero() {
    let out = run(&["bench", "--help"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"));
}

#[test]
fn unknown_flags_exit_two() {
    let out = run(&["bench", "--definitely-not-a-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn build_catalog_writes_120_tools() {
    let dir = tempfile::tempdir().unwrap();
    let reg = dir.path().join("registry");
    let out = run(&[
        "build-catalog",
        "--seed",
        "42",
        "--out-dir",
        reg.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let files = std::fs::read_dir(&reg).unwrap().count();
    assert_eq!(files, 121); // 120 tool files + catalog.json

    // Machine output stays off stdout; logs go to stderr.
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("47312 tokens"));
}

#[test]
fn route_emits_bounded_active_set() {
    let dir = tempfile::tempdir().unwrap();
    let reg = dir.path().join("registry");
    assert!(run(&["build-catalog", "--out-dir", reg.to_str().unwrap()])
        .status
        .success());
    let out = run(&[
        "route",
        "--registry",
        reg.to_str().unwrap(),
        "--query",
        "search github pull requests by label",
    ]);
    assert!(out.status.success());
    let result: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let active = result["active"].as_array().unwrap();
    assert!(active.len() <= 10);
    assert!(result["phase1_tokens"].as_u64().unwrap() > 0);
}

#[test]
fn bench_reports_are_byte_identical_across_runs() {
    let args = ["bench", "--tasks", "60", "--seed", "42", "--format", "json"];
    let first = run(&args);
    assert!(
        first.status.success(),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let second = run(&args);
    assert!(second.status.success());
    assert_eq!(first.stdout, second.stdout);
    assert!(!first.stdout.is_empty());
}

#[test]
fn bench_markdown_renders_table() {
    let out = run(&["bench", "--tasks", "30", "--format", "markdown"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("| Method |"));
    assert!(text.contains("B1_full_schema"));
    assert!(text.contains("tool_attention"));
}

#[test]
fn serve_stdio_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let reg = dir.path().join("registry");
    assert!(run(&["build-catalog", "--out-dir", reg.to_str().unwrap()])
        .status
        .success());

    let mut child = toolattn()
        .args([
            "serve",
            "--registry",
            reg.to_str().unwrap(),
            "--transport",
            "stdio",
        ])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .expect("serve starts");
    let mut stdin = child.stdin.take().unwrap();
    let mut stdout = BufReader::new(child.stdout.take().unwrap());

    writeln!(
        stdin,
        r#"{{"jsonrpc":"2.0","id":1,"method":"initialize","params":{{}}}}"#
    )
    .unwrap();
    let mut line = String::new();
    stdout.read_line(&mut line).unwrap();
    let response: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    assert_eq!(response["result"]["tools"], 120);
    assert_eq!(response["result"]["servers"], 6);

    writeln!(
        stdin,
        r#"{{"jsonrpc":"2.0","id":2,"method":"attention/route","params":{{"session_id":"s","query":"search github issues by label"}}}}"#
    )
    .unwrap();
    line.clear();
    stdout.read_line(&mut line).unwrap();
    let response: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    assert!(response["result"]["active"].is_array());

    drop(stdin); // EOF ends the serve loop
    let status = child.wait().unwrap();
    assert!(status.success());
}
