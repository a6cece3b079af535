//! Line-delimited JSON adapters for external tokenizers and embedders.
//!
//! The escape hatch for exact BPE counts or real sentence encoders is a
//! child process speaking one JSON object per line: request
//! `{"text": "..."}`, response `{"tokens": n}` for counters or
//! `{"vector": [..]}` for embedders. The adapter owns the child's stdio
//! and serializes requests, so one process serves many callers.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("adapter unavailable: {0}")]
    Unavailable(String),
    #[error("adapter protocol error: {0}")]
    Protocol(String),
}

/// Answers token-count queries for exact strings.
pub trait CountAdapter: Send + Sync {
    fn count(&self, text: &str) -> Result<usize, AdapterError>;
}

/// Answers embedding queries for exact strings.
pub trait EmbedAdapter: Send + Sync {
    fn embed(&self, text: &str) -> Result<Vec<f64>, AdapterError>;
}

#[derive(Deserialize)]
struct CountResponse {
    tokens: usize,
}

#[derive(Deserialize)]
struct EmbedResponse {
    vector: Vec<f64>,
}

/// Split a command line into argv entries, honoring single and double
/// quotes so adapter commands like `sh -c '...'` survive intact.
pub fn split_command(command: &str) -> Vec<String> {
    let mut args = Vec::new();
    let mut current = String::new();
    let mut quote: Option<char> = None;
    let mut pending = false;
    for c in command.chars() {
        match quote {
            Some(q) if c == q => {
                quote = None;
            }
            Some(_) => current.push(c),
            None if c == '\'' || c == '"' => {
                quote = Some(c);
                pending = true;
            }
            None if c.is_whitespace() => {
                if pending || !current.is_empty() {
                    args.push(std::mem::take(&mut current));
                    pending = false;
                }
            }
            None => current.push(c),
        }
    }
    if pending || !current.is_empty() {
        args.push(current);
    }
    args
}

struct ChildIo {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

/// A child process speaking the line protocol over stdio.
pub struct ChildProcessAdapter {
    command: String,
    io: Mutex<ChildIo>,
}

impl ChildProcessAdapter {
    pub fn spawn(command: &str) -> Result<Self, AdapterError> {
        let argv = split_command(command);
        let (program, rest) = argv
            .split_first()
            .ok_or_else(|| AdapterError::Unavailable("empty adapter command".into()))?;
        let mut child = Command::new(program)
            .args(rest)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| AdapterError::Unavailable(format!("spawn {command:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Self {
            command: command.to_string(),
            io: Mutex::new(ChildIo {
                child,
                stdin,
                stdout,
            }),
        })
    }

    fn round_trip(&self, text: &str) -> Result<String, AdapterError> {
        let request = serde_json::json!({ "text": text }).to_string();
        let mut io = self.io.lock().expect("adapter lock");
        io.stdin
            .write_all(request.as_bytes())
            .and_then(|_| io.stdin.write_all(b"\n"))
            .and_then(|_| io.stdin.flush())
            .map_err(|e| AdapterError::Unavailable(format!("{}: write: {e}", self.command)))?;
        let mut line = String::new();
        let n = io
            .stdout
            .read_line(&mut line)
            .map_err(|e| AdapterError::Unavailable(format!("{}: read: {e}", self.command)))?;
        if n == 0 {
            return Err(AdapterError::Unavailable(format!(
                "{}: adapter closed its stdout",
                self.command
            )));
        }
        Ok(line)
    }
}

impl Drop for ChildProcessAdapter {
    fn drop(&mut self) {
        if let Ok(mut io) = self.io.lock() {
            let _ = io.child.kill();
            let _ = io.child.wait();
        }
    }
}

impl CountAdapter for ChildProcessAdapter {
    fn count(&self, text: &str) -> Result<usize, AdapterError> {
        let line = self.round_trip(text)?;
        let resp: CountResponse = serde_json::from_str(line.trim())
            .map_err(|e| AdapterError::Protocol(format!("bad count response {line:?}: {e}")))?;
        Ok(resp.tokens)
    }
}

impl EmbedAdapter for ChildProcessAdapter {
    fn embed(&self, text: &str) -> Result<Vec<f64>, AdapterError> {
        let line = self.round_trip(text)?;
        let resp: EmbedResponse = serde_json::from_str(line.trim())
            .map_err(|e| AdapterError::Protocol(format!("bad embed response {line:?}: {e}")))?;
        Ok(resp.vector)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_command_honors_quotes() {
        assert_eq!(
            split_command("sh -c 'while read l; do echo x; done'"),
            vec!["sh", "-c", "while read l; do echo x; done"]
        );
        assert_eq!(split_command("  cat  "), vec!["cat"]);
        assert_eq!(split_command("a '' b"), vec!["a", "", "b"]);
    }

    #[test]
    fn spawn_failure_is_unavailable() {
        match ChildProcessAdapter::spawn("definitely-not-a-real-binary-xyz") {
            Err(AdapterError::Unavailable(_)) => {}
            Err(other) => panic!("expected unavailable, got {other}"),
            Ok(_) => panic!("expected spawn failure"),
        }
    }

    #[cfg(unix)]
    #[test]
    fn line_protocol_count_round_trip() {
        let adapter = ChildProcessAdapter::spawn(
            "sh -c 'while read line; do echo \"{\\\"tokens\\\": 7}\"; done'",
        )
        .expect("spawn sh");
        assert_eq!(adapter.count("hello world").unwrap(), 7);
        assert_eq!(adapter.count("again").unwrap(), 7);
    }

    #[cfg(unix)]
    #[test]
    fn non_json_response_is_protocol_error() {
        let adapter = ChildProcessAdapter::spawn("sh -c 'while read line; do echo not-json; done'")
            .expect("spawn sh");
        assert!(matches!(
            adapter.count("x").unwrap_err(),
            AdapterError::Protocol(_)
        ));
    }
}
