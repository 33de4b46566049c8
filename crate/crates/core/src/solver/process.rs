//! Subprocess plumbing shared by the external solver backends.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, ExitStatus, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use crate::error::SolverError;

fn split_command(command: &str) -> Result<(String, Vec<String>), SolverError> {
    let mut words = command.split_whitespace().map(str::to_string);
    let program = words
        .next()
        .ok_or_else(|| SolverError::Spawn { command: command.to_string(), source: std::io::Error::other("empty command") })?;
    Ok((program, words.collect()))
}

fn spawn(command: &str) -> Result<Child, SolverError> {
    let (program, args) = split_command(command)?;
    Command::new(program)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|source| SolverError::Spawn { command: command.to_string(), source })
}

/// Runs `command` with `input` on stdin and returns everything it printed
/// plus its exit status, killing it after `timeout`.
pub fn run_to_completion(command: &str, input: &str, timeout: Duration) -> Result<(String, ExitStatus), SolverError> {
    let mut child = spawn(command)?;
    let mut stdin = child.stdin.take().expect("piped stdin");
    let stdout = child.stdout.take().expect("piped stdout");
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut out = String::new();
        let _ = std::io::Read::read_to_string(&mut BufReader::new(stdout), &mut out);
        let _ = tx.send(out);
    });
    // a solver may exit before draining stdin; that is not an error here
    let _ = stdin.write_all(input.as_bytes());
    drop(stdin);
    match rx.recv_timeout(timeout) {
        Ok(out) => {
            let status = child.wait()?;
            Ok((out, status))
        }
        Err(_) => {
            let _ = child.kill();
            let _ = child.wait();
            Err(SolverError::Timeout(timeout))
        }
    }
}

/// A long-running solver process spoken to line by line.
pub struct LineProcess {
    command: String,
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<String>,
}

impl LineProcess {
    pub fn spawn(command: &str) -> Result<Self, SolverError> {
        let mut child = spawn(command)?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                match line {
                    Ok(l) => {
                        if tx.send(l).is_err() {
                            break;
                        }
                    }
                    Err(_) => break,
                }
            }
        });
        Ok(Self { command: command.to_string(), child, stdin, lines })
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    pub fn send(&mut self, text: &str) -> Result<(), SolverError> {
        let stdin = self.stdin.as_mut().ok_or_else(|| SolverError::Crashed("stdin closed".into()))?;
        stdin
            .write_all(text.as_bytes())
            .and_then(|_| stdin.flush())
            .map_err(|e| self.crash_report(&format!("write failed: {e}")))
    }

    /// The next non-empty output line.
    pub fn read_line(&mut self, timeout: Duration) -> Result<String, SolverError> {
        let deadline = Instant::now() + timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match self.lines.recv_timeout(left) {
                Ok(l) if l.trim().is_empty() => continue,
                Ok(l) => return Ok(l.trim().to_string()),
                Err(RecvTimeoutError::Timeout) => {
                    self.kill();
                    return Err(SolverError::Timeout(timeout));
                }
                Err(RecvTimeoutError::Disconnected) => return Err(self.crash_report("output ended")),
            }
        }
    }

    /// Reads lines until the parentheses balance, for multi-line replies.
    pub fn read_sexpr(&mut self, timeout: Duration) -> Result<String, SolverError> {
        let mut text = String::new();
        let mut depth = 0i64;
        loop {
            let line = self.read_line(timeout)?;
            for ch in line.chars() {
                match ch {
                    '(' => depth += 1,
                    ')' => depth -= 1,
                    _ => {}
                }
            }
            text.push_str(&line);
            text.push('\n');
            if depth <= 0 {
                return Ok(text);
            }
        }
    }

    fn crash_report(&mut self, what: &str) -> SolverError {
        let status = self.child.try_wait().ok().flatten();
        SolverError::Crashed(match status {
            Some(s) => format!("{}: {what} ({s})", self.command),
            None => format!("{}: {what}", self.command),
        })
    }

    pub fn kill(&mut self) {
        self.stdin = None;
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for LineProcess {
    fn drop(&mut self) {
        self.kill();
    }
}
