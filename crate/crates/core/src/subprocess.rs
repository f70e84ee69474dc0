//! Objectives hosted in a separate process.
//!
//! The engine talks to an objective server over the child's stdin/stdout
//! with one JSON object per line and at most one request in flight:
//!
//! ```text
//! -> {"id": 0, "assignment": {"x": 0.5, "alg": "svm"}, "fidelity": 1.0}
//! <- {"id": 0, "value": 0.37}
//! <- {"id": 1, "error": "fit diverged"}            (alternative outcome)
//! ```
//!
//! The child is spawned once and reused for every trial of a run; its
//! stderr passes through for diagnostics. A response whose id does not
//! match the request in flight is skipped, which is how answers that
//! straggle in after a timeout get drained. If the child dies, every
//! later evaluation fails fast and the surrounding run keeps going with
//! penalty values.

use std::io::{self, BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{EvalOutcome, Evaluator};
use crate::space::Assignment;

/// One evaluation request, as written to the child's stdin.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectiveRequest {
    pub id: u64,
    pub assignment: Assignment,
    pub fidelity: f64,
}

/// One evaluation response, as read from the child's stdout. Exactly one
/// of `value` and `error` must be present.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectiveResponse {
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

struct Connection {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<io::Result<String>>,
    next_id: u64,
}

/// Evaluator backed by a long-lived objective server process.
pub struct SubprocessEvaluator {
    // None once the child is known dead; evaluations then fail fast.
    connection: Mutex<Option<Connection>>,
    describe: String,
}

impl SubprocessEvaluator {
    /// Spawns `command[0]` with the remaining elements as arguments.
    /// A dataset path or any other per-run context goes in those arguments.
    pub fn spawn(command: &[String]) -> Result<Self> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| Error::InvalidArgument("objective command is empty".to_string()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("stdin was piped");
        let stdout = child.stdout.take().expect("stdout was piped");

        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let reader = BufReader::new(stdout);
            for line in reader.lines() {
                let failed = line.is_err();
                if tx.send(line).is_err() || failed {
                    break;
                }
            }
            // Dropping tx disconnects the channel, which the request loop
            // reads as "child hung up".
        });

        Ok(SubprocessEvaluator {
            connection: Mutex::new(Some(Connection {
                child,
                stdin,
                lines: rx,
                next_id: 0,
            })),
            describe: command.join(" "),
        })
    }

    fn drop_connection(slot: &mut Option<Connection>) {
        if let Some(mut connection) = slot.take() {
            let _ = connection.child.kill();
            let _ = connection.child.wait();
        }
    }
}

impl Drop for SubprocessEvaluator {
    fn drop(&mut self) {
        if let Ok(mut slot) = self.connection.lock() {
            Self::drop_connection(&mut slot);
        }
    }
}

impl SubprocessEvaluator {
    /// One request/response round trip. The boolean says whether the
    /// connection is still usable afterwards.
    fn exchange(
        connection: &mut Connection,
        assignment: &Assignment,
        fidelity: f64,
        timeout: Duration,
    ) -> (bool, EvalOutcome) {
        let id = connection.next_id;
        connection.next_id += 1;
        let request = ObjectiveRequest {
            id,
            assignment: assignment.clone(),
            fidelity,
        };
        let mut line = serde_json::to_string(&request).expect("assignments always serialize");
        line.push('\n');
        if let Err(e) = connection.stdin.write_all(line.as_bytes()) {
            return (
                false,
                EvalOutcome::Failed(format!("objective process rejected a request: {e}")),
            );
        }

        let deadline = Instant::now() + timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match connection.lines.recv_timeout(left) {
                Ok(Ok(text)) => {
                    if text.trim().is_empty() {
                        continue;
                    }
                    let response: ObjectiveResponse = match serde_json::from_str(&text) {
                        Ok(r) => r,
                        Err(e) => {
                            return (
                                false,
                                EvalOutcome::Failed(format!(
                                    "objective process broke protocol: {e}"
                                )),
                            );
                        }
                    };
                    if response.id != id {
                        // A straggler for an earlier, timed-out request.
                        continue;
                    }
                    return match (response.value, response.error) {
                        (Some(v), None) => (true, EvalOutcome::Value(v)),
                        (None, Some(msg)) => (true, EvalOutcome::Failed(msg)),
                        _ => (
                            false,
                            EvalOutcome::Failed(
                                "objective response carried neither value nor error".to_string(),
                            ),
                        ),
                    };
                }
                Ok(Err(e)) => {
                    return (
                        false,
                        EvalOutcome::Failed(format!("objective stream failed: {e}")),
                    );
                }
                Err(RecvTimeoutError::Timeout) => return (true, EvalOutcome::TimedOut),
                Err(RecvTimeoutError::Disconnected) => {
                    return (
                        false,
                        EvalOutcome::Failed("objective process exited".to_string()),
                    );
                }
            }
        }
    }
}

impl Evaluator for SubprocessEvaluator {
    fn evaluate(&self, assignment: &Assignment, fidelity: f64, timeout: Duration) -> EvalOutcome {
        let mut slot = self.connection.lock().expect("evaluator lock");
        let Some(mut connection) = slot.take() else {
            return EvalOutcome::Failed(format!(
                "objective process `{}` is no longer running",
                self.describe
            ));
        };
        let (keep, outcome) = Self::exchange(&mut connection, assignment, fidelity, timeout);
        if keep {
            *slot = Some(connection);
        } else {
            let _ = connection.child.kill();
            let _ = connection.child.wait();
        }
        outcome
    }
}

/// What kinds of values an assignment feeds into the echo objective.
fn numeric_sum(assignment: &Assignment) -> f64 {
    assignment
        .iter()
        .filter_map(|(_, v)| v.as_f64())
        .sum()
}

/// Knobs of the reference echo server, exposed as CLI flags on its binary.
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoOptions {
    /// Exit abruptly (without replying) once this many requests were served.
    pub crash_after: Option<u64>,
    /// Artificial delay before each response, for timeout testing.
    pub sleep_ms: u64,
}

/// How an echo-server loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EchoOutcome {
    /// The client closed our stdin; normal shutdown.
    Eof,
    /// `crash_after` tripped; the caller should abort the process.
    CrashRequested,
}

/// Reference objective server: replies to each request with the sum of the
/// assignment's numeric values. Runs until EOF or the crash trigger.
///
/// The binary wrapping this loop accepts an optional dataset-path argument
/// purely to mirror how a real objective server is launched; the echo
/// objective has no data to load.
pub fn serve_echo_objective(
    input: impl BufRead,
    mut output: impl Write,
    options: EchoOptions,
) -> io::Result<EchoOutcome> {
    let mut served = 0u64;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if options.crash_after.is_some_and(|limit| served >= limit) {
            return Ok(EchoOutcome::CrashRequested);
        }
        let request: ObjectiveRequest = serde_json::from_str(&line)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        if options.sleep_ms > 0 {
            thread::sleep(Duration::from_millis(options.sleep_ms));
        }
        let response = ObjectiveResponse {
            id: request.id,
            value: Some(numeric_sum(&request.assignment)),
            error: None,
        };
        serde_json::to_writer(&mut output, &response)?;
        output.write_all(b"\n")?;
        output.flush()?;
        served += 1;
    }
    Ok(EchoOutcome::Eof)
}

/// Entry point shared by the echo-objective binaries: parses
/// `[dataset-path] [--crash-after N] [--sleep-ms N]`, serves stdin until
/// EOF, and exits with 101 when the crash trigger fires.
pub fn echo_objective_main() -> ! {
    let mut options = EchoOptions::default();
    let mut args = std::env::args().skip(1);
    while let Some(arg) = args.next() {
        match arg.as_str() {
            "--crash-after" => match args.next().and_then(|v| v.parse().ok()) {
                Some(n) => options.crash_after = Some(n),
                None => {
                    eprintln!("--crash-after needs a request count");
                    std::process::exit(2);
                }
            },
            "--sleep-ms" => match args.next().and_then(|v| v.parse().ok()) {
                Some(ms) => options.sleep_ms = ms,
                None => {
                    eprintln!("--sleep-ms needs a millisecond count");
                    std::process::exit(2);
                }
            },
            // Anything else is launch context such as a dataset path; the
            // echo objective has no data to load.
            _ => {}
        }
    }
    let stdin = io::stdin();
    let stdout = io::stdout();
    match serve_echo_objective(stdin.lock(), stdout.lock(), options) {
        Ok(EchoOutcome::Eof) => std::process::exit(0),
        Ok(EchoOutcome::CrashRequested) => std::process::exit(101),
        Err(e) => {
            eprintln!("echo objective: {e}");
            std::process::exit(1);
        }
    }
}
