use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::protocol::{check_handshake, parse_response, EvalRequest};
use super::{BuildError, Objective, ObjectiveError};
use crate::space::{ParamSpace, ParamVector};

fn default_timeout_secs() -> f64 {
    3600.0
}

/// How to launch an evaluator child.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalSettings {
    /// Program and arguments.
    pub command: Vec<String>,
    /// Per-evaluation deadline, also applied to the startup handshake.
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: f64,
}

impl ExternalSettings {
    pub fn new(command: Vec<String>) -> Self {
        ExternalSettings { command, timeout_secs: default_timeout_secs() }
    }

    pub(crate) fn check(&self) -> Result<(), BuildError> {
        if self.command.first().is_none_or(|c| c.is_empty()) {
            return Err(BuildError::Invalid("objective.command must name a program".into()));
        }
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(BuildError::Invalid(format!(
                "objective.timeout_secs must be > 0, got {}",
                self.timeout_secs
            )));
        }
        Ok(())
    }
}

type Reply = Result<f64, ObjectiveError>;

#[derive(Default)]
struct Pending {
    waiting: HashMap<u64, Sender<Reply>>,
    abandoned: HashSet<u64>,
    /// Once set, every outstanding and future request fails with this error.
    failed: Option<ObjectiveError>,
}

impl Pending {
    fn fail_all(&mut self, err: ObjectiveError) {
        for (_, tx) in self.waiting.drain() {
            let _ = tx.send(Err(err.clone()));
        }
        self.failed.get_or_insert(err);
    }
}

/// Evaluates fitness in a long-lived child process over the line protocol.
///
/// Requests may be issued from several threads at once; a background reader routes
/// each response to its caller by id. The child is killed when the evaluator drops.
pub struct ExternalEvaluator {
    names: Vec<String>,
    stdin: Mutex<Option<ChildStdin>>,
    pending: Arc<Mutex<Pending>>,
    next_id: AtomicU64,
    timeout: Duration,
    child: Mutex<Child>,
    reader: Option<JoinHandle<()>>,
}

impl ExternalEvaluator {
    pub fn spawn(settings: &ExternalSettings, space: &ParamSpace) -> Result<Self, BuildError> {
        settings.check()?;
        let timeout = Duration::from_secs_f64(settings.timeout_secs);
        let mut child = Command::new(&settings.command[0])
            .args(&settings.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| BuildError::Spawn(format!("{}: {e}", settings.command[0])))?;
        let stdout = child.stdout.take().expect("piped stdout");
        let stdin = child.stdin.take();

        let pending = Arc::new(Mutex::new(Pending::default()));
        let (hello_tx, hello_rx) = mpsc::channel();
        let reader = {
            let pending = Arc::clone(&pending);
            std::thread::spawn(move || read_responses(BufReader::new(stdout), hello_tx, pending))
        };

        let handshake = match hello_rx.recv_timeout(timeout) {
            Ok(Some(line)) => check_handshake(&line),
            Ok(None) | Err(RecvTimeoutError::Disconnected) => {
                Err("child closed its output before the handshake".to_string())
            }
            Err(RecvTimeoutError::Timeout) => Err(format!("no handshake within {timeout:?}")),
        };
        let evaluator = ExternalEvaluator {
            names: space.names().map(str::to_owned).collect(),
            stdin: Mutex::new(stdin),
            pending,
            next_id: AtomicU64::new(1),
            timeout,
            child: Mutex::new(child),
            reader: Some(reader),
        };
        handshake.map_err(BuildError::Spawn)?;
        Ok(evaluator)
    }

    fn send(&self, line: &str) -> Result<(), ObjectiveError> {
        let mut guard = self.stdin.lock().unwrap();
        let stdin = guard
            .as_mut()
            .ok_or_else(|| ObjectiveError::ChildExited("input stream closed".into()))?;
        let result = stdin
            .write_all(line.as_bytes())
            .and_then(|_| stdin.write_all(b"\n"))
            .and_then(|_| stdin.flush());
        result.map_err(|e| ObjectiveError::ChildExited(format!("write failed: {e}")))
    }

    /// Exit status text, if the child has already terminated.
    fn exit_status(&self) -> Option<String> {
        let mut child = self.child.lock().unwrap();
        child.try_wait().ok().flatten().map(|s| s.to_string())
    }
}

fn read_responses<R: BufRead>(
    reader: R,
    hello: Sender<Option<String>>,
    pending: Arc<Mutex<Pending>>,
) {
    let mut lines = reader.lines();
    match lines.next() {
        Some(Ok(line)) => {
            let _ = hello.send(Some(line));
        }
        _ => {
            let _ = hello.send(None);
            pending.lock().unwrap().fail_all(ObjectiveError::ChildExited("no output".into()));
            return;
        }
    }
    for line in lines {
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                pending.lock().unwrap().fail_all(ObjectiveError::ChildExited(format!("read failed: {e}")));
                return;
            }
        };
        let mut state = pending.lock().unwrap();
        match parse_response(&line) {
            Ok(resp) => {
                if let Some(tx) = state.waiting.remove(&resp.id) {
                    let _ = tx.send(resp.outcome.map_err(ObjectiveError::Reported));
                } else if !state.abandoned.remove(&resp.id) {
                    state.fail_all(ObjectiveError::Protocol(format!(
                        "response id {} matches no outstanding request",
                        resp.id
                    )));
                }
            }
            Err(v) => match v.id.and_then(|id| state.waiting.remove(&id)) {
                Some(tx) => {
                    let _ = tx.send(Err(ObjectiveError::Protocol(v.message)));
                }
                None => state.fail_all(ObjectiveError::Protocol(v.message)),
            },
        }
    }
    pending
        .lock()
        .unwrap()
        .fail_all(ObjectiveError::ChildExited("output stream closed".into()));
}

impl Objective for ExternalEvaluator {
    fn evaluate(&self, params: &ParamVector, _eval_id: u64) -> Result<f64, ObjectiveError> {
        if params.len() != self.names.len() {
            return Err(ObjectiveError::DimensionMismatch {
                expected: self.names.len(),
                found: params.len(),
            });
        }
        let id = self.next_id.fetch_add(1, Ordering::SeqCst);
        let request = EvalRequest {
            id,
            params: self.names.iter().cloned().zip(params.values().iter().copied()).collect(),
        };
        let (tx, rx) = mpsc::channel();
        {
            let mut state = self.pending.lock().unwrap();
            if let Some(err) = &state.failed {
                return Err(err.clone());
            }
            state.waiting.insert(id, tx);
        }
        if let Err(e) = self.send(&request.to_line()) {
            self.pending.lock().unwrap().waiting.remove(&id);
            return Err(e);
        }
        match rx.recv_timeout(self.timeout) {
            Ok(Err(ObjectiveError::ChildExited(why))) => Err(ObjectiveError::ChildExited(
                self.exit_status().map_or(why.clone(), |s| format!("{why} ({s})")),
            )),
            Ok(reply) => reply,
            Err(RecvTimeoutError::Timeout) => {
                let mut state = self.pending.lock().unwrap();
                if state.waiting.remove(&id).is_none() {
                    // The reply landed while the deadline fired.
                    drop(state);
                    return rx.try_recv().unwrap_or(Err(ObjectiveError::Timeout(self.timeout)));
                }
                state.abandoned.insert(id);
                Err(ObjectiveError::Timeout(self.timeout))
            }
            Err(RecvTimeoutError::Disconnected) => {
                Err(ObjectiveError::ChildExited("reader stopped".into()))
            }
        }
    }
}

impl Drop for ExternalEvaluator {
    fn drop(&mut self) {
        self.stdin.lock().unwrap().take();
        {
            let mut child = self.child.lock().unwrap();
            let _ = child.kill();
            let _ = child.wait();
        }
        if let Some(reader) = self.reader.take() {
            let _ = reader.join();
        }
    }
}
