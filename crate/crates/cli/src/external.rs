//! Black-box predictor behind a child process.
//!
//! Each batch is one request line `{"x": [[...], ...]}` on the child's stdin,
//! answered by one line `{"y": [...]}` on its stdout.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use causal_shap::{PredictError, Predictor};
use serde::{Deserialize, Serialize};

#[derive(Serialize)]
struct Request<'a> {
    x: Vec<&'a [f64]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Response {
    y: Vec<f64>,
}

struct Channel {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    /// Set once the process can no longer be trusted to answer in sync.
    broken: Option<String>,
}

pub struct ExternalPredictor {
    n_features: usize,
    timeout: Duration,
    program: String,
    channel: Mutex<Channel>,
}

fn failure(message: String) -> PredictError {
    PredictError::Backend(message)
}

impl ExternalPredictor {
    pub fn spawn(command: &[String], n_features: usize, timeout: Duration) -> Result<Self, PredictError> {
        let (program, args) = command.split_first().ok_or_else(|| failure("empty predictor command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| failure(format!("cannot start `{program}`: {e}")))?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        Ok(ExternalPredictor {
            n_features,
            timeout,
            program: program.clone(),
            channel: Mutex::new(Channel { child, stdin, lines, broken: None }),
        })
    }

    fn exchange(&self, ch: &mut Channel, rows: &[f64]) -> Result<Vec<f64>, PredictError> {
        let n_rows = rows.len() / self.n_features;
        let request = Request { x: rows.chunks(self.n_features).collect() };
        let mut line = serde_json::to_string(&request).expect("finite rows serialize");
        line.push('\n');
        if let Err(e) = ch.stdin.write_all(line.as_bytes()).and_then(|()| ch.stdin.flush()) {
            return Err(self.exited(ch, format!("write failed: {e}")));
        }
        let raw = match ch.lines.recv_timeout(self.timeout) {
            Ok(Ok(raw)) => raw,
            Ok(Err(e)) => return Err(self.exited(ch, format!("read failed: {e}"))),
            Err(RecvTimeoutError::Disconnected) => return Err(self.exited(ch, "no response".into())),
            Err(RecvTimeoutError::Timeout) => {
                let _ = ch.child.kill();
                return Err(failure(format!(
                    "predictor `{}` did not answer within {:.1} s; raw line: \"\"",
                    self.program,
                    self.timeout.as_secs_f64()
                )));
            }
        };
        let response: Response = serde_json::from_str(&raw)
            .map_err(|e| failure(format!("malformed response from `{}`: {e}; raw line: {raw:?}", self.program)))?;
        if response.y.len() != n_rows {
            return Err(failure(format!(
                "predictor `{}` returned {} values for a batch of {n_rows} rows; raw line: {raw:?}",
                self.program,
                response.y.len()
            )));
        }
        Ok(response.y)
    }

    fn exited(&self, ch: &mut Channel, what: String) -> PredictError {
        let status = match ch.child.try_wait() {
            Ok(Some(status)) => status.to_string(),
            _ => "still running".into(),
        };
        failure(format!("predictor `{}` exited before responding ({what}; {status}); raw line: \"\"", self.program))
    }
}

impl Predictor for ExternalPredictor {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict(&self, rows: &[f64]) -> Result<Vec<f64>, PredictError> {
        if rows.len() % self.n_features != 0 {
            return Err(PredictError::InvalidInput {
                row: rows.len() / self.n_features,
                message: format!("batch of {} values is not a whole number of rows", rows.len()),
            });
        }
        if rows.is_empty() {
            return Ok(Vec::new());
        }
        let mut ch = self.channel.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(reason) = &ch.broken {
            return Err(failure(format!("predictor `{}` is unusable after an earlier failure: {reason}", self.program)));
        }
        let result = self.exchange(&mut ch, rows);
        if let Err(e) = &result {
            ch.broken = Some(e.to_string());
        }
        result
    }
}

impl Drop for ExternalPredictor {
    fn drop(&mut self) {
        let ch = self.channel.get_mut().unwrap_or_else(|p| p.into_inner());
        let _ = ch.child.kill();
        let _ = ch.child.wait();
    }
}
