//! Subprocess line protocol for external models.
//!
//! The child prints `FLEXCF-PREDICT 1` on startup, then answers every
//! request line (a flat JSON array of feature values in schema order) with a
//! line containing `0` or `1`.

use std::io::{self, BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use flexcf_core::dataset::{Class, Instance};
use flexcf_core::model::Predictor;

use crate::error::{Error, Result};

pub const HANDSHAKE: &str = "FLEXCF-PREDICT 1";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

struct Channel {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<io::Result<String>>,
    /// Set once a response stream can no longer be trusted to be in step.
    broken: Option<String>,
}

/// A predictor backed by a child process. Access is serialized: one batch in
/// flight at a time.
pub struct ExternalPredictor {
    command: String,
    timeout: Duration,
    channel: Mutex<Channel>,
}

impl std::fmt::Debug for ExternalPredictor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalPredictor")
            .field("command", &self.command)
            .field("timeout", &self.timeout)
            .finish_non_exhaustive()
    }
}

impl ExternalPredictor {
    /// Start `command` under `sh -c` and wait for the handshake.
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Protocol(format!("cannot start `{command}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped");
        let stdout = child.stdout.take().expect("piped");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let failed = line.is_err();
                if tx.send(line).is_err() || failed {
                    break;
                }
            }
        });
        let mut channel = Channel {
            child,
            stdin,
            lines,
            broken: None,
        };
        let deadline = Instant::now() + timeout;
        match channel.next_line(deadline) {
            Ok(line) if line.trim_end() == HANDSHAKE => {}
            Ok(line) => {
                let _ = channel.child.kill();
                return Err(Error::Protocol(format!("expected handshake `{HANDSHAKE}`, got `{line}`")));
            }
            Err(e) => {
                let _ = channel.child.kill();
                return Err(e);
            }
        }
        Ok(ExternalPredictor {
            command: command.to_string(),
            timeout,
            channel: Mutex::new(channel),
        })
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    fn round_trip(&self, xs: &[Instance]) -> Result<Vec<Class>> {
        let mut ch = self.channel.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(why) = &ch.broken {
            return Err(Error::Protocol(format!("child unusable after earlier failure: {why}")));
        }
        let result = ch.exchange(xs, self.timeout);
        if let Err(e) = &result {
            ch.broken = Some(e.to_string());
            let _ = ch.child.kill();
        }
        result
    }
}

impl Channel {
    fn next_line(&mut self, deadline: Instant) -> Result<String> {
        let wait = deadline.saturating_duration_since(Instant::now());
        match self.lines.recv_timeout(wait) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(Error::Protocol(format!("reading child output: {e}"))),
            Err(RecvTimeoutError::Timeout) => Err(Error::Protocol("timed out waiting for the child".into())),
            Err(RecvTimeoutError::Disconnected) => {
                let status = self.child.wait().map(|s| s.to_string()).unwrap_or_else(|e| e.to_string());
                Err(Error::Protocol(format!("child exited ({status})")))
            }
        }
    }

    fn exchange(&mut self, xs: &[Instance], timeout: Duration) -> Result<Vec<Class>> {
        let mut request = String::new();
        for x in xs {
            request.push_str(&serde_json::to_string(x.values())?);
            request.push('\n');
        }
        let deadline = Instant::now() + timeout;
        if let Err(e) = self.stdin.write_all(request.as_bytes()).and_then(|_| self.stdin.flush()) {
            let status = self.child.try_wait().ok().flatten();
            return Err(Error::Protocol(match status {
                Some(s) => format!("child exited ({s})"),
                None => format!("writing to child: {e}"),
            }));
        }
        let mut out = Vec::with_capacity(xs.len());
        for _ in xs {
            let line = self.next_line(deadline)?;
            out.push(match line.trim() {
                "0" => Class::Desirable,
                "1" => Class::Undesirable,
                other => return Err(Error::Protocol(format!("malformed response line `{other}`"))),
            });
        }
        Ok(out)
    }
}

impl Drop for ExternalPredictor {
    fn drop(&mut self) {
        let ch = self.channel.get_mut().unwrap_or_else(|p| p.into_inner());
        let _ = ch.child.kill();
        let _ = ch.child.wait();
    }
}

impl Predictor for ExternalPredictor {
    fn predict(&self, x: &[f64]) -> flexcf_core::Result<Class> {
        Ok(self.predict_batch(&[Instance::new(x.to_vec())])?[0])
    }

    fn predict_batch(&self, xs: &[Instance]) -> flexcf_core::Result<Vec<Class>> {
        if xs.is_empty() {
            return Ok(Vec::new());
        }
        self.round_trip(xs).map_err(|e| flexcf_core::Error::Model(e.to_string()))
    }
}

/// Server side of the protocol: answer requests from `input` with `model`
/// until end of input.
pub fn serve<R: BufRead, W: Write>(model: &dyn Predictor, n_features: usize, input: R, mut output: W) -> Result<()> {
    let io_err = |e| Error::io("<stdout>", e);
    writeln!(output, "{HANDSHAKE}").map_err(io_err)?;
    output.flush().map_err(io_err)?;
    for (k, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<stdin>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let x: Vec<f64> = serde_json::from_str(&line)
            .map_err(|e| Error::Protocol(format!("request {}: {e}", k + 1)))?;
        if x.len() != n_features {
            return Err(Error::Protocol(format!(
                "request {}: expected {n_features} values, got {}",
                k + 1,
                x.len()
            )));
        }
        let class = model.predict(&x)?;
        writeln!(output, "{}", class.as_u8()).map_err(io_err)?;
        output.flush().map_err(io_err)?;
    }
    Ok(())
}
