//! Client side of the sandbox executor protocol.
//!
//! The executor is a child process. Each message in either direction is a
//! 4-byte big-endian length followed by that many bytes of UTF-8 JSON.
//! Requests are `{op:"setup", code}` and `{op:"exec", code, timeout_ms}`;
//! every request gets one `{ok, stdout, stderr, exit, wall_ms}` response.
//! The execution policy is passed to the child as its last command-line
//! argument, serialized as JSON.

use std::io::{self, BufReader, BufWriter, Read, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Frames above this size are treated as protocol corruption.
pub const MAX_FRAME_BYTES: u32 = 16 * 1024 * 1024;
/// Extra time granted to the executor beyond the execution timeout.
pub const RESPONSE_GRACE_MS: u64 = 3000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecPolicy {
    pub wall_timeout_ms: u64,
    pub output_cap_bytes: u64,
    pub memory_cap_mb: u64,
}

impl Default for ExecPolicy {
    fn default() -> Self {
        ExecPolicy {
            wall_timeout_ms: 2000,
            output_cap_bytes: 65536,
            memory_cap_mb: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum SandboxRequest {
    Setup { code: String },
    Exec { code: String, timeout_ms: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecResponse {
    pub ok: bool,
    #[serde(default)]
    pub stdout: String,
    #[serde(default)]
    pub stderr: String,
    #[serde(default)]
    pub exit: Option<i64>,
    #[serde(default)]
    pub wall_ms: u64,
    /// Executor-side explanation for `ok = false`, e.g. "timeout".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ExecResponse {
    /// Why the executor reported failure, if it did.
    pub fn failure(&self) -> Option<String> {
        if self.ok {
            return None;
        }
        let detail = self
            .error
            .clone()
            .or_else(|| self.reason.clone())
            .unwrap_or_else(|| match self.exit {
                Some(code) => format!("exit status {code}"),
                None => "unknown failure".to_string(),
            });
        Some(detail)
    }

    /// stdout and stderr together, as searched for flags.
    pub fn combined_output(&self) -> String {
        format!("{}{}", self.stdout, self.stderr)
    }
}

#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("could not start sandbox executor: {0}")]
    Spawn(io::Error),
    #[error("sandbox executor produced no response within {0} ms")]
    Timeout(u64),
    #[error("sandbox executor exited")]
    Closed,
    #[error("sandbox protocol violation: {0}")]
    Protocol(String),
    #[error("sandbox i/o failure: {0}")]
    Io(#[from] io::Error),
}

pub trait SandboxExecutor: Send {
    /// Install sandbox code in a fresh namespace.
    fn setup(&mut self, code: &str) -> Result<ExecResponse, SandboxError>;
    fn exec(&mut self, code: &str, timeout_ms: u64) -> Result<ExecResponse, SandboxError>;
}

pub fn write_frame(w: &mut impl Write, payload: &[u8]) -> io::Result<()> {
    let len = u32::try_from(payload.len())
        .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "frame too large"))?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(payload)?;
    w.flush()
}

/// Next frame, or `None` at a clean end of stream.
pub fn read_frame(r: &mut impl Read) -> io::Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let len = u32::from_be_bytes(len);
    if len > MAX_FRAME_BYTES {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("frame of {len} bytes exceeds limit"),
        ));
    }
    let mut buf = vec![0u8; len as usize];
    r.read_exact(&mut buf)?;
    Ok(Some(buf))
}

/// A sandbox runner child process, one per match.
pub struct ProcessExecutor {
    child: Child,
    stdin: Option<BufWriter<ChildStdin>>,
    responses: Receiver<Result<Vec<u8>, String>>,
    policy: ExecPolicy,
    dead: bool,
}

impl ProcessExecutor {
    /// Launch `command` (program plus arguments) with the policy appended as JSON.
    pub fn spawn(command: &[String], policy: ExecPolicy) -> Result<Self, SandboxError> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| SandboxError::Spawn(io::Error::new(io::ErrorKind::InvalidInput, "empty sandbox command")))?;
        let policy_arg = serde_json::to_string(&policy).expect("policy serializes");
        let mut child = Command::new(program)
            .args(args)
            .arg(policy_arg)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(SandboxError::Spawn)?;
        let stdin = child.stdin.take().map(BufWriter::new);
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let mut reader = BufReader::new(stdout);
            loop {
                let msg = match read_frame(&mut reader) {
                    Ok(Some(frame)) => Ok(frame),
                    Ok(None) => break,
                    Err(e) => Err(e.to_string()),
                };
                let failed = msg.is_err();
                if tx.send(msg).is_err() || failed {
                    break;
                }
            }
        });
        Ok(ProcessExecutor {
            child,
            stdin,
            responses: rx,
            policy,
            dead: false,
        })
    }

    pub fn policy(&self) -> &ExecPolicy {
        &self.policy
    }

    fn kill(&mut self) {
        self.dead = true;
        self.stdin = None;
        let _ = self.child.kill();
        let _ = self.child.wait();
    }

    fn round_trip(&mut self, request: &SandboxRequest, wait_ms: u64) -> Result<ExecResponse, SandboxError> {
        if self.dead {
            return Err(SandboxError::Closed);
        }
        let payload = serde_json::to_vec(request).expect("request serializes");
        let stdin = self.stdin.as_mut().ok_or(SandboxError::Closed)?;
        if let Err(e) = write_frame(stdin, &payload) {
            self.kill();
            return Err(if e.kind() == io::ErrorKind::BrokenPipe {
                SandboxError::Closed
            } else {
                SandboxError::Io(e)
            });
        }
        match self.responses.recv_timeout(Duration::from_millis(wait_ms)) {
            Ok(Ok(frame)) => serde_json::from_slice(&frame)
                .map_err(|e| SandboxError::Protocol(format!("bad response JSON: {e}"))),
            Ok(Err(e)) => {
                self.kill();
                Err(SandboxError::Protocol(e))
            }
            Err(RecvTimeoutError::Timeout) => {
                self.kill();
                Err(SandboxError::Timeout(wait_ms))
            }
            Err(RecvTimeoutError::Disconnected) => {
                self.kill();
                Err(SandboxError::Closed)
            }
        }
    }
}

impl SandboxExecutor for ProcessExecutor {
    fn setup(&mut self, code: &str) -> Result<ExecResponse, SandboxError> {
        let wait = self.policy.wall_timeout_ms + RESPONSE_GRACE_MS;
        self.round_trip(&SandboxRequest::Setup { code: code.to_string() }, wait)
    }

    fn exec(&mut self, code: &str, timeout_ms: u64) -> Result<ExecResponse, SandboxError> {
        let request = SandboxRequest::Exec {
            code: code.to_string(),
            timeout_ms,
        };
        self.round_trip(&request, timeout_ms + RESPONSE_GRACE_MS)
    }
}

impl Drop for ProcessExecutor {
    fn drop(&mut self) {
        // closing stdin lets a well-behaved runner exit on EOF
        self.stdin = None;
        if !self.dead {
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }
}
