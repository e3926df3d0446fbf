//! Match trace events and sinks.
//!
//! Every action attempt, manager verification step and final verdict of a
//! match is written as one JSON object per line (`<match_id>.jsonl`). Sinks
//! enforce the per-match sequence contract: `seq` starts at zero, increases by
//! exactly one, and nothing may follow the verdict.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::GameId;

/// Role label used for events emitted by the match manager itself.
pub const MANAGER_ROLE: &str = "manager";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    ActionAttempt,
    ActionAccepted,
    VerificationStep,
    Verdict,
}

/// One line of a match trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub match_id: String,
    pub seq: u64,
    pub game_id: GameId,
    pub role: String,
    pub event_kind: EventKind,
    pub action_name: String,
    pub payload: serde_json::Value,
    pub rationale: String,
    pub attempt: u32,
    pub valid: bool,
    pub error: String,
    pub clock_ms: u64,
}

impl TraceEvent {
    pub fn is_verdict(&self) -> bool {
        self.event_kind == EventKind::Verdict
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("out-of-order trace event for match {match_id}: expected seq {expected}, got {got}")]
    OutOfOrder {
        match_id: String,
        expected: u64,
        got: u64,
    },
    #[error("trace stream for match {0} is closed (verdict already written)")]
    Closed(String),
    #[error("trace serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
    #[error("trace I/O failed: {0}")]
    Io(#[from] io::Error),
}

/// Destination for trace events.
pub trait TraceSink: Send {
    fn emit(&mut self, event: &TraceEvent) -> Result<(), TraceError>;
}

/// Tracks the next expected `seq` per match and which streams are closed.
#[derive(Debug, Default)]
struct SeqGuard {
    next: HashMap<String, u64>,
    closed: std::collections::HashSet<String>,
}

impl SeqGuard {
    fn check(&self, event: &TraceEvent) -> Result<(), TraceError> {
        if self.closed.contains(&event.match_id) {
            return Err(TraceError::Closed(event.match_id.clone()));
        }
        let expected = self.next.get(&event.match_id).copied().unwrap_or(0);
        if event.seq != expected {
            return Err(TraceError::OutOfOrder {
                match_id: event.match_id.clone(),
                expected,
                got: event.seq,
            });
        }
        Ok(())
    }

    fn advance(&mut self, event: &TraceEvent) {
        self.next.insert(event.match_id.clone(), event.seq + 1);
        if event.is_verdict() {
            self.closed.insert(event.match_id.clone());
        }
    }
}

/// Writes each match to `<dir>/<match_id>.jsonl`, flushing after every line.
#[derive(Debug)]
pub struct JsonlDirSink {
    dir: PathBuf,
    guard: SeqGuard,
    open: HashMap<String, BufWriter<File>>,
}

impl JsonlDirSink {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, TraceError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            guard: SeqGuard::default(),
            open: HashMap::new(),
        })
    }

    pub fn path_for(&self, match_id: &str) -> PathBuf {
        trace_path(&self.dir, match_id)
    }
}

pub fn trace_path(dir: &Path, match_id: &str) -> PathBuf {
    dir.join(format!("{match_id}.jsonl"))
}

impl TraceSink for JsonlDirSink {
    fn emit(&mut self, event: &TraceEvent) -> Result<(), TraceError> {
        self.guard.check(event)?;
        let line = serde_json::to_string(event)?;
        if !self.open.contains_key(&event.match_id) {
            // seq 0 starts a fresh stream; an earlier partial file is replaced
            let file = File::create(self.path_for(&event.match_id))?;
            self.open.insert(event.match_id.clone(), BufWriter::new(file));
        }
        let writer = self.open.get_mut(&event.match_id).expect("stream opened above");
        writer.write_all(line.as_bytes())?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        self.guard.advance(event);
        if event.is_verdict() {
            self.open.remove(&event.match_id);
        }
        Ok(())
    }
}

/// In-memory sink, mostly for tests and embedding.
#[derive(Debug, Default)]
pub struct MemorySink {
    guard: SeqGuard,
    pub events: Vec<TraceEvent>,
}

impl MemorySink {
    pub fn new() -> Self {
        Self::default()
    }

    /// The JSONL text this sink would have written.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for event in &self.events {
            out.push_str(&serde_json::to_string(event).expect("trace events serialize"));
            out.push('\n');
        }
        out
    }
}

impl TraceSink for MemorySink {
    fn emit(&mut self, event: &TraceEvent) -> Result<(), TraceError> {
        self.guard.check(event)?;
        self.guard.advance(event);
        self.events.push(event.clone());
        Ok(())
    }
}

/// Writes JSON lines to an arbitrary writer.
pub struct WriterSink<W: Write + Send> {
    guard: SeqGuard,
    writer: W,
}

impl<W: Write + Send> WriterSink<W> {
    pub fn new(writer: W) -> Self {
        Self {
            guard: SeqGuard::default(),
            writer,
        }
    }

    pub fn into_inner(self) -> W {
        self.writer
    }
}

impl<W: Write + Send> TraceSink for WriterSink<W> {
    fn emit(&mut self, event: &TraceEvent) -> Result<(), TraceError> {
        self.guard.check(event)?;
        serde_json::to_writer(&mut self.writer, event)?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        self.guard.advance(event);
        Ok(())
    }
}

/// Convenience wrapper used by `emit_trace` callers holding a trait object.
pub fn emit_trace(sink: &mut dyn TraceSink, event: &TraceEvent) -> Result<(), TraceError> {
    sink.emit(event)
}

/// Parse a JSONL trace, reporting the 1-based line number of the first bad line.
pub fn read_trace(text: &str) -> Result<Vec<TraceEvent>, (usize, String)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| (i + 1, e.to_string())))
        .collect()
}

/// Source of `clock_ms` values.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

/// Always reports the same instant; makes traces byte-comparable.
#[derive(Debug, Default, Clone, Copy)]
pub struct FixedClock(pub u64);

impl Clock for FixedClock {
    fn now_ms(&self) -> u64 {
        self.0
    }
}
