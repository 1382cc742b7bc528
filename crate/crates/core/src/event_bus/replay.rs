use std::path::Path;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{BusError, FaceEvent};

/// One step of a recorded trace: wait `delay_us`, then report `faces`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub delay_us: u64,
    pub faces: u32,
}

impl TraceEntry {
    pub const fn new(delay_us: u64, faces: u32) -> Self {
        TraceEntry { delay_us, faces }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReplayMode {
    /// Timestamps advance, the wall clock does not.
    #[default]
    FastForward,
    /// Sleeps through each delay before yielding.
    WallClock,
}

/// The four-rule demonstration: 0, 1, 2, 3 faces, 1 ms apart.
pub fn demo_trace() -> Vec<TraceEntry> {
    vec![TraceEntry::new(0, 0), TraceEntry::new(1000, 1), TraceEntry::new(1000, 2), TraceEntry::new(1000, 3)]
}

/// Parses a trace file: one `delay_us faces` pair per line, separated by
/// whitespace or a comma. `#` starts a comment.
pub fn parse_trace(text: &str) -> Result<Vec<TraceEntry>, BusError> {
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> =
            line.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
        let bad = |msg: &str| BusError::Trace { line: idx + 1, message: msg.to_string() };
        if fields.len() != 2 {
            return Err(bad("expected `delay_us faces`"));
        }
        let delay_us = fields[0].parse().map_err(|_| bad("delay_us must be a non-negative integer"))?;
        let faces = fields[1].parse().map_err(|_| bad("faces must be a non-negative integer"))?;
        entries.push(TraceEntry { delay_us, faces });
    }
    Ok(entries)
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<Vec<TraceEntry>, BusError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| BusError::TraceIo {
        path: path.display().to_string(),
        source,
    })?;
    parse_trace(&text)
}

/// Keeps only entries whose count differs from the previous one, folding the
/// delays of the removed entries into the next kept one. Turns a per-frame
/// trace into a changes-only trace.
pub fn changes_only(trace: &[TraceEntry]) -> Vec<TraceEntry> {
    let mut out: Vec<TraceEntry> = Vec::new();
    let mut pending_delay = 0u64;
    let mut last = None;
    for e in trace {
        pending_delay += e.delay_us;
        if last != Some(e.faces) {
            out.push(TraceEntry { delay_us: pending_delay, faces: e.faces });
            pending_delay = 0;
            last = Some(e.faces);
        }
    }
    out
}

/// Iterator over the events of a trace; seq starts at 1 and timestamps are
/// cumulative delays.
#[derive(Debug, Clone)]
pub struct Replay {
    entries: std::vec::IntoIter<TraceEntry>,
    mode: ReplayMode,
    seq: u64,
    clock_us: u64,
}

pub fn replay(trace: &[TraceEntry], mode: ReplayMode) -> Replay {
    Replay { entries: Vec::from(trace).into_iter(), mode, seq: 0, clock_us: 0 }
}

impl Iterator for Replay {
    type Item = FaceEvent;

    fn next(&mut self) -> Option<FaceEvent> {
        let entry = self.entries.next()?;
        if self.mode == ReplayMode::WallClock && entry.delay_us > 0 {
            thread::sleep(Duration::from_micros(entry.delay_us));
        }
        self.seq += 1;
        self.clock_us = self.clock_us.saturating_add(entry.delay_us);
        Some(FaceEvent { faces: entry.faces, seq: self.seq, timestamp_us: self.clock_us })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        self.entries.size_hint()
    }
}
