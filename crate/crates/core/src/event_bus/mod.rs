//! Face-count event pipeline: wire format, ingestion server, emitter client
//! and deterministic trace replay.
//!
//! Wire protocol: a TCP stream of UTF-8 lines, one JSON object per line with
//! integer fields `faces`, `seq` and `timestamp_us`. Unknown fields are
//! ignored.

mod emitter;
mod queue;
mod replay;
mod server;
mod wire;

use thiserror::Error;

pub use emitter::Emitter;
pub use queue::{EventQueue, ReceivedEvent};
pub use replay::{changes_only, demo_trace, load_trace, parse_trace, replay, Replay, ReplayMode, TraceEntry};
pub use server::{EventServer, ServerConfig, ServerStats, MAX_LINE_BYTES};
pub use wire::{decode, decode_bytes, encode, FaceEvent, WireError};

#[derive(Debug, Error)]
pub enum BusError {
    #[error("cannot bind event server: {0}")]
    Bind(std::io::Error),
    #[error("transport error: {0}")]
    Transport(std::io::Error),
    #[error("trace line {line}: {message}")]
    Trace { line: usize, message: String },
    #[error("cannot read trace {path}: {source}")]
    TraceIo { path: String, source: std::io::Error },
}

/// Binds an ingestion server with default settings.
pub fn serve(addr: impl std::net::ToSocketAddrs) -> Result<EventServer, BusError> {
    EventServer::bind(addr, ServerConfig::default())
}
