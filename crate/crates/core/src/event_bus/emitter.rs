use std::io::Write;
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Instant;

use super::{encode, BusError, FaceEvent};

/// Synchronous single-connection event sender.
#[derive(Debug)]
pub struct Emitter {
    stream: TcpStream,
    next_seq: u64,
    session_start: Instant,
}

impl Emitter {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self, BusError> {
        let stream = TcpStream::connect(addr).map_err(BusError::Transport)?;
        let _ = stream.set_nodelay(true);
        Ok(Emitter { stream, next_seq: 1, session_start: Instant::now() })
    }

    /// Sends one count with the next sequence number and a session-relative
    /// timestamp. The sequence only advances once the write succeeded.
    pub fn emit(&mut self, faces: u32) -> Result<FaceEvent, BusError> {
        let event = FaceEvent {
            faces,
            seq: self.next_seq,
            timestamp_us: self.session_start.elapsed().as_micros() as u64,
        };
        self.send(&event)?;
        self.next_seq += 1;
        Ok(event)
    }

    /// Sends a caller-built event verbatim.
    pub fn send(&mut self, event: &FaceEvent) -> Result<(), BusError> {
        self.stream.write_all(encode(event).as_bytes()).map_err(BusError::Transport)?;
        self.stream.flush().map_err(BusError::Transport)
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }
}
