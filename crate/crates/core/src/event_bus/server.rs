use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};

use log::{debug, warn};
use serde::Serialize;

use super::{decode_bytes, BusError, EventQueue, FaceEvent, ReceivedEvent};

/// Longest accepted record, newline excluded.
pub const MAX_LINE_BYTES: usize = 4096;

#[derive(Debug, Clone, Copy)]
pub struct ServerConfig {
    pub queue_capacity: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig { queue_capacity: EventQueue::DEFAULT_CAPACITY }
    }
}

#[derive(Debug, Default)]
struct Counters {
    connections: AtomicU64,
    disconnections: AtomicU64,
    accepted: AtomicU64,
    malformed: AtomicU64,
    out_of_order: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ServerStats {
    pub connections: u64,
    pub disconnections: u64,
    pub accepted: u64,
    /// Lines that failed to parse.
    pub malformed: u64,
    /// Well-formed events that broke per-connection seq/timestamp ordering.
    pub out_of_order: u64,
    /// Events dropped by queue overflow.
    pub dropped: u64,
}

struct Shared {
    queue: Arc<EventQueue>,
    counters: Counters,
    stopping: AtomicBool,
    open: Mutex<HashMap<u64, TcpStream>>,
}

/// Line-delimited event ingestion server.
///
/// Each connection is read on its own thread; all of them feed one bounded
/// FIFO, so per-connection order is preserved end to end.
pub struct EventServer {
    local_addr: SocketAddr,
    shared: Arc<Shared>,
    acceptor: Option<JoinHandle<()>>,
    readers: Arc<Mutex<Vec<JoinHandle<()>>>>,
}

impl EventServer {
    pub fn bind(addr: impl ToSocketAddrs, config: ServerConfig) -> Result<Self, BusError> {
        let listener = TcpListener::bind(addr).map_err(BusError::Bind)?;
        let local_addr = listener.local_addr().map_err(BusError::Bind)?;
        let shared = Arc::new(Shared {
            queue: Arc::new(EventQueue::new(config.queue_capacity)),
            counters: Counters::default(),
            stopping: AtomicBool::new(false),
            open: Mutex::new(HashMap::new()),
        });
        let readers = Arc::new(Mutex::new(Vec::new()));
        let acceptor = {
            let shared = shared.clone();
            let readers = readers.clone();
            thread::Builder::new()
                .name("event-accept".into())
                .spawn(move || accept_loop(listener, shared, readers))
                .map_err(BusError::Bind)?
        };
        Ok(EventServer { local_addr, shared, acceptor: Some(acceptor), readers })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    /// Consumer side of the event FIFO.
    pub fn queue(&self) -> Arc<EventQueue> {
        self.shared.queue.clone()
    }

    pub fn stats(&self) -> ServerStats {
        let c = &self.shared.counters;
        ServerStats {
            connections: c.connections.load(Ordering::SeqCst),
            disconnections: c.disconnections.load(Ordering::SeqCst),
            accepted: c.accepted.load(Ordering::SeqCst),
            malformed: c.malformed.load(Ordering::SeqCst),
            out_of_order: c.out_of_order.load(Ordering::SeqCst),
            dropped: self.shared.queue.dropped(),
        }
    }

    /// Stops accepting, disconnects clients and closes the queue. Events
    /// already queued stay receivable.
    pub fn shutdown(&mut self) {
        if self.shared.stopping.swap(true, Ordering::SeqCst) {
            return;
        }
        // unblock accept()
        let _ = TcpStream::connect(self.local_addr);
        if let Some(handle) = self.acceptor.take() {
            let _ = handle.join();
        }
        for stream in self.shared.open.lock().unwrap_or_else(|e| e.into_inner()).values() {
            let _ = stream.shutdown(Shutdown::Both);
        }
        let handles: Vec<_> = self.readers.lock().unwrap_or_else(|e| e.into_inner()).drain(..).collect();
        for handle in handles {
            let _ = handle.join();
        }
        self.shared.queue.close();
    }
}

impl Drop for EventServer {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>, readers: Arc<Mutex<Vec<JoinHandle<()>>>>) {
    let mut next_id = 0u64;
    for stream in listener.incoming() {
        if shared.stopping.load(Ordering::SeqCst) {
            break;
        }
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                warn!("accept failed: {e}");
                continue;
            }
        };
        next_id += 1;
        let id = next_id;
        shared.counters.connections.fetch_add(1, Ordering::SeqCst);
        if let Ok(clone) = stream.try_clone() {
            shared.open.lock().unwrap_or_else(|e| e.into_inner()).insert(id, clone);
        }
        let conn_shared = shared.clone();
        let spawned = thread::Builder::new()
            .name(format!("event-conn-{id}"))
            .spawn(move || {
                read_connection(id, stream, &conn_shared);
                conn_shared.open.lock().unwrap_or_else(|e| e.into_inner()).remove(&id);
                conn_shared.counters.disconnections.fetch_add(1, Ordering::SeqCst);
            });
        match spawned {
            Ok(handle) => {
                let mut readers = readers.lock().unwrap_or_else(|e| e.into_inner());
                readers.retain(|h| !h.is_finished());
                readers.push(handle);
            }
            Err(e) => warn!("could not spawn reader for connection {id}: {e}"),
        }
    }
}

fn read_connection(id: u64, stream: TcpStream, shared: &Shared) {
    let peer = stream.peer_addr().ok();
    debug!("connection {id} from {peer:?}");
    let mut reader = BufReader::new(stream);
    let mut last: Option<FaceEvent> = None;
    let mut line = Vec::with_capacity(128);
    loop {
        line.clear();
        let limit = (MAX_LINE_BYTES + 1) as u64;
        let n = match reader.by_ref().take(limit).read_until(b'\n', &mut line) {
            Ok(0) => break,
            Ok(n) => n,
            Err(e) => {
                warn!("connection {id} dropped: {e}");
                break;
            }
        };
        if line.last() != Some(&b'\n') && n as u64 == limit {
            // oversized record: count it once and skip to the next newline
            shared.counters.malformed.fetch_add(1, Ordering::SeqCst);
            if !skip_line(&mut reader) {
                break;
            }
            continue;
        }
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let event = match decode_bytes(&line) {
            Ok(e) => e,
            Err(e) => {
                debug!("connection {id}: {e}");
                shared.counters.malformed.fetch_add(1, Ordering::SeqCst);
                continue;
            }
        };
        if let Some(prev) = last {
            if event.seq <= prev.seq || event.timestamp_us < prev.timestamp_us {
                shared.counters.out_of_order.fetch_add(1, Ordering::SeqCst);
                continue;
            }
        }
        last = Some(event);
        if shared.queue.push(ReceivedEvent { connection: id, event }) {
            shared.counters.accepted.fetch_add(1, Ordering::SeqCst);
        } else {
            break;
        }
    }
    debug!("connection {id} closed");
}

fn skip_line(reader: &mut impl BufRead) -> bool {
    loop {
        let buf = match reader.fill_buf() {
            Ok([]) | Err(_) => return false,
            Ok(buf) => buf,
        };
        if let Some(pos) = buf.iter().position(|&b| b == b'\n') {
            reader.consume(pos + 1);
            return true;
        }
        let len = buf.len();
        reader.consume(len);
    }
}
