//! Device telemetry: periodic snapshots of the deployed configuration and
//! per-rail power, exported as line-delimited records.
//!
//! Record schema (one JSON object per line, same framing as the event wire
//! format):
//!
//! | field               | type            | unit |
//! |---------------------|-----------------|------|
//! | `timestamp_us`      | integer         | µs since session start |
//! | `domain`            | `"apu"`/`"pl"`  | |
//! | `points`            | integer         | FFT points |
//! | `ddr_mw`, `apu_mw`, `pl_mw`, `total_mw` | integer | mW |
//! | `last_exec_time_us` | number          | µs |
//! | `last_mse`          | number or null  | |
//! | `generation`        | integer         | reconfiguration counter |

use std::collections::VecDeque;
use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{ExecutionReport, FunctionState};
use crate::domain::Domain;
use crate::fft::FftSize;
use crate::power::{PowerError, PowerModel};

/// Default sampling period.
pub const DEFAULT_PERIOD_US: u64 = 100_000;

/// Default bound on records held back while a sink is failing.
pub const DEFAULT_BACKLOG: usize = 4096;

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error(transparent)]
    Power(#[from] PowerError),
    #[error("export failed after {delivered} records: {source}")]
    Export { delivered: usize, source: io::Error },
    #[error("cannot open sink {target}: {source}")]
    Sink { target: String, source: io::Error },
    #[error("malformed telemetry record: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetrySample {
    pub timestamp_us: u64,
    pub domain: Domain,
    pub points: FftSize,
    pub ddr_mw: u32,
    pub apu_mw: u32,
    pub pl_mw: u32,
    pub total_mw: u32,
    pub last_exec_time_us: f64,
    #[serde(default)]
    pub last_mse: Option<f64>,
    pub generation: u64,
}

/// Snapshot of `state` plus the latest report at `timestamp_us`.
pub fn sample(
    timestamp_us: u64,
    state: &FunctionState,
    last_report: &ExecutionReport,
    power: &PowerModel,
) -> Result<TelemetrySample, TelemetryError> {
    let p = power.power_breakdown(state.config.domain, state.config.points)?;
    Ok(TelemetrySample {
        timestamp_us,
        domain: state.config.domain,
        points: state.config.points,
        ddr_mw: p.ddr_mw,
        apu_mw: p.apu_mw,
        pl_mw: p.pl_mw,
        total_mw: p.total_mw,
        last_exec_time_us: last_report.exec_time.exec_time_us,
        last_mse: last_report.mse,
        generation: state.generation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    /// One JSON object per line.
    #[default]
    Jsonl,
    /// Comma-separated with a header row.
    Csv,
}

pub const CSV_HEADER: &str =
    "timestamp_us,domain,points,ddr_mw,apu_mw,pl_mw,total_mw,last_exec_time_us,last_mse,generation";

/// Renders one record including the trailing newline.
pub fn render(sample: &TelemetrySample, format: ExportFormat) -> String {
    match format {
        ExportFormat::Jsonl => {
            let mut line = serde_json::to_string(sample).expect("sample serializes");
            line.push('\n');
            line
        }
        ExportFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
            w.serialize(sample).expect("sample serializes");
            String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is UTF-8")
        }
    }
}

pub fn parse(line: &str) -> Result<TelemetrySample, TelemetryError> {
    Ok(serde_json::from_str(line.trim())?)
}

/// Writes every sample as one line. On failure reports how many records
/// made it out; each record goes out in a single write.
pub fn export_stream<W: Write>(
    samples: impl IntoIterator<Item = TelemetrySample>,
    sink: &mut W,
    format: ExportFormat,
) -> Result<usize, TelemetryError> {
    let mut delivered = 0;
    for s in samples {
        let line = render(&s, format);
        sink.write_all(line.as_bytes()).map_err(|source| TelemetryError::Export { delivered, source })?;
        delivered += 1;
    }
    sink.flush().map_err(|source| TelemetryError::Export { delivered, source })?;
    Ok(delivered)
}

/// Opens a file sink in append mode.
pub fn file_sink(path: impl AsRef<Path>) -> Result<File, TelemetryError> {
    let path = path.as_ref();
    OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|source| TelemetryError::Sink { target: path.display().to_string(), source })
}

pub fn socket_sink(addr: impl ToSocketAddrs + std::fmt::Debug) -> Result<TcpStream, TelemetryError> {
    let target = format!("{addr:?}");
    TcpStream::connect(addr).map_err(|source| TelemetryError::Sink { target, source })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ExportStats {
    pub delivered: u64,
    pub backlog: usize,
    pub dropped: u64,
    pub failures: u64,
}

/// Buffered exporter: records that cannot be written stay in a bounded
/// backlog (oldest dropped first) and are retried on the next push.
pub struct Exporter<W: Write> {
    sink: W,
    format: ExportFormat,
    backlog: VecDeque<String>,
    capacity: usize,
    stats: ExportStats,
    header_pending: bool,
}

impl<W: Write> Exporter<W> {
    pub fn new(sink: W, format: ExportFormat) -> Self {
        Self::with_backlog(sink, format, DEFAULT_BACKLOG)
    }

    pub fn with_backlog(sink: W, format: ExportFormat, capacity: usize) -> Self {
        Exporter {
            sink,
            format,
            backlog: VecDeque::new(),
            capacity: capacity.max(1),
            stats: ExportStats::default(),
            header_pending: format == ExportFormat::Csv,
        }
    }

    /// Skips the CSV header, e.g. when appending to a non-empty file.
    pub fn without_header(mut self) -> Self {
        self.header_pending = false;
        self
    }

    pub fn push(&mut self, sample: &TelemetrySample) -> Result<(), TelemetryError> {
        if self.backlog.len() == self.capacity {
            self.backlog.pop_front();
            self.stats.dropped += 1;
        }
        self.backlog.push_back(render(sample, self.format));
        self.flush()
    }

    pub fn flush(&mut self) -> Result<(), TelemetryError> {
        let result = self.drain();
        if result.is_err() {
            self.stats.failures += 1;
        }
        self.stats.backlog = self.backlog.len();
        result
    }

    fn drain(&mut self) -> Result<(), TelemetryError> {
        let err = |delivered: u64, source| TelemetryError::Export { delivered: delivered as usize, source };
        if self.header_pending {
            let header = format!("{CSV_HEADER}\n");
            self.sink.write_all(header.as_bytes()).map_err(|e| err(self.stats.delivered, e))?;
            self.header_pending = false;
        }
        while let Some(line) = self.backlog.front() {
            self.sink.write_all(line.as_bytes()).map_err(|e| err(self.stats.delivered, e))?;
            self.backlog.pop_front();
            self.stats.delivered += 1;
        }
        self.sink.flush().map_err(|e| err(self.stats.delivered, e))
    }

    pub fn stats(&self) -> ExportStats {
        ExportStats { backlog: self.backlog.len(), ..self.stats }
    }

    pub fn sink_mut(&mut self) -> &mut W {
        &mut self.sink
    }

    pub fn into_inner(self) -> W {
        self.sink
    }
}

/// Sample times at a fixed period in simulated time.
#[derive(Debug, Clone)]
pub struct PeriodicSampler {
    period_us: u64,
    next_due_us: u64,
}

impl PeriodicSampler {
    pub fn new(period_us: u64) -> Self {
        PeriodicSampler { period_us: period_us.max(1), next_due_us: 0 }
    }

    pub fn period_us(&self) -> u64 {
        self.period_us
    }

    /// Due sample times up to and including `until_us`.
    pub fn due_until(&mut self, until_us: u64) -> Vec<u64> {
        let mut due = Vec::new();
        while self.next_due_us <= until_us {
            due.push(self.next_due_us);
            self.next_due_us += self.period_us;
        }
        due
    }
}

/// Piecewise-constant energy integration in mW·µs (nJ).
#[derive(Debug, Clone, Default)]
pub struct EnergyMeter {
    current: Option<(u64, u32)>,
    accumulated: u128,
}

impl EnergyMeter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Power draw changes to `total_mw` at `at_us`.
    pub fn record(&mut self, at_us: u64, total_mw: u32) {
        if let Some((since, mw)) = self.current {
            self.accumulated += mw as u128 * at_us.saturating_sub(since) as u128;
        }
        self.current = Some((at_us, total_mw));
    }

    /// Energy up to `end_us`.
    pub fn total_at(&self, end_us: u64) -> u128 {
        match self.current {
            Some((since, mw)) => self.accumulated + mw as u128 * end_us.saturating_sub(since) as u128,
            None => self.accumulated,
        }
    }
}

/// Sample-and-hold integration of `total_mw` over `samples` up to `end_us`.
pub fn integrate_samples(samples: &[TelemetrySample], end_us: u64) -> u128 {
    let mut meter = EnergyMeter::new();
    for s in samples {
        meter.record(s.timestamp_us, s.total_mw);
    }
    meter.total_at(end_us)
}

/// Latest state visible to the wall-clock sampler.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub state: FunctionState,
    pub report: ExecutionReport,
}

pub type SharedSnapshot = Arc<Mutex<Option<Snapshot>>>;

pub type BoxedExporter = Exporter<Box<dyn Write + Send>>;

/// What a stopped sampler hands back: its samples and the flushed sinks.
#[derive(Default)]
pub struct SamplerOutput {
    pub samples: Vec<TelemetrySample>,
    pub sinks: Vec<BoxedExporter>,
}

/// Background sampler reading the shared snapshot every `period`.
pub struct SamplerHandle {
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<SamplerOutput>>,
}

impl SamplerHandle {
    /// Stops the sampler and returns everything it sampled.
    pub fn stop(mut self) -> SamplerOutput {
        self.stop.store(true, Ordering::SeqCst);
        self.thread.take().map(|t| t.join().unwrap_or_default()).unwrap_or_default()
    }
}

impl Drop for SamplerHandle {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Spawns a wall-clock sampler. Samples are pushed to `sinks` as they are
/// taken; sink failures are absorbed by each exporter's backlog. Consecutive
/// timestamps are never closer than `period`.
pub fn spawn_sampler(
    snapshot: SharedSnapshot,
    power: PowerModel,
    period: Duration,
    session_start: Instant,
    mut sinks: Vec<BoxedExporter>,
) -> SamplerHandle {
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    let thread = thread::Builder::new()
        .name("telemetry-sampler".into())
        .spawn(move || {
            let mut taken = Vec::new();
            let mut last_ts: Option<u64> = None;
            let period_us = period.as_micros().max(1) as u64;
            loop {
                let now = session_start.elapsed().as_micros() as u64;
                let due = last_ts.map_or(now, |t| t + period_us);
                if now < due {
                    if flag.load(Ordering::SeqCst) {
                        break;
                    }
                    thread::sleep(Duration::from_micros((due - now).min(5_000)));
                    continue;
                }
                let current = snapshot.lock().unwrap_or_else(|e| e.into_inner()).clone();
                if let Some(snap) = current {
                    if let Ok(s) = sample(now, &snap.state, &snap.report, &power) {
                        for sink in sinks.iter_mut() {
                            if let Err(e) = sink.push(&s) {
                                log::warn!("telemetry sink: {e}");
                            }
                        }
                        taken.push(s);
                    }
                }
                last_ts = Some(now);
                if flag.load(Ordering::SeqCst) {
                    break;
                }
            }
            for sink in sinks.iter_mut() {
                let _ = sink.flush();
            }
            SamplerOutput { samples: taken, sinks }
        })
        .expect("spawn sampler thread");
    SamplerHandle { stop, thread: Some(thread) }
}
