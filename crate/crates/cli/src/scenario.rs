//! End-to-end scenario runs: event ingestion, control, telemetry, summary.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::Sender;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use log::{info, warn};
use serde::Serialize;

use rmlayer_core::event_bus::{replay, EventServer, ReplayMode, ServerConfig, ServerStats, TraceEntry};
use rmlayer_core::telemetry::{
    file_sink, sample, socket_sink, spawn_sampler, BoxedExporter, EnergyMeter, ExportFormat, Exporter,
    PeriodicSampler, SharedSnapshot, Snapshot,
};
use rmlayer_core::{
    ActionKind, Configuration, Controller, ControllerConfig, FaceEvent, Mechanism, PowerModel, Step,
    TelemetrySample,
};

use crate::config::{Input, Scenario, TelemetrySection};
use crate::CliError;

/// External control over a run.
#[derive(Debug, Default, Clone)]
pub struct RunHooks {
    /// Set to end the run early; queued events are still processed.
    pub stop: Arc<AtomicBool>,
    /// Receives the bound address in live mode.
    pub bound: Option<Sender<SocketAddr>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    FastForward,
    WallClock,
    Live,
}

impl RunMode {
    fn as_str(self) -> &'static str {
        match self {
            RunMode::FastForward => "fast-forward",
            RunMode::WallClock => "wall-clock",
            RunMode::Live => "live",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionRecord {
    pub seq: u64,
    pub faces: u32,
    pub received_us: u64,
    pub start_us: u64,
    pub active_from_us: u64,
    pub kind: ActionKind,
    pub from: Configuration,
    pub to: Configuration,
    pub overhead_us: u64,
    pub exec_time_us: f64,
    pub suppressed: bool,
}

impl ActionRecord {
    fn new(step: &Step, received_us: u64) -> Self {
        ActionRecord {
            seq: step.report.seq,
            faces: step.report.faces,
            received_us,
            start_us: step.report.start_us,
            active_from_us: step.report.active_from_us,
            kind: step.action.kind,
            from: step.action.from,
            to: step.action.to,
            overhead_us: step.action.overhead_us,
            exec_time_us: step.report.exec_time.exec_time_us,
            suppressed: step.report.suppressed,
        }
    }

    /// Compact form: `deploy(APU,8)`, `ScaleOnly→1024`, `MigrateAndScale→(PL,2048)`.
    pub fn label(&self) -> String {
        match self.kind {
            ActionKind::Deploy => format!("deploy{}", self.to),
            ActionKind::NoOp => "NoOp".to_string(),
            ActionKind::ScaleOnly => format!("ScaleOnly→{}", self.to.points),
            ActionKind::MigrateOnly => format!("MigrateOnly→{}", self.to.domain),
            ActionKind::MigrateAndScale => format!("MigrateAndScale→{}", self.to),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dwell {
    pub config: Configuration,
    pub dwell_us: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlExecution {
    pub seq: u64,
    pub config: Configuration,
    pub mse: f64,
    pub saturated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SinkReport {
    pub target: String,
    pub delivered: u64,
    pub dropped: u64,
    pub failures: u64,
    pub backlog: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub input: String,
    pub mode: RunMode,
    pub mechanism: Mechanism,
    pub seed: u64,
    pub actions: Vec<ActionRecord>,
    pub dwell: Vec<Dwell>,
    pub session_start_us: u64,
    pub session_end_us: u64,
    /// mW·µs, i.e. nJ.
    pub energy_mw_us: u64,
    pub pl_executions: Vec<PlExecution>,
    pub telemetry_samples: usize,
    pub sinks: Vec<SinkReport>,
    pub server: Option<ServerStats>,
    pub interrupted: bool,
}

impl RunSummary {
    pub fn count(&self, kind: ActionKind) -> usize {
        self.actions.iter().filter(|a| a.kind == kind).count()
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "scenario {}: {} events from {}, {}, {}, seed {}",
            self.scenario,
            self.actions.len(),
            self.input,
            self.mode.as_str(),
            mechanism_name(self.mechanism),
            self.seed
        );
        let _ = writeln!(out, "\nactions");
        let _ = writeln!(out, "  {:>6} {:>10} {:>6}  action", "seq", "t_us", "faces");
        for a in &self.actions {
            let mut label = a.label();
            if a.overhead_us > 0 {
                let _ = write!(label, " (+{} µs)", a.overhead_us);
            }
            if a.start_us > a.received_us {
                let _ = write!(label, " queued until {}", a.start_us);
            }
            if a.suppressed {
                label.push_str(" [debounced]");
            }
            let _ = writeln!(out, "  {:>6} {:>10} {:>6}  {label}", a.seq, a.received_us, a.faces);
        }
        let _ = writeln!(out, "\ndwell");
        for d in &self.dwell {
            let _ = writeln!(out, "  {:<12} {:>10} µs", d.config.to_string(), d.dwell_us);
        }
        let span = self.session_end_us - self.session_start_us;
        let mean = if span > 0 { self.energy_mw_us as f64 / span as f64 } else { 0.0 };
        let _ = writeln!(
            out,
            "\nenergy {:.6} mJ over {} µs (mean {:.1} mW)",
            self.energy_mw_us as f64 * 1e-6,
            span,
            mean
        );
        let _ = writeln!(out, "\npl executions");
        if self.pl_executions.is_empty() {
            let _ = writeln!(out, "  none");
        }
        for p in &self.pl_executions {
            let _ = writeln!(
                out,
                "  seq {:>6}  {:<12} mse {:.6e}  saturated {}",
                p.seq,
                p.config.to_string(),
                p.mse,
                p.saturated
            );
        }
        let _ = writeln!(out, "\ntelemetry {} samples", self.telemetry_samples);
        for s in &self.sinks {
            let _ = writeln!(
                out,
                "  {}: {} delivered, {} dropped, {} failures, {} pending",
                s.target, s.delivered, s.dropped, s.failures, s.backlog
            );
        }
        if let Some(st) = &self.server {
            let _ = writeln!(
                out,
                "\nserver {} connections, {} accepted, {} malformed, {} out of order, {} dropped",
                st.connections, st.accepted, st.malformed, st.out_of_order, st.dropped
            );
        }
        if self.interrupted {
            let _ = writeln!(out, "\ninterrupted");
        }
        out
    }

    pub fn render_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

fn mechanism_name(m: Mechanism) -> &'static str {
    match m {
        Mechanism::ClockGating => "clock-gating",
        Mechanism::PartialBitstream => "partial-bitstream",
    }
}

struct Session {
    controller: Controller,
    steps: Vec<(Step, u64)>,
    meter: EnergyMeter,
}

impl Session {
    fn handle(&mut self, event: &FaceEvent, now_us: u64) -> Result<&Step, CliError> {
        let step = self.controller.process_event_at(event, now_us).map_err(|e| CliError::Runtime(e.to_string()))?;
        self.meter.record(step.report.start_us, step.report.power.total_mw);
        self.steps.push((step, now_us));
        Ok(&self.steps.last().expect("just pushed").0)
    }

    fn last(&self) -> Option<&Step> {
        self.steps.last().map(|(s, _)| s)
    }
}

struct Telemetry {
    exporters: Vec<BoxedExporter>,
    targets: Vec<String>,
    samples: usize,
}

impl Telemetry {
    fn open(cfg: &TelemetrySection) -> Result<Self, CliError> {
        let mut exporters: Vec<BoxedExporter> = Vec::new();
        let mut targets = Vec::new();
        if let Some(path) = &cfg.file {
            let existing = fs::metadata(path).map(|m| m.len() > 0).unwrap_or(false);
            let file = file_sink(path).map_err(|e| CliError::Runtime(e.to_string()))?;
            let mut exporter = Exporter::new(Box::new(file) as Box<dyn Write + Send>, cfg.format);
            if existing && cfg.format == ExportFormat::Csv {
                exporter = exporter.without_header();
            }
            exporters.push(exporter);
            targets.push(format!("file {}", path.display()));
        }
        if let Some(addr) = &cfg.socket {
            let stream = socket_sink(addr.as_str()).map_err(|e| CliError::Runtime(e.to_string()))?;
            exporters.push(Exporter::new(Box::new(stream), cfg.format));
            targets.push(format!("socket {addr}"));
        }
        Ok(Telemetry { exporters, targets, samples: 0 })
    }

    fn push(&mut self, s: &TelemetrySample) {
        for e in self.exporters.iter_mut() {
            if let Err(err) = e.push(s) {
                warn!("telemetry: {err}");
            }
        }
        self.samples += 1;
    }

    fn finish(mut self) -> (usize, Vec<SinkReport>) {
        for e in self.exporters.iter_mut() {
            if let Err(err) = e.flush() {
                warn!("telemetry flush: {err}");
            }
        }
        let reports = self
            .exporters
            .iter()
            .zip(self.targets)
            .map(|(e, target)| {
                let st = e.stats();
                SinkReport { target, delivered: st.delivered, dropped: st.dropped, failures: st.failures, backlog: st.backlog }
            })
            .collect();
        (self.samples, reports)
    }
}

/// Runs `scenario` to completion (or until `hooks.stop` is set).
pub fn cmd_run(scenario: &Scenario, hooks: RunHooks) -> Result<RunSummary, CliError> {
    let input = scenario.resolve_input()?;
    let profile = scenario.load_profile()?;
    let config = ControllerConfig {
        mechanism: scenario.controller.mechanism,
        seed: scenario.controller.seed,
        jitter: scenario.controller.jitter,
        debounce_us: scenario.controller.debounce_us,
    };
    let session = Session { controller: Controller::new(&profile, config), steps: Vec::new(), meter: EnergyMeter::new() };
    let telemetry = Telemetry::open(&scenario.telemetry)?;
    let max = scenario.run.max_events.unwrap_or(u64::MAX) as usize;
    let (mode, label, outcome) = match input {
        Input::Trace { label, entries } => {
            let entries: Vec<TraceEntry> = entries.into_iter().take(max).collect();
            if scenario.run.fast_forward {
                (RunMode::FastForward, label, fast_forward(session, telemetry, &entries, scenario, &hooks)?)
            } else {
                (RunMode::WallClock, label, wall_clock(session, telemetry, &entries, scenario, &hooks)?)
            }
        }
        Input::Listen(addr) => {
            let label = format!("listener {addr}");
            (RunMode::Live, label, live(session, telemetry, &addr, scenario, &hooks)?)
        }
    };
    Ok(summarize(scenario, mode, label, outcome))
}

struct Outcome {
    session: Session,
    end_us: u64,
    samples: usize,
    sinks: Vec<SinkReport>,
    server: Option<ServerStats>,
    interrupted: bool,
}

fn settle_time(session: &Session, tail_us: u64) -> u64 {
    session.last().map_or(0, |s| s.report.start_us.max(s.report.active_from_us)) + tail_us
}

fn fast_forward(
    mut session: Session,
    mut telemetry: Telemetry,
    trace: &[TraceEntry],
    scenario: &Scenario,
    hooks: &RunHooks,
) -> Result<Outcome, CliError> {
    let power = session.controller.power_model().clone();
    let mut sampler = PeriodicSampler::new(scenario.telemetry.period_us);
    let mut interrupted = false;
    let emit = |telemetry: &mut Telemetry, times: Vec<u64>, step: Option<&Step>| -> Result<(), CliError> {
        let Some(step) = step else { return Ok(()) };
        for t in times {
            let s = sample(t, &step.state, &step.report, &power).map_err(|e| CliError::Runtime(e.to_string()))?;
            telemetry.push(&s);
        }
        Ok(())
    };
    for event in replay(trace, ReplayMode::FastForward) {
        if hooks.stop.load(Ordering::SeqCst) {
            interrupted = true;
            break;
        }
        let prev = session.last().cloned();
        let start = session.handle(&event, event.timestamp_us)?.report.start_us;
        let due = start.checked_sub(1).map(|t| sampler.due_until(t)).unwrap_or_default();
        emit(&mut telemetry, due, prev.as_ref())?;
    }
    let end_us = settle_time(&session, scenario.run.tail_us);
    let due = sampler.due_until(end_us.saturating_sub(1));
    emit(&mut telemetry, due, session.last())?;
    let (samples, sinks) = telemetry.finish();
    Ok(Outcome { session, end_us, samples, sinks, server: None, interrupted })
}

/// Sleeps until `deadline`, waking early on stop. Returns false if stopped.
fn sleep_until(deadline: Instant, stop: &AtomicBool) -> bool {
    loop {
        if stop.load(Ordering::SeqCst) {
            return false;
        }
        let now = Instant::now();
        if now >= deadline {
            return true;
        }
        thread::sleep((deadline - now).min(Duration::from_millis(20)));
    }
}

fn publish(snapshot: &SharedSnapshot, step: &Step) {
    *snapshot.lock().unwrap_or_else(|e| e.into_inner()) = Some(Snapshot { state: step.state, report: step.report.clone() });
}

fn start_sampler(
    power: &PowerModel,
    telemetry: Telemetry,
    period_us: u64,
    session_start: Instant,
) -> (SharedSnapshot, rmlayer_core::telemetry::SamplerHandle, Vec<String>) {
    let snapshot: SharedSnapshot = Arc::new(Mutex::new(None));
    let handle = spawn_sampler(
        snapshot.clone(),
        power.clone(),
        Duration::from_micros(period_us),
        session_start,
        telemetry.exporters,
    );
    (snapshot, handle, telemetry.targets)
}

fn stop_sampler(handle: rmlayer_core::telemetry::SamplerHandle, targets: Vec<String>) -> (usize, Vec<SinkReport>) {
    let out = handle.stop();
    let telemetry = Telemetry { exporters: out.sinks, targets, samples: out.samples.len() };
    telemetry.finish()
}

fn wall_clock(
    mut session: Session,
    telemetry: Telemetry,
    trace: &[TraceEntry],
    scenario: &Scenario,
    hooks: &RunHooks,
) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let power = session.controller.power_model().clone();
    let (snapshot, sampler, targets) = start_sampler(&power, telemetry, scenario.telemetry.period_us, start);
    let mut interrupted = false;
    for event in replay(trace, ReplayMode::FastForward) {
        if !sleep_until(start + Duration::from_micros(event.timestamp_us), &hooks.stop) {
            interrupted = true;
            break;
        }
        let step = session.handle(&event, event.timestamp_us)?;
        publish(&snapshot, step);
    }
    let end_us = settle_time(&session, scenario.run.tail_us);
    if !interrupted && !sleep_until(start + Duration::from_micros(end_us), &hooks.stop) {
        interrupted = true;
    }
    let end_us = if interrupted { (start.elapsed().as_micros() as u64).max(end_us - scenario.run.tail_us) } else { end_us };
    let (samples, sinks) = stop_sampler(sampler, targets);
    Ok(Outcome { session, end_us, samples, sinks, server: None, interrupted })
}

fn live(
    mut session: Session,
    telemetry: Telemetry,
    addr: &str,
    scenario: &Scenario,
    hooks: &RunHooks,
) -> Result<Outcome, CliError> {
    let mut server = EventServer::bind(addr, ServerConfig::default()).map_err(|e| CliError::Runtime(e.to_string()))?;
    let local = server.local_addr();
    info!("listening on {local}");
    if let Some(tx) = &hooks.bound {
        let _ = tx.send(local);
    }
    let start = Instant::now();
    let now_us = || start.elapsed().as_micros() as u64;
    let power = session.controller.power_model().clone();
    let (snapshot, sampler, targets) = start_sampler(&power, telemetry, scenario.telemetry.period_us, start);

    // the function comes up in the no-face configuration before any event
    let boot = FaceEvent { faces: 0, seq: 0, timestamp_us: 0 };
    publish(&snapshot, session.handle(&boot, 0)?);

    let max = scenario.run.max_events.unwrap_or(u64::MAX);
    let idle = scenario.run.idle_timeout_ms.map(Duration::from_millis);
    let queue = server.queue();
    let mut received = 0u64;
    let mut last_activity = Instant::now();
    let mut interrupted = false;
    while received < max {
        if hooks.stop.load(Ordering::SeqCst) {
            interrupted = true;
            break;
        }
        if idle.is_some_and(|d| last_activity.elapsed() >= d) {
            info!("idle timeout");
            break;
        }
        match queue.recv_timeout(Duration::from_millis(20)) {
            Some(r) => {
                received += 1;
                publish(&snapshot, session.handle(&r.event, now_us())?);
                last_activity = Instant::now();
            }
            None if queue.is_closed() => break,
            None => {}
        }
    }
    server.shutdown();
    for r in queue.drain() {
        if received >= max {
            break;
        }
        received += 1;
        publish(&snapshot, session.handle(&r.event, now_us())?);
    }
    let end_us = now_us().max(settle_time(&session, 0));
    let (samples, sinks) = stop_sampler(sampler, targets);
    Ok(Outcome { session, end_us, samples, sinks, server: Some(server.stats()), interrupted })
}

fn summarize(scenario: &Scenario, mode: RunMode, input: String, o: Outcome) -> RunSummary {
    let steps = &o.session.steps;
    let actions: Vec<ActionRecord> = steps.iter().map(|(s, received)| ActionRecord::new(s, *received)).collect();
    let mut dwell: Vec<Dwell> = Vec::new();
    for (i, (step, _)) in steps.iter().enumerate() {
        let from = step.report.start_us;
        let until = steps.get(i + 1).map_or(o.end_us, |(n, _)| n.report.start_us).max(from);
        match dwell.iter_mut().find(|d| d.config == step.state.config) {
            Some(d) => d.dwell_us += until - from,
            None => dwell.push(Dwell { config: step.state.config, dwell_us: until - from }),
        }
    }
    let pl_executions = steps
        .iter()
        .filter_map(|(s, _)| {
            s.report.mse.map(|mse| PlExecution { seq: s.report.seq, config: s.report.config, mse, saturated: s.report.saturated })
        })
        .collect();
    let session_start_us = steps.first().map_or(0, |(s, _)| s.report.start_us);
    RunSummary {
        scenario: scenario.name().to_string(),
        input,
        mode,
        mechanism: scenario.controller.mechanism,
        seed: scenario.controller.seed,
        actions,
        dwell,
        session_start_us,
        session_end_us: o.end_us.max(session_start_us),
        energy_mw_us: u64::try_from(o.session.meter.total_at(o.end_us)).unwrap_or(u64::MAX),
        pl_executions,
        telemetry_samples: o.samples,
        sinks: o.sinks,
        server: o.server,
        interrupted: o.interrupted,
    }
}
