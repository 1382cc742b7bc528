//! Scenario files.
//!
//! A scenario is one TOML document. Every section and field is optional
//! except the input source:
//!
//! ```toml
//! name = "demo"
//! profile = "my-board.toml"     # default: the embedded board profile
//!
//! [input]                       # exactly one of these
//! trace = "demo.trace"          # path, relative to this file
//! events = "0 0\n1000 1"        # inline trace text
//! listen = "127.0.0.1:7878"     # live socket ingestion, wall clock
//!
//! [controller]
//! mechanism = "clock-gating"    # or "partial-bitstream"
//! seed = 0
//! jitter = false                # ±10% seeded spread on APU times
//! # debounce_us = 5000          # off unless set
//!
//! [telemetry]
//! period_us = 100000
//! format = "jsonl"              # or "csv"
//! # file = "telemetry.jsonl"
//! # socket = "127.0.0.1:9000"
//!
//! [run]
//! fast_forward = true           # trace input only; false replays in real time
//! tail_us = 1000                # session end after the last event
//! # max_events = 100
//! # idle_timeout_ms = 5000      # live input only
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use rmlayer_core::event_bus::{load_trace, parse_trace, TraceEntry};
use rmlayer_core::telemetry::{ExportFormat, DEFAULT_PERIOD_US};
use rmlayer_core::{Mechanism, Profile};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: Option<String>,
    pub profile: Option<PathBuf>,
    pub input: InputSection,
    pub controller: ControllerSection,
    pub telemetry: TelemetrySection,
    pub run: RunSection,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputSection {
    pub trace: Option<PathBuf>,
    pub events: Option<String>,
    pub listen: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSection {
    pub mechanism: Mechanism,
    pub seed: u64,
    pub jitter: bool,
    pub debounce_us: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TelemetrySection {
    pub period_us: u64,
    pub format: ExportFormat,
    pub file: Option<PathBuf>,
    pub socket: Option<String>,
}

impl Default for TelemetrySection {
    fn default() -> Self {
        TelemetrySection { period_us: DEFAULT_PERIOD_US, format: ExportFormat::Jsonl, file: None, socket: None }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub fast_forward: bool,
    pub tail_us: u64,
    pub max_events: Option<u64>,
    pub idle_timeout_ms: Option<u64>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { fast_forward: true, tail_us: 1000, max_events: None, idle_timeout_ms: None }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub listen: Option<String>,
    pub trace: Option<PathBuf>,
    pub mechanism: Option<Mechanism>,
    pub telemetry_file: Option<PathBuf>,
    pub telemetry_socket: Option<String>,
    pub fast_forward: Option<bool>,
    pub seed: Option<u64>,
}

/// Where events come from once the scenario is resolved.
#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    Trace { label: String, entries: Vec<TraceEntry> },
    Listen(String),
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads a scenario and makes its relative paths relative to the file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut scenario: Scenario =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut scenario.profile, &mut scenario.input.trace, &mut scenario.telemetry.file].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if scenario.name.is_none() {
            scenario.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        Ok(scenario)
    }

    /// Applies overrides; a trace or listen flag replaces the file's input.
    pub fn apply(&mut self, o: &Overrides) {
        if o.trace.is_some() || o.listen.is_some() {
            self.input = InputSection { trace: o.trace.clone(), events: None, listen: o.listen.clone() };
        }
        if let Some(m) = o.mechanism {
            self.controller.mechanism = m;
        }
        if let Some(seed) = o.seed {
            self.controller.seed = seed;
        }
        if let Some(f) = &o.telemetry_file {
            self.telemetry.file = Some(f.clone());
        }
        if let Some(s) = &o.telemetry_socket {
            self.telemetry.socket = Some(s.clone());
        }
        if let Some(ff) = o.fast_forward {
            self.run.fast_forward = ff;
        }
    }

    pub fn name(&self) -> &str {
        self.name.as_deref().unwrap_or("scenario")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let sources = [self.input.trace.is_some(), self.input.events.is_some(), self.input.listen.is_some()];
        match sources.iter().filter(|&&b| b).count() {
            1 => {}
            0 => return Err(CliError::Config("input: one of `trace`, `events` or `listen` is required".into())),
            _ => return Err(CliError::Config("input: `trace`, `events` and `listen` are mutually exclusive".into())),
        }
        if self.telemetry.period_us == 0 {
            return Err(CliError::Config("telemetry.period_us: must be positive".into()));
        }
        if self.controller.debounce_us == Some(0) {
            return Err(CliError::Config("controller.debounce_us: must be positive when set".into()));
        }
        if self.run.max_events == Some(0) {
            return Err(CliError::Config("run.max_events: must be positive when set".into()));
        }
        Ok(())
    }

    pub fn resolve_input(&self) -> Result<Input, CliError> {
        self.validate()?;
        if let Some(addr) = &self.input.listen {
            return Ok(Input::Listen(addr.clone()));
        }
        let (label, entries) = match (&self.input.trace, &self.input.events) {
            (Some(path), _) => (path.display().to_string(), load_trace(path)),
            (None, Some(text)) => ("inline".to_string(), parse_trace(text)),
            (None, None) => unreachable!("validated above"),
        };
        let entries = entries.map_err(|e| CliError::Config(format!("input: {e}")))?;
        if entries.is_empty() {
            return Err(CliError::Config(format!("input: trace {label} has no events")));
        }
        Ok(Input::Trace { label, entries })
    }

    pub fn load_profile(&self) -> Result<Profile, CliError> {
        match &self.profile {
            Some(path) => Ok(Profile::from_path(path)?),
            None => Ok(Profile::embedded()),
        }
    }
}
