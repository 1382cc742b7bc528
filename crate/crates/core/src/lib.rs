//! Resource management layer for an FFT function on an FPGA SoC radio unit.
//!
//! An event-driven controller migrates and scales an FFT between a software
//! domain (APU, double-precision) and an emulated accelerator domain (PL,
//! scaled Q1.15), using table-calibrated timing and power models. Around it
//! sit a line-delimited event pipeline, a low-PHY latency budget analyzer
//! and telemetry export.

pub mod controller;
pub mod domain;
pub mod event_bus;
pub mod fft;
pub mod latency;
pub mod power;
pub mod profile;
pub mod telemetry;
pub mod timing;

pub use controller::{
    apply, decide, plan_action, ActionKind, Controller, ControllerConfig, ControllerError, ExecutionReport,
    FunctionState, Mechanism, ReconfigAction, ReconfigPolicy, Step,
};
pub use domain::{Configuration, Domain};
pub use event_bus::{BusError, FaceEvent};
pub use fft::{ComplexSample, FftError, FftSize, FixedComplexSample};
pub use latency::{BudgetError, BudgetReport, NumerologyConfig};
pub use power::{PowerBreakdown, PowerError, PowerModel, Rail};
pub use profile::{Profile, ProfileError};
pub use telemetry::{TelemetryError, TelemetrySample};
pub use timing::{Provenance, TimingEntry, TimingError, TimingModel};
