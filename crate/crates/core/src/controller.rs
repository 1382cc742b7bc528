//! Rule-based reconfiguration controller.
//!
//! Face counts map to a target FFT configuration:
//!
//! | faces | domain | points |
//! |-------|--------|--------|
//! | 0     | APU    | 8      |
//! | 1     | APU    | 1024   |
//! | 2     | PL     | 2048   |
//! | > 2   | PL     | 4096   |
//!
//! Each event is turned into a [`ReconfigAction`] (scale, migrate, both or
//! nothing), applied to the [`FunctionState`], and one FFT block of the new
//! configuration is executed to produce an [`ExecutionReport`].

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Configuration, Domain};
use crate::event_bus::FaceEvent;
use crate::fft::{
    mse, quantize, scale_fixed_output, ComplexSample, FftError, FftSize, FixedFftPlan, FloatFftPlan,
};
use crate::power::{PowerBreakdown, PowerError, PowerModel};
use crate::profile::Profile;
use crate::timing::{ApuJitter, TimingEntry, TimingError, TimingModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControllerError {
    #[error("stale action: planned from {planned} but the deployed configuration is {deployed}")]
    StaleAction { planned: Configuration, deployed: Configuration },
    #[error(transparent)]
    Fft(#[from] FftError),
    #[error(transparent)]
    Timing(#[from] TimingError),
    #[error(transparent)]
    Power(#[from] PowerError),
}

/// How a PL function is brought into service.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mechanism {
    /// The PL block stays configured; activation only ungates its clock.
    #[default]
    ClockGating,
    /// A partial bitstream is loaded into the reconfigurable region.
    PartialBitstream,
}

impl std::str::FromStr for Mechanism {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "clock-gating" => Ok(Mechanism::ClockGating),
            "partial-bitstream" => Ok(Mechanism::PartialBitstream),
            other => Err(format!("unknown mechanism `{other}` (expected clock-gating or partial-bitstream)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionKind {
    /// First placement of the function after boot.
    Deploy,
    NoOp,
    ScaleOnly,
    MigrateOnly,
    MigrateAndScale,
}

impl ActionKind {
    pub fn is_migration(self) -> bool {
        matches!(self, ActionKind::MigrateOnly | ActionKind::MigrateAndScale)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReconfigAction {
    pub kind: ActionKind,
    pub from: Configuration,
    pub to: Configuration,
    pub overhead_us: u64,
    pub mechanism: Mechanism,
}

/// Deployed FFT function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionState {
    pub config: Configuration,
    /// True exactly when the function runs on the APU.
    pub pl_clock_gated: bool,
    /// Count of applied non-no-op actions; 0 until the first deployment.
    pub generation: u64,
}

impl FunctionState {
    /// Boot configuration: the zero-faces rule output, not yet deployed.
    pub fn boot() -> Self {
        FunctionState { config: decide(0), pl_clock_gated: true, generation: 0 }
    }

    pub fn is_deployed(&self) -> bool {
        self.generation > 0
    }

    pub fn domain(&self) -> Domain {
        self.config.domain
    }

    pub fn points(&self) -> FftSize {
        self.config.points
    }
}

impl Default for FunctionState {
    fn default() -> Self {
        Self::boot()
    }
}

/// Rule map from face count to target configuration.
pub fn decide(faces: u32) -> Configuration {
    match faces {
        0 => Configuration::new(Domain::Apu, FftSize::P8),
        1 => Configuration::new(Domain::Apu, FftSize::P1024),
        2 => Configuration::new(Domain::Pl, FftSize::P2048),
        _ => Configuration::new(Domain::Pl, FftSize::P4096),
    }
}

/// Every configuration the rule map can produce.
pub fn rule_configurations() -> [Configuration; 4] {
    [decide(0), decide(1), decide(2), decide(3)]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReconfigPolicy {
    pub mechanism: Mechanism,
    pub partial_bitstream_us: u64,
}

impl ReconfigPolicy {
    pub fn from_profile(profile: &Profile, mechanism: Mechanism) -> Self {
        ReconfigPolicy { mechanism, partial_bitstream_us: profile.reconfiguration.partial_bitstream_us }
    }
}

/// Classifies the transition and prices it.
///
/// Only activating a PL function costs anything, and only when it requires
/// a bitstream load; rescaling inside the PL or moving back to the APU is
/// free under either mechanism.
pub fn plan_action(current: &FunctionState, target: Configuration, policy: &ReconfigPolicy) -> ReconfigAction {
    let from = current.config;
    let kind = if !current.is_deployed() {
        ActionKind::Deploy
    } else if from == target {
        ActionKind::NoOp
    } else if from.domain == target.domain {
        ActionKind::ScaleOnly
    } else if from.points == target.points {
        ActionKind::MigrateOnly
    } else {
        ActionKind::MigrateAndScale
    };
    let activates_pl = target.domain == Domain::Pl
        && (kind == ActionKind::Deploy || (kind.is_migration() && from.domain == Domain::Apu));
    let overhead_us = match policy.mechanism {
        Mechanism::PartialBitstream if activates_pl => policy.partial_bitstream_us,
        _ => 0,
    };
    ReconfigAction { kind, from, to: target, overhead_us, mechanism: policy.mechanism }
}

pub fn apply(current: &FunctionState, action: &ReconfigAction) -> Result<FunctionState, ControllerError> {
    let stale = action.from != current.config || (action.kind == ActionKind::Deploy) == current.is_deployed();
    if stale {
        return Err(ControllerError::StaleAction { planned: action.from, deployed: current.config });
    }
    if action.kind == ActionKind::NoOp {
        return Ok(*current);
    }
    Ok(FunctionState {
        config: action.to,
        pl_clock_gated: action.to.domain == Domain::Apu,
        generation: current.generation + 1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub seq: u64,
    pub faces: u32,
    pub config: Configuration,
    /// Modeled execution time of the block (table value, jittered if enabled).
    pub exec_time: TimingEntry,
    pub power: PowerBreakdown,
    /// Float reference vs rescaled fixed-point output; PL executions only.
    pub mse: Option<f64>,
    /// Input components clamped during quantization for the PL path.
    pub saturated: usize,
    /// Simulated time the event was taken up by the controller.
    pub start_us: u64,
    /// Simulated time the configuration becomes active (start + overhead).
    pub active_from_us: u64,
    /// The event asked for a change that the debounce window held back.
    pub suppressed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub action: ReconfigAction,
    pub state: FunctionState,
    pub report: ExecutionReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub mechanism: Mechanism,
    /// Seeds the synthetic input blocks and, if enabled, the APU jitter.
    pub seed: u64,
    pub jitter: bool,
    /// Minimum spacing between applied changes, off when `None`.
    pub debounce_us: Option<u64>,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig { mechanism: Mechanism::ClockGating, seed: 0, jitter: false, debounce_us: None }
    }
}

struct Plans {
    float: FloatFftPlan,
    fixed: FixedFftPlan,
}

/// Seeded complex samples uniform in [-0.5, 0.5), standing in for the
/// played-back input signal.
pub fn synthetic_block(rng: &mut impl Rng, points: FftSize) -> Vec<ComplexSample> {
    (0..points.points())
        .map(|_| ComplexSample::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)))
        .collect()
}

/// Single-writer state machine driving the deployed function.
pub struct Controller {
    state: FunctionState,
    policy: ReconfigPolicy,
    timing: TimingModel,
    power: PowerModel,
    jitter: Option<ApuJitter>,
    signal: ChaCha8Rng,
    plans: BTreeMap<FftSize, Plans>,
    debounce_us: Option<u64>,
    busy_until_us: u64,
    last_change_us: Option<u64>,
}

impl Controller {
    pub fn new(profile: &Profile, config: ControllerConfig) -> Self {
        Controller {
            state: FunctionState::boot(),
            policy: ReconfigPolicy::from_profile(profile, config.mechanism),
            timing: TimingModel::from_profile(profile),
            power: PowerModel::from_profile(profile),
            jitter: config.jitter.then(|| ApuJitter::new(config.seed ^ 0x9e37_79b9_7f4a_7c15)),
            signal: ChaCha8Rng::seed_from_u64(config.seed),
            plans: BTreeMap::new(),
            debounce_us: config.debounce_us,
            busy_until_us: 0,
            last_change_us: None,
        }
    }

    pub fn state(&self) -> FunctionState {
        self.state
    }

    pub fn policy(&self) -> ReconfigPolicy {
        self.policy
    }

    pub fn power_model(&self) -> &PowerModel {
        &self.power
    }

    pub fn timing_model(&self) -> &TimingModel {
        &self.timing
    }

    /// Handles one event with its own timestamp as the simulated clock.
    pub fn process_event(&mut self, event: &FaceEvent) -> Result<Step, ControllerError> {
        self.process_event_at(event, event.timestamp_us)
    }

    /// Handles one event received at `now_us`. An event arriving while a
    /// bitstream load is in flight waits for it to finish.
    pub fn process_event_at(&mut self, event: &FaceEvent, now_us: u64) -> Result<Step, ControllerError> {
        let start_us = now_us.max(self.busy_until_us);
        let target = decide(event.faces);
        let mut action = plan_action(&self.state, target, &self.policy);
        let mut suppressed = false;
        if let (Some(window), Some(last)) = (self.debounce_us, self.last_change_us) {
            if action.kind != ActionKind::NoOp && start_us < last.saturating_add(window) {
                suppressed = true;
                action = ReconfigAction {
                    kind: ActionKind::NoOp,
                    to: action.from,
                    overhead_us: 0,
                    ..action
                };
            }
        }
        let next = apply(&self.state, &action)?;
        let active_from_us = start_us + action.overhead_us;
        if action.kind != ActionKind::NoOp {
            self.last_change_us = Some(start_us);
            self.busy_until_us = active_from_us;
        }
        self.state = next;
        let report = self.execute(event, start_us, active_from_us, suppressed)?;
        Ok(Step { action, state: next, report })
    }

    fn execute(
        &mut self,
        event: &FaceEvent,
        start_us: u64,
        active_from_us: u64,
        suppressed: bool,
    ) -> Result<ExecutionReport, ControllerError> {
        let config = self.state.config;
        let plans = self.plans.entry(config.points).or_insert_with(|| Plans {
            float: FloatFftPlan::new(config.points),
            fixed: FixedFftPlan::new(config.points),
        });
        let input = synthetic_block(&mut self.signal, config.points);
        let reference = plans.float.forward(&input)?;
        let (mse_value, saturated) = match config.domain {
            Domain::Apu => (None, 0),
            Domain::Pl => {
                let q = quantize(&input)?;
                let fixed = plans.fixed.forward(&q.samples)?;
                (Some(mse(&reference, &scale_fixed_output(&fixed))?), q.saturated)
            }
        };
        let mut exec_time = self.timing.lookup_exec_time(config.domain, config.points)?;
        if let Some(jitter) = self.jitter.as_mut() {
            exec_time = jitter.apply(exec_time);
        }
        let power = self.power.power_breakdown(config.domain, config.points)?;
        Ok(ExecutionReport {
            seq: event.seq,
            faces: event.faces,
            config,
            exec_time,
            power,
            mse: mse_value,
            saturated,
            start_us,
            active_from_us,
            suppressed,
        })
    }
}
