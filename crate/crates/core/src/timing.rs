//! Execution-time model for each (domain, FFT size) pair.
//!
//! The calibrated table is the model of record. Live wall-clock
//! measurement of the software FFT is available for reporting next to it,
//! but it never feeds the controller's decisions: desk hardware is not the
//! embedded target, so absolute figures only transfer as constants.

use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Domain;
use crate::fft::{ComplexSample, FftSize, FloatFftPlan};
use crate::profile::{Profile, TimingRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Measured in the running real-time system.
    TableMeasured,
    /// Obtained through dedicated measurements outside the real-time system.
    TableExtracted,
    /// Log-linear interpolation between calibrated sizes (opt-in).
    Interpolated,
    /// Wall-clock measurement on the host running this code.
    LiveMeasured,
}

impl Provenance {
    /// Whether the table prints this value in brackets.
    pub fn is_extracted(self) -> bool {
        matches!(self, Provenance::TableExtracted)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimingError {
    #[error("no calibrated {domain} execution time for {points}-point FFT")]
    UncalibratedSize { domain: Domain, points: FftSize },
    #[error("measurement needs at least one run")]
    NoRuns,
    #[error("clock failure: {0}")]
    Clock(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingEntry {
    pub domain: Domain,
    pub points: FftSize,
    pub exec_time_us: f64,
    pub provenance: Provenance,
}

/// Table-driven execution-time lookup.
#[derive(Debug, Clone)]
pub struct TimingModel {
    rows: BTreeMap<FftSize, TimingRow>,
    interpolate: bool,
}

impl TimingModel {
    pub fn new(rows: impl IntoIterator<Item = TimingRow>) -> Self {
        TimingModel { rows: rows.into_iter().map(|r| (r.points, r)).collect(), interpolate: false }
    }

    pub fn from_profile(profile: &Profile) -> Self {
        Self::new(profile.timing.iter().cloned())
    }

    /// Enables log-linear interpolation for sizes between calibrated rows.
    pub fn with_interpolation(mut self, enabled: bool) -> Self {
        self.interpolate = enabled;
        self
    }

    pub fn calibrated_sizes(&self) -> impl Iterator<Item = FftSize> + '_ {
        self.rows.keys().copied()
    }

    pub fn row(&self, points: FftSize) -> Option<&TimingRow> {
        self.rows.get(&points)
    }

    pub fn lookup_exec_time(&self, domain: Domain, points: FftSize) -> Result<TimingEntry, TimingError> {
        if let Some(row) = self.rows.get(&points) {
            let (exec_time_us, provenance) = match domain {
                Domain::Apu => (row.apu_us, row.apu_provenance),
                Domain::Pl => (row.pl_us, row.pl_provenance),
            };
            return Ok(TimingEntry { domain, points, exec_time_us, provenance });
        }
        if self.interpolate {
            if let Some(exec_time_us) = self.interpolate_time(domain, points) {
                return Ok(TimingEntry { domain, points, exec_time_us, provenance: Provenance::Interpolated });
            }
        }
        Err(TimingError::UncalibratedSize { domain, points })
    }

    fn interpolate_time(&self, domain: Domain, points: FftSize) -> Option<f64> {
        let below = self.rows.range(..points).next_back()?.1;
        let above = self.rows.range(points..).next()?.1;
        let pick = |r: &TimingRow| match domain {
            Domain::Apu => r.apu_us,
            Domain::Pl => r.pl_us,
        };
        let (x0, x1) = ((below.points.points() as f64).ln(), (above.points.points() as f64).ln());
        let (y0, y1) = (pick(below).ln(), pick(above).ln());
        let x = (points.points() as f64).ln();
        Some((y0 + (y1 - y0) * (x - x0) / (x1 - x0)).exp())
    }

    /// APU time divided by PL time.
    pub fn acceleration_factor(&self, points: FftSize) -> Result<f64, TimingError> {
        let apu = self.lookup_exec_time(Domain::Apu, points)?;
        let pl = self.lookup_exec_time(Domain::Pl, points)?;
        Ok(apu.exec_time_us / pl.exec_time_us)
    }

    /// The acceleration factor printed alongside the calibration, if any.
    pub fn reported_acceleration(&self, points: FftSize) -> Option<f64> {
        self.rows.get(&points).and_then(|r| r.reported_acceleration)
    }
}

/// Seeded uniform jitter applied to APU execution times.
///
/// PL times are deterministic and pass through untouched.
#[derive(Debug, Clone)]
pub struct ApuJitter {
    spread: f64,
    rng: ChaCha8Rng,
}

impl ApuJitter {
    pub const DEFAULT_SPREAD: f64 = 0.10;

    pub fn new(seed: u64) -> Self {
        Self::with_spread(seed, Self::DEFAULT_SPREAD)
    }

    pub fn with_spread(seed: u64, spread: f64) -> Self {
        ApuJitter { spread: spread.clamp(0.0, 0.99), rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn apply(&mut self, entry: TimingEntry) -> TimingEntry {
        if entry.domain != Domain::Apu || self.spread == 0.0 {
            return entry;
        }
        let factor = self.rng.random_range(1.0 - self.spread..=1.0 + self.spread);
        TimingEntry { exec_time_us: entry.exec_time_us * factor, ..entry }
    }
}

/// Outcome of timing the software FFT on this host.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveMeasurement {
    pub entry: TimingEntry,
    pub min_us: f64,
    pub max_us: f64,
    pub observations_us: Vec<f64>,
}

static MEASUREMENT_LOCK: Mutex<()> = Mutex::new(());

/// Times `runs` executions of the float FFT on fresh random input and
/// reports the arithmetic mean.
///
/// Measurements are serialized process-wide so concurrent callers do not
/// skew each other.
pub fn measure_exec_time(points: FftSize, runs: usize) -> Result<LiveMeasurement, TimingError> {
    measure_with_seed(points, runs, 0x5eed)
}

pub fn measure_with_seed(points: FftSize, runs: usize, seed: u64) -> Result<LiveMeasurement, TimingError> {
    if runs == 0 {
        return Err(TimingError::NoRuns);
    }
    let _guard = MEASUREMENT_LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let plan = FloatFftPlan::new(points);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut observations_us = Vec::with_capacity(runs);
    for _ in 0..runs {
        let input: Vec<ComplexSample> = (0..points.points())
            .map(|_| ComplexSample::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)))
            .collect();
        let start = Instant::now();
        let out = plan.forward(&input).map_err(|e| TimingError::Clock(e.to_string()))?;
        let elapsed = start.elapsed();
        std::hint::black_box(out);
        let us = elapsed.as_secs_f64() * 1e6;
        if !us.is_finite() {
            return Err(TimingError::Clock("non-finite elapsed time".into()));
        }
        observations_us.push(us);
    }
    let mean = observations_us.iter().sum::<f64>() / runs as f64;
    let min_us = observations_us.iter().copied().fold(f64::INFINITY, f64::min);
    let max_us = observations_us.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if mean <= 0.0 {
        return Err(TimingError::Clock("clock resolution too coarse to observe the transform".into()));
    }
    Ok(LiveMeasurement {
        // summation rounding can push the mean a hair past the extremes
        entry: TimingEntry {
            domain: Domain::Apu,
            points,
            exec_time_us: mean.clamp(min_us, max_us),
            provenance: Provenance::LiveMeasured,
        },
        min_us,
        max_us,
        observations_us,
    })
}
