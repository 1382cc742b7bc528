//! Calibration profiles.
//!
//! A profile collects every hardware-derived constant the models use:
//! execution times, per-rail power, latency-budget targets and the partial
//! reconfiguration overhead. The embedded default reproduces the ZCU111
//! measurements; alternative hardware can be described in the same TOML
//! schema and loaded with [`Profile::from_path`].

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fft::FftSize;
use crate::domain::Domain;
use crate::timing::Provenance;

const DEFAULT_PROFILE: &str = include_str!("../profiles/zcu111.toml");

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("failed to read profile {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("failed to parse profile: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid profile: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub name: String,
    pub version: u32,
    pub timing: Vec<TimingRow>,
    pub power: PowerProfile,
    pub latency: LatencyProfile,
    pub reconfiguration: ReconfigurationProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub points: FftSize,
    pub apu_us: f64,
    pub apu_provenance: Provenance,
    pub pl_us: f64,
    pub pl_provenance: Provenance,
    /// Acceleration factor as printed by the source of the calibration,
    /// kept to flag rows where it disagrees with the computed ratio.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reported_acceleration: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerProfile {
    pub static_mw: StaticPower,
    pub rows: Vec<PowerRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaticPower {
    pub apu: u32,
    pub pl: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PowerRow {
    pub domain: Domain,
    pub points: FftSize,
    pub ddr_mw: u32,
    /// Draw of the rail hosting the FFT.
    pub active_mw: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reported_total_mw: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyProfile {
    pub scs_khz: u32,
    pub bandwidth_mhz: u32,
    pub ideal_threshold_us: f64,
    pub transfer_in_target_us: f64,
    pub compute_target_us: f64,
    pub transfer_out_target_us: f64,
    pub interrupt_target_us: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reported_total_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reported_margin_us: Option<f64>,
    pub transfer_bytes: u64,
    pub throughput_bytes_per_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconfigurationProfile {
    pub partial_bitstream_us: u64,
}

impl Profile {
    /// The embedded ZCU111 profile.
    pub fn embedded() -> Self {
        Self::from_toml_str(DEFAULT_PROFILE).expect("embedded profile is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ProfileError> {
        let profile: Profile = toml::from_str(text)?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ProfileError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ProfileError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        let invalid = |msg: String| Err(ProfileError::Invalid(msg));
        let mut seen = std::collections::BTreeSet::new();
        for row in &self.timing {
            if !seen.insert(row.points) {
                return invalid(format!("duplicate timing row for {} points", row.points));
            }
            if !(row.apu_us > 0.0 && row.pl_us > 0.0) || !row.apu_us.is_finite() || !row.pl_us.is_finite() {
                return invalid(format!("timing row {} must have positive times", row.points));
            }
            if matches!(row.apu_provenance, Provenance::LiveMeasured | Provenance::Interpolated)
                || matches!(row.pl_provenance, Provenance::LiveMeasured | Provenance::Interpolated)
            {
                return invalid(format!("timing row {} has a non-table provenance", row.points));
            }
        }
        if self.power.static_mw.apu == 0 || self.power.static_mw.pl == 0 {
            return invalid("static power must be positive".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for row in &self.power.rows {
            if !seen.insert((row.domain, row.points)) {
                return invalid(format!("duplicate power row ({:?}, {})", row.domain, row.points));
            }
            if row.ddr_mw == 0 || row.active_mw == 0 {
                return invalid(format!("power row ({:?}, {}) must be positive", row.domain, row.points));
            }
            if let Some(reported) = row.reported_total_mw {
                let idle = match row.domain {
                    Domain::Apu => self.power.static_mw.pl,
                    Domain::Pl => self.power.static_mw.apu,
                };
                let sum = row.ddr_mw + row.active_mw + idle;
                if sum != reported {
                    return invalid(format!(
                        "power row ({:?}, {}) rails sum to {sum} mW but total is {reported} mW",
                        row.domain, row.points
                    ));
                }
            }
        }
        let l = &self.latency;
        let positive = [
            l.ideal_threshold_us,
            l.transfer_in_target_us,
            l.compute_target_us,
            l.transfer_out_target_us,
            l.interrupt_target_us,
            l.throughput_bytes_per_s,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) || l.transfer_bytes == 0 {
            return invalid("latency constants must be positive".into());
        }
        Ok(())
    }
}

impl Default for Profile {
    fn default() -> Self {
        Self::embedded()
    }
}
