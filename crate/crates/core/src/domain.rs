//! Execution domains and deployable FFT configurations.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::fft::FftSize;

/// Where the FFT function runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    /// Processor cluster, floating-point software FFT.
    Apu,
    /// Programmable logic, fixed-point accelerated FFT.
    Pl,
}

impl Domain {
    pub fn other(self) -> Domain {
        match self {
            Domain::Apu => Domain::Pl,
            Domain::Pl => Domain::Apu,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Apu => "APU",
            Domain::Pl => "PL",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A (domain, points) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Configuration {
    pub domain: Domain,
    pub points: FftSize,
}

impl Configuration {
    pub const fn new(domain: Domain, points: FftSize) -> Self {
        Configuration { domain, points }
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.domain, self.points)
    }
}
