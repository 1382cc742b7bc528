//! Per-rail power model.
//!
//! Power is a steady-state lookup keyed by the deployed configuration. The
//! domain that is not hosting the FFT sits at its static draw: the PL block
//! stays configured but clock-gated, the APU idles.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Configuration, Domain};
use crate::fft::FftSize;
use crate::profile::{Profile, StaticPower};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rail {
    Ddr,
    Apu,
    Pl,
}

impl From<Domain> for Rail {
    fn from(d: Domain) -> Rail {
        match d {
            Domain::Apu => Rail::Apu,
            Domain::Pl => Rail::Pl,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowerError {
    #[error("no calibrated power for configuration {0}")]
    UncalibratedConfiguration(Configuration),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PowerBreakdown {
    pub ddr_mw: u32,
    pub apu_mw: u32,
    pub pl_mw: u32,
    pub total_mw: u32,
    /// Rails drawing their idle value.
    pub static_rails: BTreeSet<Rail>,
}

impl PowerBreakdown {
    pub fn rail(&self, rail: Rail) -> u32 {
        match rail {
            Rail::Ddr => self.ddr_mw,
            Rail::Apu => self.apu_mw,
            Rail::Pl => self.pl_mw,
        }
    }

    pub fn is_static(&self, rail: Rail) -> bool {
        self.static_rails.contains(&rail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct RowPower {
    ddr_mw: u32,
    active_mw: u32,
}

#[derive(Debug, Clone)]
pub struct PowerModel {
    statics: StaticPower,
    rows: BTreeMap<Configuration, RowPower>,
}

impl PowerModel {
    pub fn from_profile(profile: &Profile) -> Self {
        let rows = profile
            .power
            .rows
            .iter()
            .map(|r| {
                (Configuration::new(r.domain, r.points), RowPower { ddr_mw: r.ddr_mw, active_mw: r.active_mw })
            })
            .collect();
        PowerModel { statics: profile.power.static_mw, rows }
    }

    pub fn static_power(&self, domain: Domain) -> u32 {
        match domain {
            Domain::Apu => self.statics.apu,
            Domain::Pl => self.statics.pl,
        }
    }

    pub fn configurations(&self) -> impl Iterator<Item = Configuration> + '_ {
        self.rows.keys().copied()
    }

    pub fn power_breakdown(&self, domain: Domain, points: FftSize) -> Result<PowerBreakdown, PowerError> {
        let config = Configuration::new(domain, points);
        let row = self.rows.get(&config).ok_or(PowerError::UncalibratedConfiguration(config))?;
        let idle = domain.other();
        let idle_mw = self.static_power(idle);
        let (apu_mw, pl_mw) = match domain {
            Domain::Apu => (row.active_mw, idle_mw),
            Domain::Pl => (idle_mw, row.active_mw),
        };
        Ok(PowerBreakdown {
            ddr_mw: row.ddr_mw,
            apu_mw,
            pl_mw,
            total_mw: row.ddr_mw + apu_mw + pl_mw,
            static_rails: BTreeSet::from([Rail::from(idle)]),
        })
    }
}
