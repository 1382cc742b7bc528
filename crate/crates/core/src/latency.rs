//! iFFT offload latency budget for the 5G NR low-PHY.
//!
//! Numerology derivation, DMA transfer arithmetic and the itemized
//! PL → APU → PL budget checked against the OFDM symbol deadline.
//! Budget arithmetic runs on integer nanoseconds so the step sum and the
//! margin are exact.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fft::FftSize;
use crate::profile::LatencyProfile;

/// Normal cyclic prefix.
pub const SYMBOLS_PER_SLOT: u32 = 14;

/// Bytes per complex single-precision sample.
pub const BYTES_PER_COMPLEX_F32: u64 = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BudgetError {
    #[error("unsupported subcarrier spacing {0} kHz (expected 15, 30, 60 or 120)")]
    UnsupportedScs(u32),
    #[error("no standard FFT size for {scs_khz} kHz SCS at {bandwidth_mhz} MHz")]
    NoStandardFftSize { scs_khz: u32, bandwidth_mhz: u32 },
    #[error("{0} must be positive and finite")]
    NonPositive(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableSource {
    /// The configuration the offload analysis was carried out for.
    Verified,
    /// Convenience entry from the 3GPP transmission bandwidth tables.
    StandardDerived,
}

/// Maximum transmission bandwidth in resource blocks per (SCS, channel
/// bandwidth), 3GPP TS 38.104 Table 5.3.2-1 (FR1) and TS 38.104 FR2 limits.
const RESOURCE_BLOCKS: &[(u32, u32, u32)] = &[
    (15, 5, 25),
    (15, 10, 52),
    (15, 15, 79),
    (15, 20, 106),
    (15, 25, 133),
    (15, 30, 160),
    (15, 40, 216),
    (15, 50, 270),
    (30, 5, 11),
    (30, 10, 24),
    (30, 15, 38),
    (30, 20, 51),
    (30, 25, 65),
    (30, 30, 78),
    (30, 40, 106),
    (30, 50, 133),
    (30, 60, 162),
    (30, 70, 189),
    (30, 80, 217),
    (30, 90, 245),
    (30, 100, 273),
    (60, 10, 11),
    (60, 15, 18),
    (60, 20, 24),
    (60, 25, 31),
    (60, 30, 38),
    (60, 40, 51),
    (60, 50, 65),
    (60, 60, 79),
    (60, 70, 93),
    (60, 80, 107),
    (60, 90, 121),
    (60, 100, 135),
    (120, 50, 32),
    (120, 100, 66),
    (120, 200, 132),
    (120, 400, 264),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumerologyConfig {
    pub scs_khz: u32,
    pub bandwidth_mhz: u32,
    pub resource_blocks: u32,
    pub fft_points: FftSize,
    pub slot_us: f64,
    pub symbols_per_slot: u32,
    /// Average symbol duration including CP, rounded to 0.1 µs.
    pub symbol_us: f64,
    /// `slot_us / symbols_per_slot` unrounded.
    pub symbol_exact_us: f64,
    pub source: TableSource,
}

pub fn derive_numerology(scs_khz: u32, bandwidth_mhz: u32) -> Result<NumerologyConfig, BudgetError> {
    if ![15, 30, 60, 120].contains(&scs_khz) {
        return Err(BudgetError::UnsupportedScs(scs_khz));
    }
    let &(_, _, resource_blocks) = RESOURCE_BLOCKS
        .iter()
        .find(|&&(s, b, _)| s == scs_khz && b == bandwidth_mhz)
        .ok_or(BudgetError::NoStandardFftSize { scs_khz, bandwidth_mhz })?;
    let subcarriers = 12 * resource_blocks as usize;
    let fft_points = FftSize::new(subcarriers.next_power_of_two()).expect("power of two");
    let slot_us = 1000.0 / (scs_khz as f64 / 15.0);
    let symbol_exact_us = slot_us / SYMBOLS_PER_SLOT as f64;
    let source = if (scs_khz, bandwidth_mhz) == (30, 20) {
        TableSource::Verified
    } else {
        TableSource::StandardDerived
    };
    Ok(NumerologyConfig {
        scs_khz,
        bandwidth_mhz,
        resource_blocks,
        fft_points,
        slot_us,
        symbols_per_slot: SYMBOLS_PER_SLOT,
        symbol_us: (symbol_exact_us * 10.0).round() / 10.0,
        symbol_exact_us,
        source,
    })
}

/// Time to move `bytes` at `throughput_bytes_per_s`, in microseconds.
pub fn dma_transfer_latency(bytes: u64, throughput_bytes_per_s: f64) -> Result<f64, BudgetError> {
    if bytes == 0 {
        return Err(BudgetError::NonPositive("transfer size"));
    }
    if !(throughput_bytes_per_s.is_finite() && throughput_bytes_per_s > 0.0) {
        return Err(BudgetError::NonPositive("throughput"));
    }
    Ok(bytes as f64 * 1e6 / throughput_bytes_per_s)
}

/// Bytes for `points` complex single-precision samples.
pub fn complex_f32_bytes(points: FftSize) -> u64 {
    points.points() as u64 * BYTES_PER_COMPLEX_F32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    Transfer,
    Compute,
    Signaling,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetStep {
    pub name: String,
    pub kind: StepKind,
    pub latency_ns: u64,
}

impl BudgetStep {
    pub fn latency_us(&self) -> f64 {
        ns_to_us(self.latency_ns)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BudgetMode {
    /// Steps are upper-bound targets.
    Target,
    /// Steps are computed from transfer size, throughput and supplied times.
    Computed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub mode: BudgetMode,
    pub steps: Vec<BudgetStep>,
    pub total_ns: u64,
    pub deadline_ns: u64,
    pub ideal_threshold_ns: u64,
    pub margin_ns: i64,
    pub feasible: bool,
    pub ideal_feasible: bool,
}

fn us_to_ns(us: f64) -> u64 {
    (us * 1000.0).round() as u64
}

fn ns_to_us(ns: u64) -> f64 {
    ns as f64 / 1000.0
}

fn positive(value: f64, what: &'static str) -> Result<f64, BudgetError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(BudgetError::NonPositive(what))
    }
}

impl BudgetReport {
    pub fn assemble(
        mode: BudgetMode,
        steps: Vec<BudgetStep>,
        deadline_us: f64,
        ideal_threshold_us: f64,
    ) -> Result<Self, BudgetError> {
        let deadline_ns = us_to_ns(positive(deadline_us, "deadline")?);
        let ideal_threshold_ns = us_to_ns(positive(ideal_threshold_us, "ideal threshold")?);
        if steps.iter().any(|s| s.latency_ns == 0) {
            return Err(BudgetError::NonPositive("step latency"));
        }
        let total_ns: u64 = steps.iter().map(|s| s.latency_ns).sum();
        Ok(BudgetReport {
            mode,
            steps,
            total_ns,
            deadline_ns,
            ideal_threshold_ns,
            margin_ns: deadline_ns as i64 - total_ns as i64,
            feasible: total_ns <= deadline_ns,
            ideal_feasible: total_ns <= ideal_threshold_ns,
        })
    }

    pub fn total_us(&self) -> f64 {
        ns_to_us(self.total_ns)
    }

    pub fn deadline_us(&self) -> f64 {
        ns_to_us(self.deadline_ns)
    }

    pub fn ideal_threshold_us(&self) -> f64 {
        ns_to_us(self.ideal_threshold_ns)
    }

    pub fn margin_us(&self) -> f64 {
        self.margin_ns as f64 / 1000.0
    }

    /// Aligned text table.
    pub fn render_text(&self) -> String {
        let bound = if self.mode == BudgetMode::Target { "≤ " } else { "" };
        let width = self.steps.iter().map(|s| s.name.chars().count()).max().unwrap_or(0).max(18);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  Latency (µs)", "Step");
        for s in &self.steps {
            let _ = writeln!(out, "{:<width$}  {bound}{}", s.name, fmt_us(s.latency_us()));
        }
        let _ = writeln!(out, "{:<width$}  {bound}{}", "Total iFFT Offload", fmt_us(self.total_us()));
        let _ = writeln!(
            out,
            "deadline {} µs, margin {} µs, feasible: {}, within ideal {} µs: {}",
            fmt_us(self.deadline_us()),
            fmt_us(self.margin_us()),
            yes_no(self.feasible),
            fmt_us(self.ideal_threshold_us()),
            yes_no(self.ideal_feasible),
        );
        out
    }

    /// Machine-readable JSON with microsecond values.
    pub fn render_json(&self) -> String {
        #[derive(Serialize)]
        struct Step<'a> {
            name: &'a str,
            kind: StepKind,
            latency_us: f64,
        }
        #[derive(Serialize)]
        struct View<'a> {
            mode: BudgetMode,
            steps: Vec<Step<'a>>,
            total_us: f64,
            deadline_us: f64,
            margin_us: f64,
            ideal_threshold_us: f64,
            feasible: bool,
            ideal_feasible: bool,
        }
        let view = View {
            mode: self.mode,
            steps: self
                .steps
                .iter()
                .map(|s| Step { name: &s.name, kind: s.kind, latency_us: s.latency_us() })
                .collect(),
            total_us: self.total_us(),
            deadline_us: self.deadline_us(),
            margin_us: self.margin_us(),
            ideal_threshold_us: self.ideal_threshold_us(),
            feasible: self.feasible,
            ideal_feasible: self.ideal_feasible,
        };
        serde_json::to_string_pretty(&view).expect("budget serializes")
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

/// Shortest decimal rendering of a microsecond value at nanosecond resolution.
pub fn fmt_us(us: f64) -> String {
    let s = format!("{:.3}", us);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

const STEP_IN: &str = "PL -> OCM (Freq Symbols)";
const STEP_COMPUTE: &str = "APU iFFT (FFTW)";
const STEP_OUT: &str = "OCM -> PL (Time Samples)";
const STEP_IRQ: &str = "Interrupts";

fn steps(in_ns: u64, compute_ns: u64, out_ns: u64, irq_ns: u64) -> Vec<BudgetStep> {
    vec![
        BudgetStep { name: STEP_IN.into(), kind: StepKind::Transfer, latency_ns: in_ns },
        BudgetStep { name: STEP_COMPUTE.into(), kind: StepKind::Compute, latency_ns: compute_ns },
        BudgetStep { name: STEP_OUT.into(), kind: StepKind::Transfer, latency_ns: out_ns },
        BudgetStep { name: STEP_IRQ.into(), kind: StepKind::Signaling, latency_ns: irq_ns },
    ]
}

/// Budget built from the profile's per-step latency targets.
pub fn target_budget(numerology: &NumerologyConfig, targets: &LatencyProfile) -> Result<BudgetReport, BudgetError> {
    let steps = steps(
        us_to_ns(positive(targets.transfer_in_target_us, "transfer target")?),
        us_to_ns(positive(targets.compute_target_us, "compute target")?),
        us_to_ns(positive(targets.transfer_out_target_us, "transfer target")?),
        us_to_ns(positive(targets.interrupt_target_us, "interrupt target")?),
    );
    BudgetReport::assemble(BudgetMode::Target, steps, numerology.symbol_us, targets.ideal_threshold_us)
}

/// Budget with both transfers computed from `transfer_bytes` and
/// `throughput`, plus the supplied compute and interrupt latencies.
pub fn build_offload_budget(
    numerology: &NumerologyConfig,
    transfer_bytes: u64,
    throughput_bytes_per_s: f64,
    compute_us: f64,
    interrupt_us: f64,
    ideal_threshold_us: f64,
) -> Result<BudgetReport, BudgetError> {
    let transfer_ns = us_to_ns(dma_transfer_latency(transfer_bytes, throughput_bytes_per_s)?);
    let steps = steps(
        transfer_ns,
        us_to_ns(positive(compute_us, "compute latency")?),
        transfer_ns,
        us_to_ns(positive(interrupt_us, "interrupt latency")?),
    );
    BudgetReport::assemble(BudgetMode::Computed, steps, numerology.symbol_us, ideal_threshold_us)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::Profile;
    use proptest::prelude::*;

    fn nr_30_20() -> NumerologyConfig {
        derive_numerology(30, 20).unwrap()
    }

    #[test]
    fn numerology_30khz_20mhz() {
        let n = nr_30_20();
        assert_eq!(n.fft_points, FftSize::P1024);
        assert_eq!(n.slot_us, 500.0);
        assert_eq!(n.symbols_per_slot, 14);
        assert_eq!(n.symbol_us, 35.7);
        assert!((n.symbol_exact_us - 35.714_285_714).abs() < 1e-6);
        assert_eq!(n.source, TableSource::Verified);
    }

    #[test]
    fn numerology_15khz_has_1ms_slot() {
        let n = derive_numerology(15, 20).unwrap();
        assert_eq!(n.slot_us, 1000.0);
        assert_eq!(n.fft_points.points(), 2048);
        assert_eq!(n.source, TableSource::StandardDerived);
    }

    #[test]
    fn numerology_errors() {
        assert_eq!(derive_numerology(45, 20), Err(BudgetError::UnsupportedScs(45)));
        assert_eq!(
            derive_numerology(30, 7),
            Err(BudgetError::NoStandardFftSize { scs_khz: 30, bandwidth_mhz: 7 })
        );
    }

    #[test]
    fn symbol_times_slot_consistent_for_every_entry() {
        for &(scs, bw, _) in RESOURCE_BLOCKS {
            let n = derive_numerology(scs, bw).unwrap();
            assert_eq!(n.slot_us, 15_000.0 / scs as f64);
            assert!((n.symbol_exact_us * 14.0 - n.slot_us).abs() < 0.5);
            assert!(n.fft_points.points() >= 12 * n.resource_blocks as usize);
        }
    }

    #[test]
    fn dma_latency() {
        assert_eq!(dma_transfer_latency(8192, 1.6e9).unwrap(), 5.12);
        assert_eq!(dma_transfer_latency(4096, 1.6e9).unwrap(), 2.56);
        assert_eq!(complex_f32_bytes(FftSize::P1024), 8192);
        assert!(dma_transfer_latency(0, 1.6e9).is_err());
        assert!(dma_transfer_latency(8, 0.0).is_err());
        assert!(dma_transfer_latency(8, -1.0).is_err());
    }

    #[test]
    fn target_budget_reproduces_defaults() {
        let profile = Profile::embedded();
        let r = target_budget(&nr_30_20(), &profile.latency).unwrap();
        let steps: Vec<f64> = r.steps.iter().map(|s| s.latency_us()).collect();
        assert_eq!(steps, vec![5.0, 10.0, 5.0, 1.0]);
        assert_eq!(r.total_us(), 21.0);
        assert_eq!(r.margin_ns, 14_700);
        assert!(r.feasible);
        assert!(!r.ideal_feasible);
    }

    #[test]
    fn slow_compute_misses_deadline() {
        let r = build_offload_budget(&nr_30_20(), 8192, 1.6e9, 40.0, 1.0, 20.0).unwrap();
        assert!(r.total_us() > 35.7);
        assert!(!r.feasible);
        assert!(r.margin_ns < 0);
    }

    #[test]
    fn computed_transfers() {
        let r = build_offload_budget(&nr_30_20(), 8192, 1.6e9, 10.0, 1.0, 20.0).unwrap();
        assert_eq!(r.steps[0].latency_ns, 5120);
        assert_eq!(r.total_ns, 21_240);
        assert_eq!(r.margin_ns, 14_460);
    }

    #[test]
    fn rejects_non_positive_inputs() {
        let n = nr_30_20();
        assert!(build_offload_budget(&n, 8192, 1.6e9, 0.0, 1.0, 20.0).is_err());
        assert!(build_offload_budget(&n, 8192, 1.6e9, 10.0, -1.0, 20.0).is_err());
        assert!(build_offload_budget(&n, 0, 1.6e9, 10.0, 1.0, 20.0).is_err());
    }

    #[test]
    fn renders() {
        let r = target_budget(&nr_30_20(), &Profile::embedded().latency).unwrap();
        let text = r.render_text();
        assert!(text.contains("≤ 21"));
        assert!(text.contains("margin 14.7"));
        let json: serde_json::Value = serde_json::from_str(&r.render_json()).unwrap();
        assert_eq!(json["total_us"], 21.0);
        assert_eq!(json["feasible"], true);
    }

    #[test]
    fn fmt_us_trims() {
        assert_eq!(fmt_us(21.0), "21");
        assert_eq!(fmt_us(14.7), "14.7");
        assert_eq!(fmt_us(5.12), "5.12");
        assert_eq!(fmt_us(-0.0001), "0");
    }

    proptest! {
        #[test]
        fn dma_latency_linear_in_bytes(bytes in 1u64..1_000_000, k in 1u64..64, rate in 1e6f64..1e11) {
            let one = dma_transfer_latency(bytes, rate).unwrap();
            let many = dma_transfer_latency(bytes * k, rate).unwrap();
            prop_assert!((many - one * k as f64).abs() <= 1e-9 * many.max(1.0));
            let faster = dma_transfer_latency(bytes, rate * 2.0).unwrap();
            prop_assert!((faster * 2.0 - one).abs() <= 1e-9 * one.max(1.0));
        }

        #[test]
        fn margin_plus_total_is_deadline(
            a in 0.001f64..50.0, b in 0.001f64..50.0, c in 0.001f64..50.0, d in 0.001f64..50.0,
        ) {
            let profile = LatencyProfile {
                transfer_in_target_us: a,
                compute_target_us: b,
                transfer_out_target_us: c,
                interrupt_target_us: d,
                ..Profile::embedded().latency
            };
            let r = target_budget(&nr_30_20(), &profile).unwrap();
            prop_assert_eq!(r.total_ns, r.steps.iter().map(|s| s.latency_ns).sum::<u64>());
            prop_assert_eq!(r.margin_ns + r.total_ns as i64, r.deadline_ns as i64);
            prop_assert_eq!(r.feasible, r.total_ns <= r.deadline_ns);
        }

        #[test]
        fn feasibility_is_monotone(compute in 0.1f64..40.0, extra in 0.0f64..40.0) {
            let n = nr_30_20();
            let base = build_offload_budget(&n, 8192, 1.6e9, compute, 1.0, 20.0).unwrap();
            let slower = build_offload_budget(&n, 8192, 1.6e9, compute + extra, 1.0, 20.0).unwrap();
            prop_assert!(!( !base.feasible && slower.feasible));
        }
    }
}
