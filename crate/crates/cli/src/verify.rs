//! Self-check suite: FFT engines against an independent DFT, fixed-point
//! error bound, rule map, power additivity and budget arithmetic.

use std::f64::consts::{PI, SQRT_2};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use rmlayer_core::fft::{
    fft_fixed, max_abs_deviation, mse, quantize, scale_fixed_output, ComplexSample, FftSize, FloatFftPlan, Q15_LSB,
};
use rmlayer_core::latency::{derive_numerology, dma_transfer_latency, target_budget, BudgetReport};
use rmlayer_core::{decide, Domain, PowerModel, Profile, Rail, TimingModel};

const SEED: u64 = 0x5eed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    /// Rotates one twiddle factor of the float engine under test.
    CorruptTwiddle,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn failed(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for c in &self.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "{status}  {:<width$}  {}", c.name, c.detail);
        }
        let _ = writeln!(out, "{}/{} checks passed", self.checks.len() - self.failed(), self.checks.len());
        out
    }
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn signal(rng: &mut ChaCha8Rng, n: usize, amp: f64) -> Vec<ComplexSample> {
    (0..n).map(|_| ComplexSample::new(rng.random_range(-amp..amp), rng.random_range(-amp..amp))).collect()
}

fn direct_dft(x: &[ComplexSample]) -> Vec<ComplexSample> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(j, &v)| v * ComplexSample::from_polar(1.0, -2.0 * PI * ((k * j) % n) as f64 / n as f64))
                .sum()
        })
        .collect()
}

fn energy(x: &[ComplexSample]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}

fn fft_oracle(fault: Fault) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let limit = 1e-10;
    let mut worst: f64 = 0.0;
    for n in [8usize, 16, 64] {
        let mut plan = FloatFftPlan::new(FftSize::new(n).expect("power of two"));
        if fault == Fault::CorruptTwiddle {
            plan.corrupt_twiddle(1);
        }
        for _ in 0..20 {
            let x = signal(&mut rng, n, 1.0);
            let y = plan.forward(&x).expect("sized input");
            worst = worst.max(max_abs_deviation(&y, &direct_dft(&x)).expect("same length"));
        }
    }
    check("fft-oracle", worst <= limit, format!("max |float - direct DFT| {worst:.3e} (limit {limit:e}), N = 8, 16, 64"))
}

fn round_trip_and_parseval() -> [Check; 2] {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let limit = 1e-9;
    let (mut trip, mut parseval): (f64, f64) = (0.0, 0.0);
    for size in FftSize::CONTROLLER_SIZES {
        let plan = FloatFftPlan::new(size);
        for _ in 0..3 {
            let x = signal(&mut rng, size.points(), 1.0);
            let y = plan.forward(&x).expect("sized input");
            let back = plan.inverse(&y).expect("sized input");
            let scale = x.iter().map(|v| v.norm()).fold(0.0, f64::max);
            trip = trip.max(max_abs_deviation(&x, &back).expect("same length") / scale);
            let e = energy(&x);
            parseval = parseval.max((e - energy(&y) / size.points() as f64).abs() / e);
        }
    }
    [
        check("fft-round-trip", trip <= limit, format!("max relative error {trip:.3e} (limit {limit:e})")),
        check("parseval", parseval <= limit, format!("max relative energy error {parseval:.3e} (limit {limit:e})")),
    ]
}

/// Deterministic error-propagation bound for the scaled Q1.15 transform,
/// in unnormalized DFT units: per stage one rounding of the halved sum plus
/// the twiddle quantization, input quantization once, all times N.
fn fixed_bound(size: FftSize) -> f64 {
    let half_lsb = SQRT_2 * 0.5 * Q15_LSB;
    size.points() as f64 * (2.0 * size.log2() as f64 * half_lsb + half_lsb)
}

fn fixed_point() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    let size = FftSize::P1024;
    let bound = fixed_bound(size);
    let (mut worst, mut worst_mse, mut zero_mse): (f64, f64, bool) = (0.0, 0.0, false);
    for _ in 0..20 {
        let x = signal(&mut rng, size.points(), 0.5);
        let q = quantize(&x).expect("finite input");
        let scaled = scale_fixed_output(&fft_fixed(&q.samples, size).expect("sized input"));
        let reference = FloatFftPlan::new(size).forward(&x).expect("sized input");
        worst = worst.max(max_abs_deviation(&scaled, &reference).expect("same length"));
        let m = mse(&reference, &scaled).expect("same length");
        zero_mse |= m == 0.0;
        worst_mse = worst_mse.max(m);
    }
    let passed = worst <= bound && !zero_mse && worst_mse <= bound * bound;
    check(
        "fixed-point-bound",
        passed,
        format!("N = 1024: max |N·fixed - float| {worst:.3e} (bound {bound:.3e}), max mse {worst_mse:.3e}"),
    )
}

fn rule_map(profile: &Profile) -> Check {
    let timing = TimingModel::from_profile(profile);
    let power = PowerModel::from_profile(profile);
    let mut faces: Vec<u32> = (0..=64).collect();
    faces.push(u32::MAX);
    let configs: Vec<_> = faces.iter().map(|&f| decide(f)).collect();
    let monotone = configs.windows(2).all(|w| {
        w[0].points <= w[1].points && !(w[0].domain == Domain::Pl && w[1].domain == Domain::Apu)
    });
    let calibrated = configs.iter().all(|c| {
        timing.lookup_exec_time(c.domain, c.points).is_ok() && power.power_breakdown(c.domain, c.points).is_ok()
    });
    check(
        "rule-map",
        monotone && calibrated,
        format!("{} face counts: monotone {monotone}, every target calibrated {calibrated}", faces.len()),
    )
}

fn power_additivity(profile: &Profile) -> Check {
    let model = PowerModel::from_profile(profile);
    let mut rows = 0;
    let mut bad = Vec::new();
    for c in model.configurations() {
        rows += 1;
        let p = model.power_breakdown(c.domain, c.points).expect("listed configuration");
        let idle = c.domain.other();
        let ok = p.total_mw == p.ddr_mw + p.apu_mw + p.pl_mw
            && p.rail(Rail::from(idle)) == model.static_power(idle)
            && p.rail(Rail::from(c.domain)) > model.static_power(c.domain);
        if !ok {
            bad.push(c.to_string());
        }
    }
    let detail = if bad.is_empty() {
        format!("{rows} configurations: total = SDRAM + APU + PL, idle rail at static draw")
    } else {
        format!("violations at {}", bad.join(", "))
    };
    check("power-additivity", bad.is_empty() && rows > 0, detail)
}

fn budget_arithmetic(profile: &Profile) -> Check {
    let lat = &profile.latency;
    let report = derive_numerology(lat.scs_khz, lat.bandwidth_mhz).and_then(|n| target_budget(&n, lat));
    let report: BudgetReport = match report {
        Ok(r) => r,
        Err(e) => return check("budget-arithmetic", false, e.to_string()),
    };
    let sum: u64 = report.steps.iter().map(|s| s.latency_ns).sum();
    let exact = sum == report.total_ns && report.margin_ns + report.total_ns as i64 == report.deadline_ns as i64;
    let consistent = report.feasible == (report.margin_ns >= 0)
        && report.ideal_feasible == (report.total_ns <= report.ideal_threshold_ns);
    // pushing any single step past the deadline must make it infeasible
    let monotone = (0..report.steps.len()).all(|i| {
        let mut steps = report.steps.clone();
        steps[i].latency_ns += report.deadline_ns;
        BudgetReport::assemble(report.mode, steps, report.deadline_us(), report.ideal_threshold_us())
            .is_ok_and(|r| !r.feasible)
    });
    let transfer = dma_transfer_latency(lat.transfer_bytes, lat.throughput_bytes_per_s);
    let transfer_ok = transfer.as_ref().is_ok_and(|t| {
        let expected = lat.transfer_bytes as f64 * 1e6 / lat.throughput_bytes_per_s;
        *t == expected
    });
    check(
        "budget-arithmetic",
        exact && consistent && monotone && transfer_ok,
        format!(
            "total {} ns, margin {} ns, exact {exact}, flags consistent {consistent}, monotone {monotone}, transfer {}",
            report.total_ns,
            report.margin_ns,
            transfer.map(|t| format!("{t} µs")).unwrap_or_else(|e| e.to_string())
        ),
    )
}

pub fn cmd_verify(profile: &Profile, fault: Fault) -> VerifyReport {
    let mut checks = vec![fft_oracle(fault)];
    checks.extend(round_trip_and_parseval());
    checks.push(fixed_point());
    checks.push(rule_map(profile));
    checks.push(power_additivity(profile));
    checks.push(budget_arithmetic(profile));
    VerifyReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_build_passes_everything() {
        let r = cmd_verify(&Profile::embedded(), Fault::None);
        assert_eq!(r.failed(), 0, "{}", r.render_text());
        assert_eq!(r.checks.len(), 7);
    }

    #[test]
    fn corrupted_twiddle_fails_only_the_oracle() {
        let r = cmd_verify(&Profile::embedded(), Fault::CorruptTwiddle);
        let failed: Vec<_> = r.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
        assert_eq!(failed, ["fft-oracle"]);
    }

    #[test]
    fn power_violation_is_reported() {
        let mut p = Profile::embedded();
        p.power.static_mw.pl = 5000;
        assert!(!power_additivity(&p).passed);
    }
}
