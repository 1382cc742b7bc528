//! FFT engines checked against a direct O(N²) DFT and against each other.

use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rmlayer_core::fft::{
    dequantize, fft_fixed, fft_float, ifft_float, max_abs_deviation, mse, quantize, scale_fixed_output,
    ComplexSample, FftSize, FloatFftPlan, Q15_LSB,
};

/// Direct summation, sign -1 forward, unnormalized; sign +1 divides by N.
fn direct_dft(x: &[ComplexSample], sign: f64) -> Vec<ComplexSample> {
    let n = x.len();
    let mut out: Vec<ComplexSample> = (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(j, &v)| {
                    // reduce k·j mod N first so the angle stays small
                    let phase = sign * 2.0 * PI * ((k * j) % n) as f64 / n as f64;
                    v * ComplexSample::new(phase.cos(), phase.sin())
                })
                .sum()
        })
        .collect();
    if sign > 0.0 {
        out.iter_mut().for_each(|v| *v /= n as f64);
    }
    out
}

fn random_signal(rng: &mut ChaCha8Rng, n: usize, amp: f64) -> Vec<ComplexSample> {
    (0..n).map(|_| ComplexSample::new(rng.random_range(-amp..amp), rng.random_range(-amp..amp))).collect()
}

fn energy(x: &[ComplexSample]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}

#[test]
fn rotating_phasor_lands_in_bin_one() {
    let x: Vec<_> = (0..8).map(|n| ComplexSample::from_polar(1.0, 2.0 * PI * n as f64 / 8.0)).collect();
    let y = fft_float(&x, FftSize::P8).unwrap();
    assert!((y[1] - ComplexSample::new(8.0, 0.0)).norm() < 1e-12);
    for (k, v) in y.iter().enumerate().filter(|(k, _)| *k != 1) {
        assert!(v.norm() < 1e-12, "bin {k}: {v}");
    }
}

#[test]
fn matches_direct_dft_for_small_sizes() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in [8, 16, 64] {
        let size = FftSize::new(n).unwrap();
        for _ in 0..100 {
            let x = random_signal(&mut rng, n, 1.0);
            let dev = max_abs_deviation(&fft_float(&x, size).unwrap(), &direct_dft(&x, -1.0)).unwrap();
            assert!(dev < 1e-10, "N={n}: {dev:e}");
        }
    }
}

#[test]
fn inverse_matches_direct_summation() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let x = random_signal(&mut rng, 8, 4.0);
        let dev = max_abs_deviation(&ifft_float(&x, FftSize::P8).unwrap(), &direct_dft(&x, 1.0)).unwrap();
        assert!(dev < 1e-12, "{dev:e}");
    }
}

#[test]
fn round_trip_and_parseval_for_controller_sizes() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for size in FftSize::CONTROLLER_SIZES {
        let plan = FloatFftPlan::new(size);
        for _ in 0..5 {
            let x = random_signal(&mut rng, size.points(), 1.0);
            let spectrum = plan.forward(&x).unwrap();
            let back = plan.inverse(&spectrum).unwrap();
            assert!(max_abs_deviation(&x, &back).unwrap() < 1e-9);
            let time = energy(&x);
            let freq = energy(&spectrum) / size.points() as f64;
            assert!((time - freq).abs() / time < 1e-9, "N={size}");
        }
    }
}

#[test]
fn linearity() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (alpha, beta) = (ComplexSample::new(0.7, -0.2), ComplexSample::new(-1.3, 0.4));
    for size in FftSize::CONTROLLER_SIZES {
        let x = random_signal(&mut rng, size.points(), 1.0);
        let y = random_signal(&mut rng, size.points(), 1.0);
        let mixed: Vec<_> = x.iter().zip(&y).map(|(a, b)| alpha * a + beta * b).collect();
        let lhs = fft_float(&mixed, size).unwrap();
        let fx = fft_float(&x, size).unwrap();
        let fy = fft_float(&y, size).unwrap();
        let rhs: Vec<_> = fx.iter().zip(&fy).map(|(a, b)| alpha * a + beta * b).collect();
        let scale = rhs.iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(max_abs_deviation(&lhs, &rhs).unwrap() / scale < 1e-9);
    }
}

#[test]
fn fixed_impulse_matches_float_reference() {
    let mut x = vec![ComplexSample::new(0.0, 0.0); 8];
    x[0] = ComplexSample::new(0.5, 0.0);
    let q = quantize(&x).unwrap();
    let fixed = fft_fixed(&q.samples, FftSize::P8).unwrap();
    let reference = fft_float(&dequantize(&q.samples), FftSize::P8).unwrap();
    let expected = quantize(&reference.iter().map(|v| v / 8.0).collect::<Vec<_>>()).unwrap();
    for (got, want) in fixed.iter().zip(&expected.samples) {
        assert_eq!(want.re, 2048);
        assert!((got.re as i32 - want.re as i32).abs() <= 1);
        assert!((got.im as i32 - want.im as i32).abs() <= 1);
    }
}

/// Worst-case error of the scaled Q1.15 pipeline, in units of the
/// unnormalized DFT: each of the log2 N stages adds at most one rounding of
/// the halved sum (½ LSB per component) plus the twiddle quantization
/// (½ LSB per component, times |b| ≤ 1), and halving keeps earlier errors
/// from growing. Input quantization adds ½ LSB per component per sample
/// before the transform. Scaling back by N multiplies everything by N.
fn worst_case_deviation(size: FftSize) -> f64 {
    let n = size.points() as f64;
    let per_stage = 2.0 * std::f64::consts::SQRT_2 * 0.5 * Q15_LSB;
    let input = std::f64::consts::SQRT_2 * 0.5 * Q15_LSB;
    n * (size.log2() as f64 * per_stage + input)
}

#[test]
fn fixed_point_deviation_within_worst_case_propagation_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for size in FftSize::CONTROLLER_SIZES {
        let bound = worst_case_deviation(size);
        for _ in 0..20 {
            let x = random_signal(&mut rng, size.points(), 0.5);
            let q = quantize(&x).unwrap();
            assert_eq!(q.saturated, 0);
            let scaled = scale_fixed_output(&fft_fixed(&q.samples, size).unwrap());
            let reference = fft_float(&x, size).unwrap();
            let dev = max_abs_deviation(&scaled, &reference).unwrap();
            assert!(dev <= bound, "N={size}: {dev:e} > {bound:e}");
            assert!(mse(&reference, &scaled).unwrap() > 0.0);
        }
    }
}

/// Records the empirical constant C in `max dev = C·√N·2^-15` and the
/// alternative normalization `max dev = K·N·2^-15`.
#[test]
fn fixed_point_error_calibration() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for size in FftSize::CONTROLLER_SIZES {
        let n = size.points() as f64;
        let mut worst: f64 = 0.0;
        let mut mse_sum = 0.0;
        let trials = 100;
        for _ in 0..trials {
            let x = random_signal(&mut rng, size.points(), 0.5);
            let q = quantize(&x).unwrap();
            let scaled = scale_fixed_output(&fft_fixed(&q.samples, size).unwrap());
            let reference = fft_float(&x, size).unwrap();
            worst = worst.max(max_abs_deviation(&scaled, &reference).unwrap());
            mse_sum += mse(&reference, &scaled).unwrap();
        }
        let c_sqrt = worst / (n.sqrt() * Q15_LSB);
        let k_lin = worst / (n * Q15_LSB);
        println!(
            "N={size:>4}  max dev {worst:.3e}  C(√N) = {c_sqrt:.2}  K(N) = {k_lin:.3}  mean mse {:.3e}",
            mse_sum / trials as f64
        );
        assert!(worst <= worst_case_deviation(size));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn float_path_oracle_equivalence(seed: u64, k in 3u32..7) {
        let n = 1usize << k;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_signal(&mut rng, n, 2.0);
        let dev = max_abs_deviation(&fft_float(&x, FftSize::new(n).unwrap()).unwrap(), &direct_dft(&x, -1.0)).unwrap();
        prop_assert!(dev < 1e-10);
    }

    #[test]
    fn fixed_path_is_deterministic(seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = quantize(&random_signal(&mut rng, 1024, 0.5)).unwrap();
        prop_assert_eq!(fft_fixed(&q.samples, FftSize::P1024).unwrap(), fft_fixed(&q.samples, FftSize::P1024).unwrap());
    }

    #[test]
    fn quantization_error_at_most_half_lsb(re in -1.0f64..(1.0 - Q15_LSB / 2.0), im in -1.0f64..(1.0 - Q15_LSB / 2.0)) {
        let x = [ComplexSample::new(re, im)];
        let q = quantize(&x).unwrap();
        prop_assert_eq!(q.saturated, 0);
        let back = dequantize(&q.samples)[0];
        prop_assert!((back.re - re).abs() <= Q15_LSB / 2.0);
        prop_assert!((back.im - im).abs() <= Q15_LSB / 2.0);
    }
}
