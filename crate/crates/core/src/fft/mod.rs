//! The two FFT execution domains.
//!
//! The software path ([`FloatFftPlan`]) is a double-precision radix-2
//! transform standing in for the processor-side library. The accelerator
//! path ([`FixedFftPlan`]) emulates a scaled 16-bit fixed-point core: Q1.15
//! samples, a 1/2 scaling after every butterfly stage, integer-only
//! arithmetic. Both produce natural-order output.

mod fixed;
mod float;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fixed::{dequantize, fft_fixed, quantize, scale_fixed_output, FixedFftPlan, Quantized};
pub use float::{fft_float, ifft_float, FloatFftPlan};

/// Complex sample in the floating-point domain.
pub type ComplexSample = num_complex::Complex<f64>;

/// One LSB of the Q1.15 format.
pub const Q15_LSB: f64 = 1.0 / 32768.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FftError {
    #[error("FFT size must be a power of two >= 2, got {0}")]
    InvalidSize(usize),
    #[error("input length {actual} does not match FFT size {expected}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("sequence lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    Empty,
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
}

/// Number of points of a radix-2 transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct FftSize(usize);

impl FftSize {
    pub const P8: FftSize = FftSize(8);
    pub const P1024: FftSize = FftSize(1024);
    pub const P2048: FftSize = FftSize(2048);
    pub const P4096: FftSize = FftSize(4096);

    /// The sizes the reconfiguration rules can request.
    pub const CONTROLLER_SIZES: [FftSize; 4] = [Self::P8, Self::P1024, Self::P2048, Self::P4096];

    pub fn new(points: usize) -> Result<Self, FftError> {
        if points >= 2 && points.is_power_of_two() {
            Ok(FftSize(points))
        } else {
            Err(FftError::InvalidSize(points))
        }
    }

    pub fn points(self) -> usize {
        self.0
    }

    pub fn log2(self) -> u32 {
        self.0.trailing_zeros()
    }
}

impl TryFrom<usize> for FftSize {
    type Error = FftError;

    fn try_from(points: usize) -> Result<Self, Self::Error> {
        FftSize::new(points)
    }
}

impl From<FftSize> for usize {
    fn from(size: FftSize) -> usize {
        size.0
    }
}

impl fmt::Display for FftSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Complex sample with Q1.15 components.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FixedComplexSample {
    pub re: i16,
    pub im: i16,
}

impl FixedComplexSample {
    pub const ZERO: FixedComplexSample = FixedComplexSample { re: 0, im: 0 };

    pub const fn new(re: i16, im: i16) -> Self {
        FixedComplexSample { re, im }
    }

    pub fn to_complex(self) -> ComplexSample {
        ComplexSample::new(self.re as f64 * Q15_LSB, self.im as f64 * Q15_LSB)
    }
}

/// Mean squared error `(1/N) Σ |reference[i] - test[i]|²`.
///
/// The caller aligns scales first; the fixed-point output is `DFT/N` and
/// must go through [`scale_fixed_output`] before comparing to an
/// unnormalized float transform.
pub fn mse(reference: &[ComplexSample], test: &[ComplexSample]) -> Result<f64, FftError> {
    if reference.len() != test.len() {
        return Err(FftError::LengthMismatch { left: reference.len(), right: test.len() });
    }
    if reference.is_empty() {
        return Err(FftError::Empty);
    }
    let sum: f64 = reference.iter().zip(test).map(|(r, t)| (r - t).norm_sqr()).sum();
    Ok(sum / reference.len() as f64)
}

/// Largest per-element magnitude of `a - b`.
pub fn max_abs_deviation(a: &[ComplexSample], b: &[ComplexSample]) -> Result<f64, FftError> {
    if a.len() != b.len() {
        return Err(FftError::LengthMismatch { left: a.len(), right: b.len() });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max))
}

fn check_len(len: usize, size: FftSize) -> Result<(), FftError> {
    if len != size.points() {
        return Err(FftError::SizeMismatch { expected: size.points(), actual: len });
    }
    Ok(())
}

fn bit_reverse_table(size: FftSize) -> Vec<usize> {
    let bits = size.log2();
    (0..size.points())
        .map(|i| i.reverse_bits() >> (usize::BITS - bits))
        .collect()
}
