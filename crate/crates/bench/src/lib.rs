//! Shared fixtures for the benchmarks and the acceptance suite.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rmlayer_core::controller::synthetic_block;
use rmlayer_core::fft::{quantize, ComplexSample, FftSize, FixedComplexSample};

pub fn float_input(size: FftSize) -> Vec<ComplexSample> {
    synthetic_block(&mut ChaCha8Rng::seed_from_u64(size.points() as u64), size)
}

pub fn fixed_input(size: FftSize) -> Vec<FixedComplexSample> {
    quantize(&float_input(size)).expect("finite input").samples
}
