use std::f64::consts::PI;

use super::{bit_reverse_table, check_len, ComplexSample, FftError, FftSize};

/// Double-precision iterative radix-2 decimation-in-time transform.
///
/// Twiddles and the bit-reversal permutation are computed once at plan
/// creation; execution never mutates the plan.
#[derive(Debug, Clone)]
pub struct FloatFftPlan {
    size: FftSize,
    // e^(-2πi·k/N) for k in 0..N/2
    twiddles: Vec<ComplexSample>,
    bit_reverse: Vec<usize>,
}

impl FloatFftPlan {
    pub fn new(size: FftSize) -> Self {
        let n = size.points();
        let twiddles = (0..n / 2)
            .map(|k| {
                let (sin, cos) = (-2.0 * PI * k as f64 / n as f64).sin_cos();
                ComplexSample::new(cos, sin)
            })
            .collect();
        FloatFftPlan { size, twiddles, bit_reverse: bit_reverse_table(size) }
    }

    pub fn size(&self) -> FftSize {
        self.size
    }

    /// Unnormalized forward DFT, natural order.
    pub fn forward(&self, input: &[ComplexSample]) -> Result<Vec<ComplexSample>, FftError> {
        check_len(input.len(), self.size)?;
        let mut buf: Vec<ComplexSample> = self.bit_reverse.iter().map(|&i| input[i]).collect();
        self.butterflies(&mut buf, false);
        Ok(buf)
    }

    /// Inverse DFT including the 1/N normalization.
    pub fn inverse(&self, input: &[ComplexSample]) -> Result<Vec<ComplexSample>, FftError> {
        check_len(input.len(), self.size)?;
        let mut buf: Vec<ComplexSample> = self.bit_reverse.iter().map(|&i| input[i]).collect();
        self.butterflies(&mut buf, true);
        let scale = 1.0 / self.size.points() as f64;
        buf.iter_mut().for_each(|x| *x *= scale);
        Ok(buf)
    }

    fn butterflies(&self, buf: &mut [ComplexSample], inverse: bool) {
        let n = buf.len();
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for block in buf.chunks_exact_mut(len) {
                let (lo, hi) = block.split_at_mut(half);
                for (j, (a, b)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                    let w = self.twiddles[j * stride];
                    let w = if inverse { w.conj() } else { w };
                    let t = *b * w;
                    *b = *a - t;
                    *a += t;
                }
            }
            len <<= 1;
        }
    }

    /// Overwrites one twiddle factor. Exists only so verification can
    /// demonstrate that a corrupted plan is caught by the oracle check.
    #[doc(hidden)]
    pub fn corrupt_twiddle(&mut self, index: usize) {
        let idx = index % self.twiddles.len();
        self.twiddles[idx] *= ComplexSample::new(0.0, 1.0);
    }
}

/// One-shot forward transform; builds a plan and runs it.
pub fn fft_float(input: &[ComplexSample], size: FftSize) -> Result<Vec<ComplexSample>, FftError> {
    FloatFftPlan::new(size).forward(input)
}

/// One-shot inverse transform with 1/N normalization.
pub fn ifft_float(input: &[ComplexSample], size: FftSize) -> Result<Vec<ComplexSample>, FftError> {
    FloatFftPlan::new(size).inverse(input)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> ComplexSample {
        ComplexSample::new(re, im)
    }

    #[test]
    fn impulse_transforms_to_all_ones() {
        let mut x = vec![c(0.0, 0.0); 8];
        x[0] = c(1.0, 0.0);
        let y = fft_float(&x, FftSize::P8).unwrap();
        assert!(y.iter().all(|v| *v == c(1.0, 0.0)));
    }

    #[test]
    fn constant_concentrates_at_dc() {
        let x = vec![c(1.0, 0.0); 8];
        let y = fft_float(&x, FftSize::P8).unwrap();
        assert!((y[0] - c(8.0, 0.0)).norm() < 1e-12);
        assert!(y[1..].iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn inverse_of_dc_is_constant() {
        let mut x = vec![c(0.0, 0.0); 8];
        x[0] = c(8.0, 0.0);
        let y = ifft_float(&x, FftSize::P8).unwrap();
        assert!(y.iter().all(|v| (v - c(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn rejects_wrong_length() {
        let x = vec![c(0.0, 0.0); 7];
        assert_eq!(
            fft_float(&x, FftSize::P8),
            Err(FftError::SizeMismatch { expected: 8, actual: 7 })
        );
        assert!(ifft_float(&x, FftSize::P8).is_err());
    }

    #[test]
    fn corrupted_twiddle_changes_output() {
        let size = FftSize::new(16).unwrap();
        let x: Vec<_> = (0..16).map(|i| c(i as f64 * 0.1, 0.05)).collect();
        let good = FloatFftPlan::new(size).forward(&x).unwrap();
        let mut plan = FloatFftPlan::new(size);
        plan.corrupt_twiddle(3);
        let bad = plan.forward(&x).unwrap();
        assert!(super::super::max_abs_deviation(&good, &bad).unwrap() > 1e-3);
    }
}
