use std::f64::consts::PI;

use super::{bit_reverse_table, check_len, ComplexSample, FftError, FftSize, FixedComplexSample};

/// Result of converting float samples to Q1.15.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantized {
    pub samples: Vec<FixedComplexSample>,
    /// Number of components clamped to the representable range.
    pub saturated: usize,
}

fn quantize_component(x: f64, saturated: &mut usize) -> i16 {
    // f64::round is round-half-away-from-zero
    let scaled = (x * 32768.0).round();
    if scaled > i16::MAX as f64 {
        *saturated += 1;
        i16::MAX
    } else if scaled < i16::MIN as f64 {
        *saturated += 1;
        i16::MIN
    } else {
        scaled as i16
    }
}

/// Round-to-nearest Q1.15 conversion with saturation.
pub fn quantize(input: &[ComplexSample]) -> Result<Quantized, FftError> {
    let mut saturated = 0;
    let mut samples = Vec::with_capacity(input.len());
    for (i, x) in input.iter().enumerate() {
        if !x.re.is_finite() || !x.im.is_finite() {
            return Err(FftError::NonFinite(i));
        }
        let re = quantize_component(x.re, &mut saturated);
        let im = quantize_component(x.im, &mut saturated);
        samples.push(FixedComplexSample { re, im });
    }
    Ok(Quantized { samples, saturated })
}

pub fn dequantize(input: &[FixedComplexSample]) -> Vec<ComplexSample> {
    input.iter().map(|s| s.to_complex()).collect()
}

/// Undoes the 1/N of the scaled schedule so fixed output can be compared
/// with an unnormalized float DFT.
pub fn scale_fixed_output(output: &[FixedComplexSample]) -> Vec<ComplexSample> {
    let n = output.len() as f64;
    output.iter().map(|s| s.to_complex() * n).collect()
}

/// Scaled fixed-point radix-2 transform.
///
/// Every butterfly computes `(a ± b·w) / 2` in a 64-bit accumulator and
/// rounds back to Q1.15 (round half up), so after `log2 N` stages the output
/// is `DFT(x) / N`. Inputs of magnitude below one cannot overflow; anything
/// larger is saturated.
#[derive(Debug, Clone)]
pub struct FixedFftPlan {
    size: FftSize,
    twiddles: Vec<FixedComplexSample>,
    bit_reverse: Vec<usize>,
}

impl FixedFftPlan {
    pub fn new(size: FftSize) -> Self {
        let n = size.points();
        let mut ignored = 0;
        let twiddles = (0..n / 2)
            .map(|k| {
                let (sin, cos) = (-2.0 * PI * k as f64 / n as f64).sin_cos();
                FixedComplexSample {
                    re: quantize_component(cos, &mut ignored),
                    im: quantize_component(sin, &mut ignored),
                }
            })
            .collect();
        FixedFftPlan { size, twiddles, bit_reverse: bit_reverse_table(size) }
    }

    pub fn size(&self) -> FftSize {
        self.size
    }

    pub fn forward(&self, input: &[FixedComplexSample]) -> Result<Vec<FixedComplexSample>, FftError> {
        check_len(input.len(), self.size)?;
        let mut buf: Vec<FixedComplexSample> = self.bit_reverse.iter().map(|&i| input[i]).collect();
        let n = buf.len();
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for block in buf.chunks_exact_mut(len) {
                let (lo, hi) = block.split_at_mut(half);
                for (j, (a, b)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                    let (top, bottom) = butterfly(*a, *b, self.twiddles[j * stride]);
                    *a = top;
                    *b = bottom;
                }
            }
            len <<= 1;
        }
        Ok(buf)
    }
}

#[inline]
fn butterfly(
    a: FixedComplexSample,
    b: FixedComplexSample,
    w: FixedComplexSample,
) -> (FixedComplexSample, FixedComplexSample) {
    let (br, bi) = (b.re as i64, b.im as i64);
    let (wr, wi) = (w.re as i64, w.im as i64);
    // Q2.30
    let pr = br * wr - bi * wi;
    let pi = br * wi + bi * wr;
    let ar = (a.re as i64) << 15;
    let ai = (a.im as i64) << 15;
    let top = FixedComplexSample { re: halve_q30(ar + pr), im: halve_q30(ai + pi) };
    let bottom = FixedComplexSample { re: halve_q30(ar - pr), im: halve_q30(ai - pi) };
    (top, bottom)
}

/// Q30 value / 2, rounded to Q15 and saturated.
#[inline]
fn halve_q30(v: i64) -> i16 {
    let r = (v + (1 << 15)) >> 16;
    r.clamp(i16::MIN as i64, i16::MAX as i64) as i16
}

/// One-shot scaled fixed-point forward transform.
pub fn fft_fixed(
    input: &[FixedComplexSample],
    size: FftSize,
) -> Result<Vec<FixedComplexSample>, FftError> {
    FixedFftPlan::new(size).forward(input)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> ComplexSample {
        ComplexSample::new(re, im)
    }

    #[test]
    fn quantize_exact_values() {
        let q = quantize(&[c(0.5, -0.5), c(1.0 / 32768.0, 0.0)]).unwrap();
        assert_eq!(q.samples[0], FixedComplexSample::new(16384, -16384));
        assert_eq!(q.samples[1], FixedComplexSample::new(1, 0));
        assert_eq!(q.saturated, 0);
    }

    #[test]
    fn quantize_saturates_at_one() {
        let q = quantize(&[c(1.0, 0.0)]).unwrap();
        assert_eq!(q.samples[0].re, 32767);
        assert_eq!(q.saturated, 1);
        let q = quantize(&[c(-1.0, -3.0)]).unwrap();
        assert_eq!(q.samples[0], FixedComplexSample::new(-32768, -32768));
        assert_eq!(q.saturated, 1);
    }

    #[test]
    fn quantize_ties_away_from_zero() {
        let half_lsb = 0.5 / 32768.0;
        let q = quantize(&[c(half_lsb, -half_lsb)]).unwrap();
        assert_eq!(q.samples[0], FixedComplexSample::new(1, -1));
    }

    #[test]
    fn quantize_rejects_nan() {
        assert_eq!(quantize(&[c(0.0, 0.0), c(f64::NAN, 0.0)]), Err(FftError::NonFinite(1)));
    }

    #[test]
    fn impulse_of_half_spreads_to_every_bin() {
        // DFT of 0.5·δ is 0.5 everywhere; the scaled core yields 0.5/8.
        let mut x = vec![FixedComplexSample::ZERO; 8];
        x[0] = FixedComplexSample::new(16384, 0);
        let y = fft_fixed(&x, FftSize::P8).unwrap();
        for bin in y {
            assert!((bin.re as i32 - 2048).abs() <= 1, "{bin:?}");
            assert!(bin.im.abs() <= 1);
        }
    }

    #[test]
    fn zero_in_zero_out() {
        for size in FftSize::CONTROLLER_SIZES {
            let x = vec![FixedComplexSample::ZERO; size.points()];
            assert!(fft_fixed(&x, size).unwrap().iter().all(|s| *s == FixedComplexSample::ZERO));
        }
    }

    #[test]
    fn rejects_wrong_length() {
        let x = vec![FixedComplexSample::ZERO; 9];
        assert_eq!(
            fft_fixed(&x, FftSize::P8),
            Err(FftError::SizeMismatch { expected: 8, actual: 9 })
        );
    }

    #[test]
    fn full_scale_input_saturates_instead_of_wrapping() {
        let x = vec![FixedComplexSample::new(i16::MAX, i16::MAX); 8];
        let y = fft_fixed(&x, FftSize::P8).unwrap();
        assert!(y[0].re > 30000 && y[0].im > 30000);
    }

    #[test]
    fn halve_rounds_half_up() {
        assert_eq!(halve_q30(3 << 15), 2);
        assert_eq!(halve_q30(-(1 << 15)), 0);
        assert_eq!(halve_q30(i64::from(i16::MAX) << 17), i16::MAX);
    }
}
