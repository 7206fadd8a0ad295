//! Kolmogorov–Arnold style injective aggregation through the Cantor set.
//!
//! Every input `x` in `[0, 1]` is truncated to `m` binary digits
//! `b_1 .. b_m` (with `x = 1` taken as all ones). The scalar map
//!
//! ```text
//! phi(x) = sum_j 2 * b_j * 3^-j
//! ```
//!
//! only produces ternary digits 0 and 2, so its image lies in the Cantor set
//! and it is monotone. For an ordered list of `d` inputs the aggregate
//! interleaves their digit strings: ternary digit `d * (j - 1) + p` of the
//! output is `2 * b_{p,j}`. Because a Cantor codeword has a unique ternary
//! expansion the aggregate is injective on the quantized grid, and decoding
//! just reads the digits back.
//!
//! A code holds `d * m` ternary digits, which quickly exceeds what an `f64`
//! can carry (about 33 ternary digits). [`KaCode`] therefore stores the digit
//! string exactly; [`KaCode::to_f64`] is the lossy real value used as a
//! feature column.

use crate::error::{FafError, Result};

/// Leading ternary digits that influence an `f64` value.
const F64_TERNARY_DIGITS: usize = 40;
/// Ternary window readable back from an `f64` (3^30 < 2^53 with headroom).
const F64_DECODE_DIGITS: usize = 30;

pub const DEFAULT_PRECISION: u32 = 20;
pub const MAX_PRECISION: u32 = 52;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KaEncoder {
    precision: u32,
}

impl Default for KaEncoder {
    fn default() -> Self {
        Self {
            precision: DEFAULT_PRECISION,
        }
    }
}

/// Exact ternary digit string produced by [`KaEncoder::aggregate`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KaCode {
    digits: Vec<u8>,
}

impl KaCode {
    /// Wraps raw ternary digits (most significant first). Digits must be
    /// 0, 1 or 2; validity as a Cantor codeword is checked when decoding.
    pub fn from_ternary_digits(digits: Vec<u8>) -> Result<Self> {
        if let Some(position) = digits.iter().position(|&t| t > 2) {
            return Err(FafError::InvalidData(format!(
                "ternary digit {} at position {}",
                digits[position],
                position + 1
            )));
        }
        Ok(Self { digits })
    }

    pub fn digits(&self) -> &[u8] {
        &self.digits
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    pub fn to_f64(&self) -> f64 {
        ternary_value(self.digits.iter().copied().take(F64_TERNARY_DIGITS))
    }
}

/// Horner evaluation of `0.t_1 t_2 ...` in base 3.
fn ternary_value(digits: impl DoubleEndedIterator<Item = u8>) -> f64 {
    digits.rev().fold(0.0, |acc, t| (acc + t as f64) / 3.0)
}

impl KaEncoder {
    pub fn new(precision: u32) -> Result<Self> {
        if precision == 0 || precision > MAX_PRECISION {
            return Err(FafError::InvalidConfig(format!(
                "KA precision must be in 1..={MAX_PRECISION}, got {precision}"
            )));
        }
        Ok(Self { precision })
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    /// The first `m` binary digits of `x` as an integer in `[0, 2^m)`.
    fn quantize(&self, x: f64) -> Result<u64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(FafError::OutOfUnitInterval { value: x });
        }
        let scale = (1u64 << self.precision) as f64;
        if x == 1.0 {
            Ok((1u64 << self.precision) - 1)
        } else {
            // x * 2^m is exact, floor is the truncation
            Ok((x * scale).floor() as u64)
        }
    }

    #[inline]
    fn bit(&self, q: u64, j: u32) -> u8 {
        ((q >> (self.precision - j)) & 1) as u8
    }

    /// Scalar Cantor map `phi`.
    pub fn phi(&self, x: f64) -> Result<f64> {
        let q = self.quantize(x)?;
        Ok(ternary_value((1..=self.precision).map(|j| 2 * self.bit(q, j))))
    }

    fn quantize_all(&self, values: &[f64]) -> Result<Vec<u64>> {
        if values.is_empty() {
            return Err(FafError::Empty("KA aggregate needs at least one value".to_string()));
        }
        values.iter().map(|&x| self.quantize(x)).collect()
    }

    /// Digit-interleaved aggregate of an ordered list of values in `[0, 1]`.
    pub fn aggregate(&self, values: &[f64]) -> Result<KaCode> {
        let quantized = self.quantize_all(values)?;
        let digits = self.interleaved_digits(&quantized, usize::MAX).collect();
        Ok(KaCode { digits })
    }

    /// `aggregate(values).to_f64()` without materializing the full code.
    pub fn aggregate_f64(&self, values: &[f64]) -> Result<f64> {
        let quantized = self.quantize_all(values)?;
        let digits: Vec<u8> = self
            .interleaved_digits(&quantized, F64_TERNARY_DIGITS)
            .collect();
        Ok(ternary_value(digits.into_iter()))
    }

    fn interleaved_digits<'a>(
        &'a self,
        quantized: &'a [u64],
        limit: usize,
    ) -> impl Iterator<Item = u8> + 'a {
        let d = quantized.len();
        let total = (d * self.precision as usize).min(limit);
        (0..total).map(move |i| {
            let p = i % d;
            let j = (i / d) as u32 + 1;
            2 * self.bit(quantized[p], j)
        })
    }

    fn check_codeword(digits: &[u8]) -> Result<()> {
        match digits.iter().position(|&t| t == 1) {
            Some(i) => Err(FafError::InvalidCodeword { position: i + 1 }),
            None => Ok(()),
        }
    }

    /// Recovers the `d` quantized inputs from an exact code.
    pub fn decode(&self, code: &KaCode, d: usize) -> Result<Vec<f64>> {
        let expected = d * self.precision as usize;
        if d == 0 || code.len() != expected {
            return Err(FafError::DimensionMismatch {
                expected,
                found: code.len(),
            });
        }
        Self::check_codeword(&code.digits)?;
        Ok(self.deinterleave(&code.digits, d))
    }

    /// Decodes from a real value. Only the leading ternary digits survive in
    /// an `f64`, so each coordinate is recovered to `floor(W / d)` binary
    /// digits where `W = min(d * m, 30)`.
    pub fn decode_f64(&self, z: f64, d: usize) -> Result<Vec<f64>> {
        if d == 0 {
            return Err(FafError::DimensionMismatch { expected: 1, found: 0 });
        }
        if !(0.0..1.0).contains(&z) {
            return Err(FafError::OutOfUnitInterval { value: z });
        }
        let window = (d * self.precision as usize).min(F64_DECODE_DIGITS);
        let mut n = (z * 3f64.powi(window as i32)).round() as u64;
        let mut digits = vec![0u8; window];
        for slot in digits.iter_mut().rev() {
            *slot = (n % 3) as u8;
            n /= 3;
        }
        if n != 0 {
            // rounding carried into the integer part: not a codeword
            return Err(FafError::InvalidCodeword { position: 0 });
        }
        Self::check_codeword(&digits)?;
        Ok(self.deinterleave(&digits, d))
    }

    fn deinterleave(&self, digits: &[u8], d: usize) -> Vec<f64> {
        let mut values = vec![0.0; d];
        for (i, &t) in digits.iter().enumerate() {
            if t == 2 {
                let j = (i / d) as i32 + 1;
                values[i % d] += 2f64.powi(-j);
            }
        }
        values
    }
}
