//! Scalar quantization math: power-of-two scaling, the linear and
//! non-linear (three-region) quantizers, and their 8-bit code layouts.
//!
//! All arithmetic stays in `f64`. Scaling by a power of two is exact,
//! so quantized values are dyadic rationals and every decode is exact.

use crate::error::{Error, Result};

/// The `{1, IL, FL}` fixed-point bit budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedPointFormat {
    pub il: u8,
    pub fl: u8,
}

impl FixedPointFormat {
    pub fn new(il: u8, fl: u8) -> Result<Self> {
        if 1 + il + fl != 8 {
            return Err(Error::Validation(format!(
                "fixed-point format {{1,{},{}}} does not total 8 bits",
                il, fl
            )));
        }
        Ok(Self { il, fl })
    }

    /// Extended-precision exponent for the smallest-magnitude region.
    pub fn ext(&self) -> u8 {
        self.fl + 2
    }

    /// Largest NLQ-representable magnitude: `2 - 2^-(FL-1)`.
    pub fn nlq_max(&self) -> f64 {
        2.0 - pow2(-(self.fl as i32 - 1))
    }
}

impl Default for FixedPointFormat {
    fn default() -> Self {
        Self { il: 1, fl: 6 }
    }
}

/// Exact `2^e` for the small exponents used here.
pub fn pow2(e: i32) -> f64 {
    f64::powi(2.0, e)
}

/// Exact `floor(log2 x)` for finite positive `x`.
pub fn floor_log2(x: f64) -> i32 {
    debug_assert!(x > 0.0 && x.is_finite());
    let mut e = x.log2().floor() as i32;
    while pow2(e) > x {
        e -= 1;
    }
    while pow2(e + 1) <= x {
        e += 1;
    }
    e
}

/// Scale exponent `E` of a group: `sf = 2^-E` with `E = floor(log2 max|w|)`.
///
/// An all-zero group gets `E = 0` by convention.
pub fn scale_exponent(weights: &[f64]) -> i32 {
    let max = weights.iter().fold(0.0f64, |m, &w| m.max(w.abs()));
    if max == 0.0 {
        0
    } else {
        floor_log2(max)
    }
}

/// Multiply a group by `sf = 2^-E`. Exact for in-range values.
pub fn scale_group(weights: &[f64], exponent: i32) -> Vec<f64> {
    let sf = pow2(-exponent);
    weights.iter().map(|&w| w * sf).collect()
}

/// Rounding flag: 1 iff the fractional part strictly exceeds one half.
/// An exact tie rounds down.
pub fn round_flag(x: f64) -> f64 {
    if x - x.floor() > 0.5 {
        1.0
    } else {
        0.0
    }
}

/// Linear quantization at step `2^-fl_eff`, saturated to the signed
/// 8-bit-coded range `[-2, (2^(fl_eff+1) - 1) / 2^fl_eff]`.
pub fn quantize_lq(sw: f64, fl_eff: u32) -> Result<f64> {
    // -2.0 exactly is the low saturation point (code -128), so it must
    // re-quantize cleanly even though scaling never produces it.
    if !(sw.is_finite() && sw >= -2.0 && sw < 2.0) {
        return Err(Error::Domain(format!("scaled weight {} outside [-2, 2)", sw)));
    }
    let step_inv = pow2(fl_eff as i32);
    let y = sw * step_inv;
    let q = (y.floor() + round_flag(y)) / step_inv;
    let hi = (pow2(fl_eff as i32 + 1) - 1.0) / step_inv;
    Ok(q.clamp(-2.0, hi))
}

/// Non-linear quantization: three magnitude regions with steps
/// `2^-(FL-1)`, `2^-FL`, `2^-(FL+2)`, saturated to `nlq_max`.
pub fn quantize_nlq(sw: f64, format: FixedPointFormat) -> Result<f64> {
    if !(sw.is_finite() && sw.abs() < 2.0) {
        return Err(Error::Domain(format!("scaled weight {} outside (-2, 2)", sw)));
    }
    let fl = format.fl as i32;
    let a = sw.abs();
    let shift = if a >= 0.5 {
        fl - 1
    } else if a >= 0.25 {
        fl
    } else {
        fl + 2
    };
    let step_inv = pow2(shift);
    let y = sw * step_inv;
    let q = (y.floor() + round_flag(y)) / step_inv;
    let max = format.nlq_max();
    Ok(q.clamp(-max, max))
}

/// An NLQ code byte: bit 7 sign, bits 0-6 magnitude level.
///
/// Levels: `m in [0,63]` -> `m/2^(FL+2)`; `[64,79]` -> `1/4 + (m-64)/2^FL`;
/// `[80,127]` -> `1/2 + (m-80)/2^(FL-1)`. The byte `0x80` (negative zero)
/// is invalid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NlqCode(pub u8);

/// Encode an exact NLQ value into its code byte.
pub fn nlq_encode(q: f64, format: FixedPointFormat) -> Result<NlqCode> {
    let fl = format.fl as i32;
    let a = q.abs();
    let sign = if q < 0.0 { 0x80u8 } else { 0 };
    let m = if a < 0.25 {
        exact_level(a, pow2(fl + 2), 0, 63)?
    } else if a < 0.5 {
        64 + exact_level(a - 0.25, pow2(fl), 0, 15)?
    } else if a <= format.nlq_max() {
        80 + exact_level(a - 0.5, pow2(fl - 1), 0, 47)?
    } else {
        return Err(Error::Domain(format!("magnitude {} exceeds NLQ range", a)));
    };
    if m == 0 {
        // q == 0 must carry a positive sign bit.
        return Ok(NlqCode(0));
    }
    Ok(NlqCode(sign | m))
}

fn exact_level(offset: f64, step_inv: f64, lo: u8, hi: u8) -> Result<u8> {
    let y = offset * step_inv;
    if y.fract() != 0.0 || y < lo as f64 || y > hi as f64 {
        return Err(Error::Domain(format!("value offset {} is not an NLQ level", offset)));
    }
    Ok(y as u8)
}

/// Decode an NLQ code byte to its exact value.
pub fn nlq_decode(code: NlqCode, format: FixedPointFormat) -> Result<f64> {
    let fl = format.fl as i32;
    let m = code.0 & 0x7f;
    let negative = code.0 & 0x80 != 0;
    if m == 0 && negative {
        return Err(Error::Format("negative-zero NLQ code 0x80".into()));
    }
    let a = match m {
        0..=63 => m as f64 / pow2(fl + 2),
        64..=79 => 0.25 + (m - 64) as f64 / pow2(fl),
        _ => 0.5 + (m - 80) as f64 / pow2(fl - 1),
    };
    Ok(if negative { -a } else { a })
}

/// Encode an LQ value `n / 2^FL` as the two's-complement byte of `n`.
pub fn lq_encode(q: f64, format: FixedPointFormat) -> Result<u8> {
    let n = q * pow2(format.fl as i32);
    if n.fract() != 0.0 || !(-128.0..=127.0).contains(&n) {
        return Err(Error::Domain(format!("value {} is not an LQ level", q)));
    }
    Ok(n as i32 as i8 as u8)
}

/// Decode an LQ code byte to `n / 2^FL`.
pub fn lq_decode(code: u8, format: FixedPointFormat) -> f64 {
    (code as i8) as f64 / pow2(format.fl as i32)
}
