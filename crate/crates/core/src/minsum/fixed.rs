use serde::{Deserialize, Serialize};

use super::csd::{ScalarCSD, MAX_SHIFT};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundingMode {
    /// Round to nearest, ties away from zero.
    #[default]
    HalfAwayFromZero,
    /// Drop fractional bits of the magnitude.
    TowardZero,
}

/// Re-quantizes a signed value with `from` fractional bits to `to`
/// fractional bits. Rounding acts on the magnitude, so it is sign-symmetric.
pub fn requantize(raw: i64, from: u32, to: u32, mode: RoundingMode) -> i64 {
    if to >= from {
        return raw << (to - from);
    }
    let drop = from - to;
    let mag = raw.unsigned_abs();
    let q = match mode {
        RoundingMode::HalfAwayFromZero => (mag + (1 << (drop - 1))) >> drop,
        RoundingMode::TowardZero => mag >> drop,
    } as i64;
    if raw < 0 {
        -q
    } else {
        q
    }
}

/// `alpha * value` where `value` has `frac_bits` fractional bits. The
/// product is formed exactly from the shifted terms and then rounded back
/// to `frac_bits`.
pub fn scale_csd(value: i64, alpha: &ScalarCSD, frac_bits: u32, mode: RoundingMode) -> i64 {
    let exact = value * alpha.numerator() as i64;
    requantize(exact, frac_bits + MAX_SHIFT as u32, frac_bits, mode)
}

/// Integer bits of the a-posteriori register:
/// `ceil(log2(alpha_max * w * (2^q - 1) + (2^q - 1)))`.
pub fn derive_p_int(alpha_max: f64, w: usize, q: u32) -> u32 {
    let m = ((1u64 << q) - 1) as f64;
    (alpha_max * w as f64 * m + m).log2().ceil() as u32
}

/// Bit-accurate arithmetic parameters for one decoder configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPointSpec {
    /// Message width in bits (magnitude, sign kept separately).
    pub q: u32,
    /// Channel magnitude `C`.
    pub channel: u32,
    pub alpha: ScalarCSD,
    /// Fractional bits `f` of the a-posteriori values.
    pub frac_bits: u32,
    /// Integer bits `p` of the a-posteriori values.
    pub p_int: u32,
    pub rounding: RoundingMode,
}

impl FixedPointSpec {
    /// Derives `p` for column weight `w` and checks that the worst-case
    /// a-posteriori magnitude fits.
    pub fn new(q: u32, channel: u32, alpha: ScalarCSD, frac_bits: u32, w: usize) -> Result<Self> {
        if !(1..=7).contains(&q) {
            return Err(Error::InvalidConfig(format!("q must be in 1..=7, got {q}")));
        }
        if frac_bits > 16 {
            return Err(Error::InvalidConfig(format!(
                "frac_bits must be at most 16, got {frac_bits}"
            )));
        }
        let p_int = derive_p_int(alpha.value(), w, q);
        let spec = FixedPointSpec {
            q,
            channel,
            alpha,
            frac_bits,
            p_int,
            rounding: RoundingMode::default(),
        };
        spec.check_range(w)?;
        Ok(spec)
    }

    pub fn with_rounding(self, rounding: RoundingMode) -> Self {
        FixedPointSpec { rounding, ..self }
    }

    pub fn max_message(&self) -> i32 {
        (1 << self.q) - 1
    }

    /// Total register width `p + f + 1`.
    pub fn posteriori_width(&self) -> u32 {
        self.p_int + self.frac_bits + 1
    }

    /// Largest representable a-posteriori magnitude in raw units.
    pub fn posteriori_limit(&self) -> i64 {
        (1i64 << (self.p_int + self.frac_bits)) - 1
    }

    /// Raw channel value.
    pub fn channel_raw(&self) -> i64 {
        (self.channel as i64) << self.frac_bits
    }

    pub fn scale(&self, value_raw: i64) -> i64 {
        scale_csd(value_raw, &self.alpha, self.frac_bits, self.rounding)
    }

    /// Scaled raw value of an integer check message.
    pub fn scale_message(&self, v: i32) -> i64 {
        self.scale((v as i64) << self.frac_bits)
    }

    /// Rounds a raw value to an integer message and saturates it.
    pub fn quantize_message(&self, raw: i64) -> i32 {
        let m = requantize(raw, self.frac_bits, 0, self.rounding);
        m.clamp(-(self.max_message() as i64), self.max_message() as i64) as i32
    }

    /// Fails if `C + w * alpha * (2^q - 1)` exceeds the register.
    pub fn check_range(&self, w: usize) -> Result<()> {
        let worst = self.channel_raw() + w as i64 * self.scale_message(self.max_message());
        if worst > self.posteriori_limit() {
            return Err(Error::InvalidConfig(format!(
                "a-posteriori range {worst} exceeds {} bits (limit {})",
                self.posteriori_width(),
                self.posteriori_limit()
            )));
        }
        Ok(())
    }
}

/// Output of the variable-to-check step of a layered row update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct V2c {
    /// Full-precision `gamma - alpha * v_prev` in raw units.
    pub full: i64,
    /// Rounded, saturated integer message.
    pub message: i32,
}

/// `u = gamma - alpha * v_prev`, kept both in full precision and as a
/// saturated `q`-bit message.
pub fn layered_v2c(gamma_raw: i64, v_prev: i32, spec: &FixedPointSpec) -> V2c {
    let full = gamma_raw - spec.scale_message(v_prev);
    V2c {
        full,
        message: spec.quantize_message(full),
    }
}

/// `gamma - alpha * v_prev + alpha * v_new`. Panics if the result leaves the
/// a-posteriori register.
pub fn layered_posteriori_update(
    gamma_raw: i64,
    v_prev: i32,
    v_new: i32,
    spec: &FixedPointSpec,
) -> i64 {
    let g = layered_v2c(gamma_raw, v_prev, spec).full + spec.scale_message(v_new);
    assert!(
        g.abs() <= spec.posteriori_limit(),
        "a-posteriori overflow: {g} exceeds {} bits",
        spec.posteriori_width()
    );
    g
}
