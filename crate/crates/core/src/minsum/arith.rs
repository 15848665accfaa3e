use std::fmt::Debug;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use super::csd::MAX_SHIFT;
use super::fixed::{FixedPointSpec, RoundingMode};

/// Number formats the decoders are generic over. `Post` holds channel and
/// a-posteriori values, `Mag` message magnitudes and `Sum` signed sums of
/// check messages.
pub trait DecoderArithmetic: Clone + Send + Sync {
    type Post: Copy
        + PartialOrd
        + Default
        + Debug
        + Add<Output = Self::Post>
        + Sub<Output = Self::Post>;
    type Mag: Copy + PartialOrd + Default + Debug;
    type Sum: Copy + Default + Debug + Add<Output = Self::Sum> + Sub<Output = Self::Sum>;

    fn channel(&self, bit: bool) -> Self::Post;
    /// Strictly above every message magnitude.
    fn ceiling(&self) -> Self::Mag;
    /// Variable-to-check message for a full-precision value, as
    /// `(magnitude, negative)`.
    fn message(&self, value: Self::Post) -> (Self::Mag, bool);
    /// `alpha * (±mag)`.
    fn scaled(&self, mag: Self::Mag, negative: bool) -> Self::Post;
    fn signed(&self, mag: Self::Mag, negative: bool) -> Self::Sum;
    fn scale_sum(&self, sum: Self::Sum) -> Self::Post;
    fn is_negative(&self, value: Self::Post) -> bool;
    /// Called on every a-posteriori write.
    fn check(&self, _value: Self::Post) {}
}

/// Bit-accurate arithmetic: raw values are integers in units of `2^-f`.
#[derive(Debug, Clone)]
pub struct FixedArithmetic {
    spec: FixedPointSpec,
    table: Vec<i64>,
    limit: i64,
    numerator: i64,
    max_message: u64,
    message_round: u64,
    scale_round: u64,
}

impl FixedArithmetic {
    pub fn new(spec: FixedPointSpec) -> Self {
        let table = (0..=spec.max_message())
            .map(|m| spec.scale_message(m))
            .collect();
        let half = |bits: u32| match spec.rounding {
            RoundingMode::HalfAwayFromZero if bits > 0 => 1u64 << (bits - 1),
            _ => 0,
        };
        FixedArithmetic {
            table,
            limit: spec.posteriori_limit(),
            numerator: spec.alpha.numerator() as i64,
            max_message: spec.max_message() as u64,
            message_round: half(spec.frac_bits),
            scale_round: half(MAX_SHIFT as u32),
            spec,
        }
    }

    pub fn spec(&self) -> &FixedPointSpec {
        &self.spec
    }
}

impl DecoderArithmetic for FixedArithmetic {
    type Post = i64;
    type Mag = u8;
    type Sum = i64;

    fn channel(&self, bit: bool) -> i64 {
        let c = self.spec.channel_raw();
        if bit {
            -c
        } else {
            c
        }
    }

    fn ceiling(&self) -> u8 {
        u8::MAX
    }

    #[inline]
    fn message(&self, value: i64) -> (u8, bool) {
        let mag = (value.unsigned_abs() + self.message_round) >> self.spec.frac_bits;
        (mag.min(self.max_message) as u8, value < 0)
    }

    #[inline]
    fn scaled(&self, mag: u8, negative: bool) -> i64 {
        let v = self.table[mag as usize];
        if negative {
            -v
        } else {
            v
        }
    }

    #[inline]
    fn signed(&self, mag: u8, negative: bool) -> i64 {
        if negative {
            -(mag as i64)
        } else {
            mag as i64
        }
    }

    #[inline]
    fn scale_sum(&self, sum: i64) -> i64 {
        let exact = (sum << self.spec.frac_bits) * self.numerator;
        let mag = ((exact.unsigned_abs() + self.scale_round) >> MAX_SHIFT) as i64;
        if exact < 0 {
            -mag
        } else {
            mag
        }
    }

    #[inline]
    fn is_negative(&self, value: i64) -> bool {
        value < 0
    }

    #[inline]
    fn check(&self, value: i64) {
        assert!(
            value.abs() <= self.limit,
            "a-posteriori overflow: {value} exceeds {} bits",
            self.spec.posteriori_width()
        );
    }
}

/// Floating-point reference. With `message_bits` set, messages are rounded
/// to integers and saturated to `2^q - 1` while everything else stays in
/// full precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloatSpec {
    pub channel: f64,
    pub alpha: f64,
    pub message_bits: Option<u32>,
}

impl DecoderArithmetic for FloatSpec {
    type Post = f64;
    type Mag = f64;
    type Sum = f64;

    fn channel(&self, bit: bool) -> f64 {
        if bit {
            -self.channel
        } else {
            self.channel
        }
    }

    fn ceiling(&self) -> f64 {
        f64::INFINITY
    }

    #[inline]
    fn message(&self, value: f64) -> (f64, bool) {
        let mag = match self.message_bits {
            Some(q) => value.abs().round().min(((1u64 << q) - 1) as f64),
            None => value.abs(),
        };
        (mag, value < 0.0)
    }

    #[inline]
    fn scaled(&self, mag: f64, negative: bool) -> f64 {
        let v = self.alpha * mag;
        if negative {
            -v
        } else {
            v
        }
    }

    #[inline]
    fn signed(&self, mag: f64, negative: bool) -> f64 {
        if negative {
            -mag
        } else {
            mag
        }
    }

    #[inline]
    fn scale_sum(&self, sum: f64) -> f64 {
        self.alpha * sum
    }

    #[inline]
    fn is_negative(&self, value: f64) -> bool {
        value < 0.0
    }
}
