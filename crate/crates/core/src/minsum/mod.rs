//! Scaled Min-Sum decoding with compressed check-node storage.
//!
//! Messages are sign-magnitude with `q`-bit magnitudes. The a-posteriori
//! values carry `f` fractional bits so that `alpha * v` can be accumulated
//! without losing the scaling. Two schedules are provided: row-layered,
//! where rows are grouped into layers of `layer_rows` rows, and sliced
//! (flooding). Both run on either bit-accurate fixed point or a floating
//! point reference.

mod arith;
mod cnu;
mod csd;
mod decoder;
mod fixed;

pub use arith::{DecoderArithmetic, FixedArithmetic, FloatSpec};
pub use cnu::{cnu_compress, cnu_expand, compressed_row_bits, CnuAccumulator, CompressedRowState};
pub use csd::{CsdTerm, ScalarCSD, MAX_SHIFT};
pub use decoder::{
    decode, Arithmetic, DecodeOutcome, DecoderConfig, LayeredDecoder, Schedule, SlicedDecoder,
};
pub use fixed::{
    derive_p_int, layered_posteriori_update, layered_v2c, requantize, scale_csd, FixedPointSpec,
    RoundingMode, V2c,
};

pub(crate) use cnu::ceil_log2;

/// Channel magnitude used throughout.
pub const DEFAULT_CHANNEL: u32 = 9;
/// Default message width.
pub const DEFAULT_Q: u32 = 4;
