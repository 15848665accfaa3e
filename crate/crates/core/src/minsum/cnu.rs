use serde::{Deserialize, Serialize};

/// Compressed check-node state: the two smallest magnitudes, the column of
/// the smallest, and the XOR of all input signs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompressedRowState<M> {
    pub min1: M,
    pub min2: M,
    pub idx: u32,
    pub sign: bool,
}

impl<M: Copy + Default> CompressedRowState<M> {
    /// State that expands to zero on every edge.
    pub fn zero() -> Self {
        CompressedRowState {
            min1: M::default(),
            min2: M::default(),
            idx: u32::MAX,
            sign: false,
        }
    }
}

impl<M: Copy + PartialOrd> CompressedRowState<M> {
    /// Check-to-variable message on `col`, given the sign of that edge's own
    /// incoming message. Returns `(magnitude, negative)`.
    #[inline]
    pub fn expand(&self, col: u32, own_negative: bool) -> (M, bool) {
        let mag = if col == self.idx {
            self.min2
        } else {
            self.min1
        };
        (mag, self.sign ^ own_negative)
    }
}

/// Streaming compressor. Ties keep the first column seen as `idx`.
#[derive(Debug, Clone, Copy)]
pub struct CnuAccumulator<M> {
    state: CompressedRowState<M>,
}

impl<M: Copy + PartialOrd> CnuAccumulator<M> {
    /// `ceiling` must exceed every magnitude that will be pushed.
    pub fn new(ceiling: M) -> Self {
        CnuAccumulator {
            state: CompressedRowState {
                min1: ceiling,
                min2: ceiling,
                idx: u32::MAX,
                sign: false,
            },
        }
    }

    #[inline]
    pub fn push(&mut self, col: u32, mag: M, negative: bool) {
        let s = &mut self.state;
        if mag < s.min1 {
            s.min2 = s.min1;
            s.min1 = mag;
            s.idx = col;
        } else if mag < s.min2 {
            s.min2 = mag;
        }
        s.sign ^= negative;
    }

    pub fn finish(self) -> CompressedRowState<M> {
        self.state
    }
}

/// Compresses a row of `(column, magnitude, negative)` messages.
pub fn cnu_compress(row: &[(u32, u8, bool)]) -> CompressedRowState<u8> {
    let mut acc = CnuAccumulator::new(u8::MAX);
    for &(c, m, n) in row {
        acc.push(c, m, n);
    }
    acc.finish()
}

/// Expands a state back to one message per edge, as signed integers.
pub fn cnu_expand(state: &CompressedRowState<u8>, row: &[(u32, u8, bool)]) -> Vec<i32> {
    row.iter()
        .map(|&(c, _, n)| {
            let (m, neg) = state.expand(c, n);
            if neg {
                -(m as i32)
            } else {
                m as i32
            }
        })
        .collect()
}

/// Storage bits of one compressed row: two `q`-bit minima, a sign and a
/// column index over `n0 * r` columns.
pub fn compressed_row_bits(q: u32, n0: usize, r: usize) -> u64 {
    2 * q as u64 + 1 + ceil_log2((n0 * r) as u64) as u64
}

pub(crate) fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}
