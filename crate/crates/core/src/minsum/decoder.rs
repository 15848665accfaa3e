use serde::{Deserialize, Serialize};

use super::arith::{DecoderArithmetic, FixedArithmetic, FloatSpec};
use super::cnu::{CnuAccumulator, CompressedRowState};
use super::fixed::FixedPointSpec;
use crate::error::{Error, Result};
use crate::gf2::{syndrome, BitVec, SparseSupport};
use crate::keygen::{CodeParams, PrivateKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// Rows processed in layers, a-posteriori values updated after each.
    Layered,
    /// Flooding: all check nodes, then all variable nodes.
    Sliced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Arithmetic {
    Fixed(FixedPointSpec),
    Float(FloatSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderConfig {
    pub schedule: Schedule,
    pub arithmetic: Arithmetic,
    pub max_iterations: usize,
    /// Rows per layer. Values above 1 need keys constrained by at least this
    /// much. Ignored by the sliced schedule.
    pub layer_rows: usize,
}

impl DecoderConfig {
    pub fn layered(arithmetic: Arithmetic, max_iterations: usize, layer_rows: usize) -> Self {
        DecoderConfig {
            schedule: Schedule::Layered,
            arithmetic,
            max_iterations,
            layer_rows,
        }
    }

    pub fn sliced(arithmetic: Arithmetic, max_iterations: usize) -> Self {
        DecoderConfig {
            schedule: Schedule::Sliced,
            arithmetic,
            max_iterations,
            layer_rows: 1,
        }
    }

    pub fn validate(&self, key: &PrivateKey) -> Result<()> {
        self.check(&key.params, key.constrained_by())
    }

    /// Validation against keys that will be drawn with `params`, which are
    /// constrained by `params.l`.
    pub fn validate_params(&self, params: &CodeParams) -> Result<()> {
        self.check(params, params.l)
    }

    fn check(&self, params: &CodeParams, constrained_by: usize) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "max_iterations must be positive".into(),
            ));
        }
        if self.schedule == Schedule::Layered {
            if self.layer_rows == 0 || self.layer_rows > params.r {
                return Err(Error::InvalidConfig(format!(
                    "layer_rows must be in 1..=r, got {}",
                    self.layer_rows
                )));
            }
            if self.layer_rows > 1 && constrained_by < self.layer_rows {
                return Err(Error::InvalidConfig(format!(
                    "key is constrained by {constrained_by} but layers have {} rows",
                    self.layer_rows
                )));
            }
        }
        if let Arithmetic::Fixed(spec) = &self.arithmetic {
            spec.check_range(params.w)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeOutcome {
    pub success: bool,
    /// Iterations run; 0 when the input already had a zero syndrome.
    pub iterations: usize,
    pub codeword: Option<BitVec>,
    pub final_syndrome_weight: usize,
}

/// Decodes `x` under `key` with the configured schedule and arithmetic.
pub fn decode(x: &BitVec, key: &PrivateKey, cfg: &DecoderConfig) -> Result<DecodeOutcome> {
    cfg.validate(key)?;
    match (&cfg.arithmetic, cfg.schedule) {
        (Arithmetic::Fixed(s), Schedule::Layered) => {
            LayeredDecoder::new(key, FixedArithmetic::new(s.clone()), cfg.layer_rows)?
                .decode(x, cfg.max_iterations)
        }
        (Arithmetic::Fixed(s), Schedule::Sliced) => {
            SlicedDecoder::new(key, FixedArithmetic::new(s.clone()))?.decode(x, cfg.max_iterations)
        }
        (Arithmetic::Float(s), Schedule::Layered) => {
            LayeredDecoder::new(key, s.clone(), cfg.layer_rows)?.decode(x, cfg.max_iterations)
        }
        (Arithmetic::Float(s), Schedule::Sliced) => {
            SlicedDecoder::new(key, s.clone())?.decode(x, cfg.max_iterations)
        }
    }
}

/// Column of every edge, row-major; edges of a row are in
/// `(block, support order)`.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub r: usize,
    pub dr: usize,
    pub cols: Vec<u32>,
}

impl Layout {
    pub fn new(supports: &[SparseSupport]) -> Self {
        let r = supports[0].r();
        let dr: usize = supports.iter().map(|s| s.weight()).sum();
        let mut cols: Vec<u32> = supports
            .iter()
            .enumerate()
            .flat_map(|(k, s)| s.indices().iter().map(move |&c| (k * r + c) as u32))
            .collect();
        let first: Vec<u32> = supports
            .iter()
            .flat_map(|s| s.indices().iter().map(|&c| c as u32))
            .collect();
        cols.reserve(r * dr);
        for i in 1..r {
            let prev = (i - 1) * dr;
            for e in 0..dr {
                // the column wraps to its block start exactly when the row
                // offset reaches r - s
                let c = cols[prev + e] + 1;
                cols.push(if first[e] as usize + i == r {
                    c - r as u32
                } else {
                    c
                });
            }
        }
        Layout { r, dr, cols }
    }

    pub fn row_weight(&self) -> usize {
        self.dr
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[u32] {
        &self.cols[row * self.dr..(row + 1) * self.dr]
    }

    #[inline]
    pub fn col(&self, e: usize, row: usize) -> u32 {
        self.cols[row * self.dr + e]
    }
}

fn check_len(x: &BitVec, n: usize) -> Result<()> {
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    Ok(())
}

fn outcome(
    supports: &[SparseSupport],
    hard: BitVec,
    iterations: usize,
) -> Result<Option<DecodeOutcome>> {
    let syn = syndrome(supports, &hard)?;
    Ok(syn.is_zero().then(|| DecodeOutcome {
        success: true,
        iterations,
        codeword: Some(hard),
        final_syndrome_weight: 0,
    }))
}

/// Row-layered scaled Min-Sum. Within a layer every row reads the
/// a-posteriori values first and all rows write afterwards, which is what a
/// `layer_rows`-wide datapath computes.
pub struct LayeredDecoder<'k, A: DecoderArithmetic> {
    arith: A,
    supports: &'k [SparseSupport],
    layout: Layout,
    layer_rows: usize,
    posteriori: Vec<A::Post>,
    states: Vec<CompressedRowState<A::Mag>>,
    signs: Vec<bool>,
    scratch_t: Vec<A::Post>,
    scratch_neg: Vec<bool>,
    scratch_states: Vec<CompressedRowState<A::Mag>>,
}

impl<'k, A: DecoderArithmetic> LayeredDecoder<'k, A> {
    pub fn new(key: &'k PrivateKey, arith: A, layer_rows: usize) -> Result<Self> {
        let r = key.params.r;
        if layer_rows == 0 || layer_rows > r {
            return Err(Error::InvalidConfig(format!(
                "layer_rows must be in 1..=r, got {layer_rows}"
            )));
        }
        let layout = Layout::new(&key.supports);
        let dr = layout.row_weight();
        Ok(LayeredDecoder {
            posteriori: vec![A::Post::default(); key.params.n()],
            states: vec![CompressedRowState::zero(); r],
            signs: vec![false; r * dr],
            scratch_t: vec![A::Post::default(); layer_rows * dr],
            scratch_neg: vec![false; layer_rows * dr],
            scratch_states: vec![CompressedRowState::zero(); layer_rows],
            arith,
            supports: &key.supports,
            layout,
            layer_rows,
        })
    }

    /// Resets all state to the channel values of `x`.
    pub fn load(&mut self, x: &BitVec) -> Result<()> {
        check_len(x, self.posteriori.len())?;
        for (p, b) in self.posteriori.iter_mut().zip(x.iter()) {
            *p = self.arith.channel(b);
        }
        self.states.fill(CompressedRowState::zero());
        self.signs.fill(false);
        Ok(())
    }

    pub fn num_layers(&self) -> usize {
        self.layout.r.div_ceil(self.layer_rows)
    }

    pub fn process_layer(&mut self, layer: usize) {
        let dr = self.layout.dr;
        let start = layer * self.layer_rows;
        let end = (start + self.layer_rows).min(self.layout.r);
        let arith = &self.arith;
        let post = &mut self.posteriori;
        for (ri, row) in (start..end).enumerate() {
            let mut acc = CnuAccumulator::new(arith.ceiling());
            let state = self.states[row];
            let cols = self.layout.row(row);
            let signs = &self.signs[row * dr..(row + 1) * dr];
            let ts = &mut self.scratch_t[ri * dr..(ri + 1) * dr];
            let negs = &mut self.scratch_neg[ri * dr..(ri + 1) * dr];
            for (((&col, &sign), t), uneg) in cols.iter().zip(signs).zip(ts).zip(negs) {
                let (m, neg) = state.expand(col, sign);
                *t = post[col as usize] - arith.scaled(m, neg);
                let (um, un) = arith.message(*t);
                acc.push(col, um, un);
                *uneg = un;
            }
            self.scratch_states[ri] = acc.finish();
        }
        for (ri, row) in (start..end).enumerate() {
            let state = self.scratch_states[ri];
            self.states[row] = state;
            let cols = self.layout.row(row);
            let signs = &mut self.signs[row * dr..(row + 1) * dr];
            let ts = &self.scratch_t[ri * dr..(ri + 1) * dr];
            let negs = &self.scratch_neg[ri * dr..(ri + 1) * dr];
            for (((&col, sign), &t), &un) in cols.iter().zip(signs).zip(ts).zip(negs) {
                *sign = un;
                let (m, neg) = state.expand(col, un);
                let g = t + arith.scaled(m, neg);
                arith.check(g);
                post[col as usize] = g;
            }
        }
    }

    pub fn iterate(&mut self) {
        for layer in 0..self.num_layers() {
            self.process_layer(layer);
        }
    }

    pub fn hard_decision(&self) -> BitVec {
        let bits: Vec<bool> = self
            .posteriori
            .iter()
            .map(|&p| self.arith.is_negative(p))
            .collect();
        BitVec::from_bools(&bits)
    }

    pub fn posteriori(&self) -> &[A::Post] {
        &self.posteriori
    }

    pub fn row_state(&self, row: usize) -> &CompressedRowState<A::Mag> {
        &self.states[row]
    }

    /// Current check-to-variable message on edge `e` of `row`.
    pub fn c2v(&self, row: usize, e: usize) -> (A::Mag, bool) {
        let dr = self.layout.row_weight();
        self.states[row].expand(self.layout.col(e, row), self.signs[row * dr + e])
    }

    pub fn column(&self, row: usize, e: usize) -> usize {
        self.layout.col(e, row) as usize
    }

    pub fn row_weight(&self) -> usize {
        self.layout.row_weight()
    }

    pub fn arithmetic(&self) -> &A {
        &self.arith
    }

    pub fn decode(&mut self, x: &BitVec, max_iterations: usize) -> Result<DecodeOutcome> {
        self.load(x)?;
        if let Some(o) = outcome(self.supports, x.clone(), 0)? {
            return Ok(o);
        }
        for it in 1..=max_iterations {
            self.iterate();
            if let Some(o) = outcome(self.supports, self.hard_decision(), it)? {
                return Ok(o);
            }
        }
        Ok(DecodeOutcome {
            success: false,
            iterations: max_iterations,
            codeword: None,
            final_syndrome_weight: syndrome(self.supports, &self.hard_decision())?.weight(),
        })
    }
}

/// Flooding scaled Min-Sum with the same message formats.
pub struct SlicedDecoder<'k, A: DecoderArithmetic> {
    arith: A,
    supports: &'k [SparseSupport],
    layout: Layout,
    channel: Vec<A::Post>,
    totals: Vec<A::Sum>,
    states: Vec<CompressedRowState<A::Mag>>,
    u_mag: Vec<A::Mag>,
    u_neg: Vec<bool>,
}

impl<'k, A: DecoderArithmetic> SlicedDecoder<'k, A> {
    pub fn new(key: &'k PrivateKey, arith: A) -> Result<Self> {
        let r = key.params.r;
        let layout = Layout::new(&key.supports);
        let dr = layout.row_weight();
        Ok(SlicedDecoder {
            channel: vec![A::Post::default(); key.params.n()],
            totals: vec![A::Sum::default(); key.params.n()],
            states: vec![CompressedRowState::zero(); r],
            u_mag: vec![A::Mag::default(); r * dr],
            u_neg: vec![false; r * dr],
            arith,
            supports: &key.supports,
            layout,
        })
    }

    pub fn load(&mut self, x: &BitVec) -> Result<()> {
        check_len(x, self.channel.len())?;
        for (p, b) in self.channel.iter_mut().zip(x.iter()) {
            *p = self.arith.channel(b);
        }
        for ((&col, m), n) in self
            .layout
            .cols
            .iter()
            .zip(&mut self.u_mag)
            .zip(&mut self.u_neg)
        {
            (*m, *n) = self.arith.message(self.channel[col as usize]);
        }
        Ok(())
    }

    /// One flooding iteration; returns the hard decision on
    /// `channel + alpha * total`.
    pub fn iterate(&mut self) -> BitVec {
        let dr = self.layout.dr;
        let arith = &self.arith;
        let ceiling = arith.ceiling();
        for (row, state) in self.states.iter_mut().enumerate() {
            let mut acc = CnuAccumulator::new(ceiling);
            let span = row * dr..(row + 1) * dr;
            for ((&col, &m), &n) in self
                .layout
                .row(row)
                .iter()
                .zip(&self.u_mag[span.clone()])
                .zip(&self.u_neg[span])
            {
                acc.push(col, m, n);
            }
            *state = acc.finish();
        }
        self.totals.fill(A::Sum::default());
        for (row, state) in self.states.iter().enumerate() {
            for (&col, &n) in self
                .layout
                .row(row)
                .iter()
                .zip(&self.u_neg[row * dr..(row + 1) * dr])
            {
                let (m, neg) = state.expand(col, n);
                let t = &mut self.totals[col as usize];
                *t = *t + arith.signed(m, neg);
            }
        }
        for (row, state) in self.states.iter().enumerate() {
            let span = row * dr..(row + 1) * dr;
            let mags = &mut self.u_mag[span.clone()];
            let negs = &mut self.u_neg[span];
            for ((&col, um), un) in self.layout.row(row).iter().zip(mags).zip(negs) {
                let (m, neg) = state.expand(col, *un);
                let extrinsic = self.totals[col as usize] - arith.signed(m, neg);
                let u = self.channel[col as usize] + arith.scale_sum(extrinsic);
                (*um, *un) = arith.message(u);
            }
        }
        let bits: Vec<bool> = self
            .channel
            .iter()
            .zip(&self.totals)
            .map(|(&c, &t)| {
                let g = c + self.arith.scale_sum(t);
                self.arith.check(g);
                self.arith.is_negative(g)
            })
            .collect();
        BitVec::from_bools(&bits)
    }

    pub fn decode(&mut self, x: &BitVec, max_iterations: usize) -> Result<DecodeOutcome> {
        self.load(x)?;
        if let Some(o) = outcome(self.supports, x.clone(), 0)? {
            return Ok(o);
        }
        let mut hard = x.clone();
        for it in 1..=max_iterations {
            hard = self.iterate();
            if let Some(o) = outcome(self.supports, hard.clone(), it)? {
                return Ok(o);
            }
        }
        Ok(DecodeOutcome {
            success: false,
            iterations: max_iterations,
            codeword: None,
            final_syndrome_weight: syndrome(self.supports, &hard)?.weight(),
        })
    }
}
