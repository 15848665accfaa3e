//! L-parallel processing of the row-layered decoder: dynamic division of H
//! into L×L identity blocks, the two-bank a-posteriori memory with its
//! barrel shifter, and memory/cycle cost models.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::{syndrome, BitVec, SparseSupport};
use crate::keygen::{check_constraint, sample_constrained_support, CodeParams, PrivateKey};
use crate::minsum::{
    ceil_log2, compressed_row_bits, CnuAccumulator, CompressedRowState, DecodeOutcome,
    DecoderArithmetic,
};
use crate::rng::{derive_rng, domain};

/// Identity-block starts of every layer. Layer `l` covers rows
/// `l*L .. min((l+1)*L, r)`; its blocks in submatrix `k` start at the
/// columns `(s + l*L) mod r` for `s` in the support of `h_k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityBlockSchedule {
    pub params: CodeParams,
    #[serde(rename = "L")]
    pub l: usize,
    /// `layers[l][k]` lists the `w` block starts of submatrix `k`.
    pub layers: Vec<Vec<Vec<usize>>>,
    /// `r mod L`; zero when the last layer is complete.
    pub last_layer_rows: usize,
}

impl IdentityBlockSchedule {
    /// Builds the schedule without checking the distance constraint.
    pub fn from_supports_unchecked(
        params: CodeParams,
        l: usize,
        supports: &[SparseSupport],
    ) -> Self {
        let r = params.r;
        let num_layers = r.div_ceil(l);
        let mut layers = Vec::with_capacity(num_layers);
        let mut starts: Vec<Vec<usize>> = supports.iter().map(|s| s.indices().to_vec()).collect();
        for _ in 0..num_layers {
            layers.push(starts.clone());
            for block in &mut starts {
                for s in block.iter_mut() {
                    *s = (*s + l) % r;
                }
            }
        }
        IdentityBlockSchedule {
            params,
            l,
            layers,
            last_layer_rows: r % l,
        }
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn incomplete_last_layer(&self) -> bool {
        self.last_layer_rows != 0
    }

    pub fn rows_in_layer(&self, layer: usize) -> usize {
        if layer + 1 == self.layers.len() && self.incomplete_last_layer() {
            self.last_layer_rows
        } else {
            self.l
        }
    }

    /// Every covered cell as `(row, global column)`.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let r = self.params.r;
        self.layers
            .iter()
            .enumerate()
            .flat_map(move |(layer, blocks)| {
                let rows = self.rows_in_layer(layer);
                blocks.iter().enumerate().flat_map(move |(k, starts)| {
                    starts.iter().flat_map(move |&s| {
                        (0..rows).map(move |j| (layer * self.l + j, k * r + (s + j) % r))
                    })
                })
            })
    }
}

/// Divides the parity-check matrix of `sk` into L×L identity blocks.
pub fn dynamic_division(sk: &PrivateKey, l: usize) -> Result<IdentityBlockSchedule> {
    if l == 0 || l > sk.params.r {
        return Err(Error::InvalidParams(format!("L must be in 1..=r, got {l}")));
    }
    if let Some(k) = sk.supports.iter().position(|s| !check_constraint(s, l)) {
        return Err(Error::InvalidParams(format!(
            "support {k} is not constrained by L={l}; blocks would not be identities"
        )));
    }
    Ok(IdentityBlockSchedule::from_supports_unchecked(
        sk.params,
        l,
        &sk.supports,
    ))
}

/// True iff no column has two nonzeros within any layer.
pub fn validate_layers(schedule: &IdentityBlockSchedule) -> bool {
    let r = schedule.params.r;
    let mut stamp = vec![usize::MAX; r];
    for (layer, blocks) in schedule.layers.iter().enumerate() {
        let rows = schedule.rows_in_layer(layer);
        for (k, starts) in blocks.iter().enumerate() {
            let tag = layer * blocks.len() + k;
            for &s in starts {
                for j in 0..rows {
                    let c = (s + j) % r;
                    if stamp[c] == tag {
                        return false;
                    }
                    stamp[c] = tag;
                }
            }
        }
    }
    true
}

/// Nonzero cells and distinct nonzero blocks when the circulant of `support`
/// is tiled into fixed L×L blocks; the partial last block row and column are
/// left out.
pub fn fixed_division_counts(support: &SparseSupport, l: usize) -> (u64, u64) {
    let r = support.r();
    let nb = r / l;
    let full = nb * l;
    let mut seen = vec![usize::MAX; nb];
    let (mut cells, mut blocks) = (0u64, 0u64);
    for block_row in 0..nb {
        let row0 = block_row * l;
        for &s in support.indices() {
            let mut c = s + row0;
            if c >= r {
                c -= r;
            }
            for _ in 0..l {
                if c < full {
                    cells += 1;
                    let b = c / l;
                    if seen[b] != block_row {
                        seen[b] = block_row;
                        blocks += 1;
                    }
                }
                c += 1;
                if c == r {
                    c = 0;
                }
            }
        }
    }
    (cells, blocks)
}

/// Mean number of nonzeros per nonzero fixed L×L block, pooled over
/// `num_samples` constrained supports.
pub fn fixed_division_stats<R: Rng + ?Sized>(
    num_samples: usize,
    r: usize,
    w: usize,
    l: usize,
    rng: &mut R,
) -> Result<f64> {
    let (mut cells, mut blocks) = (0, 0);
    for _ in 0..num_samples.max(1) {
        let s = sample_constrained_support(r, w, l, rng)?;
        let (c, b) = fixed_division_counts(&s, l);
        cells += c;
        blocks += b;
    }
    Ok(cells as f64 / blocks as f64)
}

/// Parallel form of [`fixed_division_stats`]; sample `i` uses its own stream
/// derived from `(seed, i)`, so the result does not depend on thread count.
pub fn fixed_division_stats_seeded(
    num_samples: usize,
    r: usize,
    w: usize,
    l: usize,
    seed: u64,
) -> Result<f64> {
    let counts = (0..num_samples.max(1) as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = derive_rng(seed, domain::BLOCKSTATS, i);
            sample_constrained_support(r, w, l, &mut rng).map(|s| fixed_division_counts(&s, l))
        })
        .collect::<Result<Vec<_>>>()?;
    let (cells, blocks) = counts.iter().fold((0, 0), |(a, b), &(c, d)| (a + c, b + d));
    Ok(cells as f64 / blocks as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RamEntry {
    pub name: String,
    pub banks: u64,
    pub depth: u64,
    pub width: u64,
    pub total_bits: u64,
}

impl RamEntry {
    fn new(name: &str, banks: u64, depth: u64, width: u64) -> Self {
        RamEntry {
            name: name.to_string(),
            banks,
            depth,
            width,
            total_bits: banks * depth * width,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryReport {
    #[serde(rename = "L")]
    pub l: usize,
    pub entries: Vec<RamEntry>,
    pub total_bits: u64,
}

/// RAM sizes of the L-parallel decoder with `q`-bit messages and
/// `apost_width`-bit a-posteriori values.
pub fn memory_report(params: &CodeParams, l: usize, q: u32, apost_width: u32) -> MemoryReport {
    let (n0, r, w) = (params.n0 as u64, params.r as u64, params.w as u64);
    let l64 = l as u64;
    let index_bits = ceil_log2(n0 * r) as u64;
    let layers = r.div_ceil(l64);
    let entries = vec![
        RamEntry::new("RAM I", 1, n0 * w, index_bits),
        RamEntry::new(
            "RAM M",
            1,
            layers,
            l64 * compressed_row_bits(q, params.n0, params.r),
        ),
        RamEntry::new("RAM S", 1, n0 * w * layers, l64),
        RamEntry::new("RAM U", 2, n0 * (r / (2 * l64)), l64 * apost_width as u64),
        RamEntry::new("RAM T", l64, n0 * w, apost_width as u64),
    ];
    let total_bits = entries.iter().map(|e| e.total_bits).sum();
    MemoryReport {
        l,
        entries,
        total_bits,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    #[serde(rename = "L")]
    pub l: usize,
    pub clocks_per_iteration_worst: u64,
    /// Serial clocks over parallel clocks, as a reduced fraction.
    pub speedup_num: u64,
    pub speedup_den: u64,
    pub speedup: f64,
}

pub fn cycle_report(params: &CodeParams, l: usize) -> CycleReport {
    let (n0, r, w) = (params.n0 as u64, params.r as u64, params.w as u64);
    let clocks = n0 * w * r.div_ceil(l as u64);
    let serial = n0 * w * r;
    let g = gcd(serial, clocks);
    CycleReport {
        l,
        clocks_per_iteration_worst: clocks,
        speedup_num: serial / g,
        speedup_den: clocks / g,
        speedup: serial as f64 / clocks as f64,
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Address arithmetic of the two-bank a-posteriori memory. Block `b` of `L`
/// consecutive columns lives in bank `b mod 2` at row `b / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BankMap {
    #[serde(rename = "L")]
    pub l: usize,
    pub index_bits: u32,
    /// `ceil(log2(2L))`.
    pub k: u32,
}

impl BankMap {
    pub fn new(l: usize, n0: usize, r: usize) -> Result<Self> {
        if l == 0 || !l.is_power_of_two() {
            return Err(Error::InvalidParams(format!(
                "bank mapping needs a power-of-two L, got {l}"
            )));
        }
        Ok(BankMap {
            l,
            index_bits: ceil_log2((n0 * r) as u64),
            k: ceil_log2(2 * l as u64),
        })
    }

    /// `(bank-1 row, bank-0 row, rotation)` for a read starting at `a`.
    pub fn map(&self, a: usize) -> (usize, usize, usize) {
        let hi = a >> self.k;
        let odd = (a >> (self.k - 1)) & 1;
        (hi, hi + odd, a % (2 * self.l))
    }
}

pub fn bank_map(a: usize, l: usize, n0: usize, r: usize) -> Result<(usize, usize, usize)> {
    if a >= n0 * r {
        return Err(Error::IndexOutOfRange {
            index: a,
            bound: n0 * r,
        });
    }
    Ok(BankMap::new(l, n0, r)?.map(a))
}

/// Cyclic left rotation by `s` built from `ceil(log2(len))` conditional
/// stages; stage `i` rotates by `2^i` when bit `i` of `s` is set.
pub fn shifter<T: Clone>(entries: &[T], s: usize) -> Vec<T> {
    let n = entries.len();
    let mut v = entries.to_vec();
    if n == 0 {
        return v;
    }
    for stage in 0..ceil_log2(n as u64) {
        let step = 1usize << stage;
        if s & step != 0 {
            v = (0..n).map(|i| v[(i + step) % n].clone()).collect();
        }
    }
    v
}

/// Flat memory image split into the two banks of `L`-wide rows.
#[derive(Debug, Clone, PartialEq)]
pub struct BankedMemory<T> {
    map: BankMap,
    rows: usize,
    bank0: Vec<T>,
    bank1: Vec<T>,
}

impl<T: Clone + Default> BankedMemory<T> {
    /// Pads `image` with defaults to a whole number of row pairs.
    pub fn from_image(map: BankMap, image: &[T]) -> Self {
        let l = map.l;
        let rows = image.len().div_ceil(2 * l);
        let mut bank0 = vec![T::default(); rows * l];
        let mut bank1 = vec![T::default(); rows * l];
        for (i, v) in image.iter().enumerate() {
            let (block, off) = (i / l, i % l);
            let bank = if block % 2 == 0 {
                &mut bank0
            } else {
                &mut bank1
            };
            bank[(block / 2) * l + off] = v.clone();
        }
        BankedMemory {
            map,
            rows,
            bank0,
            bank1,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn to_image(&self) -> Vec<T> {
        let l = self.map.l;
        (0..2 * self.rows * l)
            .map(|i| {
                let (block, off) = (i / l, i % l);
                let bank = if block % 2 == 0 {
                    &self.bank0
                } else {
                    &self.bank1
                };
                bank[(block / 2) * l + off].clone()
            })
            .collect()
    }

    /// The `L` values at `a, a+1, …, a+L-1`: bank-0 row then bank-1 row,
    /// rotated left by `a mod 2L`.
    pub fn gather(&self, a: usize) -> Vec<T> {
        let l = self.map.l;
        let (r1, r0, rot) = self.map.map(a);
        let mut window = self.bank0[r0 * l..(r0 + 1) * l].to_vec();
        window.extend_from_slice(&self.bank1[r1 * l..(r1 + 1) * l]);
        let mut out = shifter(&window, rot);
        out.truncate(l);
        out
    }

    /// Writes `values` to `a, a+1, …` through the inverse rotation.
    pub fn scatter(&mut self, a: usize, values: &[T]) {
        let l = self.map.l;
        let (r1, r0, rot) = self.map.map(a);
        let mut window = self.bank0[r0 * l..(r0 + 1) * l].to_vec();
        window.extend_from_slice(&self.bank1[r1 * l..(r1 + 1) * l]);
        let mut rotated = shifter(&window, rot);
        rotated[..values.len()].clone_from_slice(values);
        let back = shifter(&rotated, 2 * l - rot);
        self.bank0[r0 * l..(r0 + 1) * l].clone_from_slice(&back[..l]);
        self.bank1[r1 * l..(r1 + 1) * l].clone_from_slice(&back[l..]);
    }
}

/// Row-layered decoder that processes one layer of `L` rows at a time
/// through the banked a-posteriori memory.
///
/// Each submatrix keeps an extended image of `r + 2L` columns. RAM rows hold
/// the full block-column pairs; the rows past them stand for the register
/// file of the last columns, where columns `r..r+L` mirror `0..L` for
/// blocks that wrap around. Copies are checked after every layer.
pub struct ParallelLayeredDecoder<'k, A: DecoderArithmetic> {
    arith: A,
    supports: &'k [SparseSupport],
    schedule: IdentityBlockSchedule,
    r: usize,
    w: usize,
    ram_rows: usize,
    memories: Vec<BankedMemory<A::Post>>,
    states: Vec<CompressedRowState<A::Mag>>,
    signs: Vec<bool>,
    register_reads: u64,
}

impl<'k, A: DecoderArithmetic> ParallelLayeredDecoder<'k, A> {
    pub fn new(sk: &'k PrivateKey, arith: A, l: usize) -> Result<Self> {
        let schedule = dynamic_division(sk, l)?;
        let map = BankMap::new(l, sk.params.n0, sk.params.r)?;
        let (r, w) = (sk.params.r, sk.params.w);
        let ext = vec![A::Post::default(); r + 2 * l];
        Ok(ParallelLayeredDecoder {
            memories: vec![BankedMemory::from_image(map, &ext); sk.params.n0],
            states: vec![CompressedRowState::zero(); r],
            signs: vec![false; r * sk.params.n0 * w],
            ram_rows: r / (2 * l),
            register_reads: 0,
            arith,
            supports: &sk.supports,
            schedule,
            r,
            w,
        })
    }

    pub fn schedule(&self) -> &IdentityBlockSchedule {
        &self.schedule
    }

    /// Block reads that touched a register row.
    pub fn register_reads(&self) -> u64 {
        self.register_reads
    }

    pub fn load(&mut self, x: &BitVec) -> Result<()> {
        let n = self.memories.len() * self.r;
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        let (r, l) = (self.r, self.schedule.l);
        for (k, mem) in self.memories.iter_mut().enumerate() {
            let ext: Vec<A::Post> = (0..r + 2 * l)
                .map(|c| {
                    if c < r + l {
                        self.arith.channel(x.get(k * r + c % r))
                    } else {
                        A::Post::default()
                    }
                })
                .collect();
            *mem = BankedMemory::from_image(mem.map, &ext);
        }
        self.states.fill(CompressedRowState::zero());
        self.signs.fill(false);
        Ok(())
    }

    pub fn posteriori(&self) -> Vec<A::Post> {
        self.memories
            .iter()
            .flat_map(|m| m.to_image().into_iter().take(self.r))
            .collect()
    }

    fn check_copies(&self) {
        let l = self.schedule.l;
        for mem in &self.memories {
            let image = mem.to_image();
            for j in 0..l {
                assert!(
                    image[j] == image[self.r + j],
                    "register copy of column {j} diverged"
                );
            }
        }
    }

    pub fn process_layer(&mut self, layer: usize) {
        let (r, w, l) = (self.r, self.w, self.schedule.l);
        let n0 = self.memories.len();
        let dr = n0 * w;
        let rows = self.schedule.rows_in_layer(layer);
        let starts = &self.schedule.layers[layer];
        let mut blocks: Vec<Vec<A::Post>> = Vec::with_capacity(dr);
        for (k, mem) in self.memories.iter().enumerate() {
            for &s in &starts[k] {
                let (r1, r0, _) = mem.map.map(s);
                if r1.max(r0) >= self.ram_rows {
                    self.register_reads += 1;
                }
                blocks.push(mem.gather(s));
            }
        }
        let col = |k: usize, s: usize, j: usize| (k * r + (s + j) % r) as u32;
        let mut new_states = Vec::with_capacity(rows);
        let mut outgoing = vec![A::Post::default(); dr * rows];
        let mut out_neg = vec![false; dr * rows];
        for j in 0..rows {
            let row = layer * l + j;
            let state = self.states[row];
            let mut acc = CnuAccumulator::new(self.arith.ceiling());
            for k in 0..n0 {
                for (e, &s) in starts[k].iter().enumerate() {
                    let b = k * w + e;
                    let c = col(k, s, j);
                    let (m, neg) = state.expand(c, self.signs[row * dr + b]);
                    let t = blocks[b][j] - self.arith.scaled(m, neg);
                    let (um, un) = self.arith.message(t);
                    acc.push(c, um, un);
                    outgoing[j * dr + b] = t;
                    out_neg[j * dr + b] = un;
                }
            }
            new_states.push(acc.finish());
        }
        for (j, state) in new_states.into_iter().enumerate() {
            let row = layer * l + j;
            self.states[row] = state;
            for k in 0..n0 {
                for (e, &s) in starts[k].iter().enumerate() {
                    let b = k * w + e;
                    let un = out_neg[j * dr + b];
                    self.signs[row * dr + b] = un;
                    let (m, neg) = state.expand(col(k, s, j), un);
                    let g = outgoing[j * dr + b] + self.arith.scaled(m, neg);
                    self.arith.check(g);
                    blocks[b][j] = g;
                }
            }
        }
        for k in 0..n0 {
            let mem = &mut self.memories[k];
            for (e, &s) in starts[k].iter().enumerate() {
                let b = k * w + e;
                mem.scatter(s, &blocks[b]);
                // keep both copies of every wrapped column in step
                for (j, &v) in blocks[b].iter().enumerate().take(rows) {
                    let c = s + j;
                    let twin = if c >= r {
                        c - r
                    } else if c < l {
                        c + r
                    } else {
                        continue;
                    };
                    mem.scatter(twin, &[v]);
                }
            }
        }
        self.check_copies();
    }

    pub fn iterate(&mut self) {
        for layer in 0..self.schedule.num_layers() {
            self.process_layer(layer);
        }
    }

    pub fn hard_decision(&self) -> BitVec {
        let bits: Vec<bool> = self
            .posteriori()
            .iter()
            .map(|&p| self.arith.is_negative(p))
            .collect();
        BitVec::from_bools(&bits)
    }

    pub fn decode(&mut self, x: &BitVec, max_iterations: usize) -> Result<DecodeOutcome> {
        self.load(x)?;
        let mut hard = x.clone();
        for it in 0..=max_iterations {
            if it > 0 {
                self.iterate();
                hard = self.hard_decision();
            }
            let syn = syndrome(self.supports, &hard)?;
            if syn.is_zero() {
                return Ok(DecodeOutcome {
                    success: true,
                    iterations: it,
                    codeword: Some(hard),
                    final_syndrome_weight: 0,
                });
            }
            if it == max_iterations {
                return Ok(DecodeOutcome {
                    success: false,
                    iterations: it,
                    codeword: None,
                    final_syndrome_weight: syn.weight(),
                });
            }
        }
        unreachable!()
    }
}
