//! Arithmetic in GF(2)\[x\]/(x^r + 1).
//!
//! An r×r binary circulant is identified with the polynomial of its first
//! column, so circulant products are polynomial products modulo `x^r + 1`.
//! Bit vectors are packed into `u64` words least-significant-bit first:
//! position `j` lives at bit `j % 64` of word `j / 64`.

use std::fmt;
use std::ops::BitXor;

use crate::error::{Error, Result};

const WORD: usize = 64;

#[inline]
fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD)
}

#[inline]
fn mask_tail(words: &mut [u64], bits: usize) {
    let n = words_for(bits);
    for w in words.iter_mut().skip(n) {
        *w = 0;
    }
    if bits % WORD != 0 && n > 0 {
        words[n - 1] &= (1u64 << (bits % WORD)) - 1;
    }
}

/// `dst ^= src << shift`, discarding bits shifted past the end of `dst`.
fn xor_shl(dst: &mut [u64], src: &[u64], shift: usize) {
    let ws = shift / WORD;
    let bs = shift % WORD;
    if ws >= dst.len() {
        return;
    }
    let span = (dst.len() - ws).min(src.len() + 1);
    if bs == 0 {
        for i in 0..span.min(src.len()) {
            dst[i + ws] ^= src[i];
        }
    } else {
        for i in 0..span {
            let lo = if i < src.len() { src[i] << bs } else { 0 };
            let hi = if i > 0 && i - 1 < src.len() {
                src[i - 1] >> (WORD - bs)
            } else {
                0
            };
            dst[i + ws] ^= lo | hi;
        }
    }
}

/// `dst ^= src >> shift`.
fn xor_shr(dst: &mut [u64], src: &[u64], shift: usize) {
    let ws = shift / WORD;
    let bs = shift % WORD;
    for (i, d) in dst.iter_mut().enumerate() {
        let j = i + ws;
        if j >= src.len() {
            break;
        }
        let mut v = src[j] >> bs;
        if bs != 0 && j + 1 < src.len() {
            v |= src[j + 1] << (WORD - bs);
        }
        *d ^= v;
    }
}

/// Fixed-length packed bit vector.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitVec {
    len: usize,
    words: Vec<u64>,
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        BitVec {
            len,
            words: vec![0; words_for(len)],
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut v = BitVec {
            len,
            words: vec![u64::MAX; words_for(len)],
        };
        mask_tail(&mut v.words, len);
        v
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = BitVec::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                v.set(i, true);
            }
        }
        v
    }

    /// Builds a vector of length `len` with the given positions set.
    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut v = BitVec::zeros(len);
        for i in indices {
            if i >= len {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    bound: len,
                });
            }
            v.set(i, true);
        }
        Ok(v)
    }

    pub(crate) fn from_words(len: usize, mut words: Vec<u64>) -> Self {
        words.resize(words_for(len), 0);
        mask_tail(&mut words, len);
        BitVec { len, words }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i / WORD] >> (i % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        debug_assert!(i < self.len);
        let m = 1u64 << (i % WORD);
        if value {
            self.words[i / WORD] |= m;
        } else {
            self.words[i / WORD] &= !m;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i / WORD] ^= 1u64 << (i % WORD);
    }

    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Positions of set bits, ascending.
    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let b = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(wi * WORD + b)
                }
            })
        })
    }

    pub fn xor_assign(&mut self, other: &BitVec) -> Result<()> {
        if self.len != other.len {
            return Err(Error::DimensionMismatch {
                expected: self.len,
                got: other.len,
            });
        }
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
        Ok(())
    }

    pub fn hamming_distance(&self, other: &BitVec) -> usize {
        assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    /// Copies bits `[start, start + len)` into a new vector.
    pub fn slice(&self, start: usize, len: usize) -> BitVec {
        assert!(start + len <= self.len);
        let mut out = vec![0u64; words_for(len)];
        xor_shr(&mut out, &self.words, start);
        BitVec::from_words(len, out)
    }

    /// Concatenates `parts` in order.
    pub fn concat(parts: &[&BitVec]) -> BitVec {
        let len = parts.iter().map(|p| p.len).sum();
        let mut out = vec![0u64; words_for(len)];
        let mut at = 0;
        for p in parts {
            xor_shl(&mut out, &p.words, at);
            at += p.len;
        }
        BitVec::from_words(len, out)
    }

    /// Lowercase hex of the LSB-first byte packing (`ceil(len/8)` bytes).
    pub fn to_hex(&self) -> String {
        let nbytes = self.len.div_ceil(8);
        let mut s = String::with_capacity(2 * nbytes);
        for k in 0..nbytes {
            let byte = (self.words[k / 8] >> (8 * (k % 8))) as u8;
            s.push_str(&format!("{byte:02x}"));
        }
        s
    }

    pub fn from_hex(len: usize, hex: &str) -> Result<Self> {
        let hex = hex.trim();
        if !hex.is_ascii() {
            return Err(Error::parse("hex", "non-ASCII characters"));
        }
        let nbytes = len.div_ceil(8);
        if hex.len() != 2 * nbytes {
            return Err(Error::parse(
                "hex",
                format!(
                    "expected {} hex digits for {len} bits, got {}",
                    2 * nbytes,
                    hex.len()
                ),
            ));
        }
        let mut words = vec![0u64; words_for(len)];
        for k in 0..nbytes {
            let byte = u8::from_str_radix(&hex[2 * k..2 * k + 2], 16)
                .map_err(|e| Error::parse("hex", format!("byte {k}: {e}")))?;
            words[k / 8] |= (byte as u64) << (8 * (k % 8));
        }
        let v = BitVec::from_words(len, words.clone());
        if v.words != words {
            return Err(Error::parse(
                "hex",
                "nonzero padding bits past the declared length",
            ));
        }
        Ok(v)
    }
}

impl fmt::Debug for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVec[{}; ", self.len)?;
        for i in 0..self.len.min(128) {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        if self.len > 128 {
            f.write_str("…")?;
        }
        f.write_str("]")
    }
}

impl BitXor for &BitVec {
    type Output = BitVec;

    fn bitxor(self, rhs: &BitVec) -> BitVec {
        let mut out = self.clone();
        out.xor_assign(rhs).expect("length mismatch in xor");
        out
    }
}

/// Element of GF(2)\[x\]/(x^r + 1); coefficient of `x^j` at bit `j`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct GF2Poly {
    r: usize,
    coeffs: BitVec,
}

impl GF2Poly {
    pub fn zero(r: usize) -> Self {
        GF2Poly {
            r,
            coeffs: BitVec::zeros(r),
        }
    }

    pub fn one(r: usize) -> Self {
        let mut p = GF2Poly::zero(r);
        p.coeffs.set(0, true);
        p
    }

    pub fn from_bits(coeffs: BitVec) -> Self {
        GF2Poly {
            r: coeffs.len(),
            coeffs,
        }
    }

    pub fn from_support(s: &SparseSupport) -> Self {
        let mut p = GF2Poly::zero(s.r);
        for &i in &s.indices {
            p.coeffs.set(i, true);
        }
        p
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn coeffs(&self) -> &BitVec {
        &self.coeffs
    }

    pub fn into_bits(self) -> BitVec {
        self.coeffs
    }

    pub fn weight(&self) -> usize {
        self.coeffs.weight()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.coeffs.get(0) && self.weight() == 1
    }

    pub fn support(&self) -> SparseSupport {
        SparseSupport {
            r: self.r,
            indices: self.coeffs.iter_ones().collect(),
        }
    }

    /// Multiplication by `x^k`: a cyclic rotation of the coefficients.
    pub fn mul_xpow(&self, k: usize) -> GF2Poly {
        let r = self.r;
        let k = k % r;
        if k == 0 {
            return self.clone();
        }
        let src = self.coeffs.words();
        let mut out = vec![0u64; src.len()];
        xor_shl(&mut out, src, k);
        mask_tail(&mut out, r);
        xor_shr(&mut out, src, r - k);
        GF2Poly::from_bits(BitVec::from_words(r, out))
    }

    pub fn add(&self, other: &GF2Poly) -> Result<GF2Poly> {
        let mut out = self.clone();
        out.add_assign(other)?;
        Ok(out)
    }

    pub fn add_assign(&mut self, other: &GF2Poly) -> Result<()> {
        self.coeffs.xor_assign(&other.coeffs)
    }

    pub fn mul(&self, other: &GF2Poly) -> Result<GF2Poly> {
        poly_mul_mod(self, other)
    }

    pub fn inverse(&self) -> Option<GF2Poly> {
        poly_inverse_mod(self)
    }

    /// The image under `x -> x^{-1}`: coefficient `j` moves to `(r - j) mod r`.
    pub fn reflect(&self) -> GF2Poly {
        let mut out = GF2Poly::zero(self.r);
        for j in self.coeffs.iter_ones() {
            out.coeffs.set((self.r - j) % self.r, true);
        }
        out
    }
}

/// Product `a·b mod (x^r + 1)`.
pub fn poly_mul_mod(a: &GF2Poly, b: &GF2Poly) -> Result<GF2Poly> {
    if a.r != b.r {
        return Err(Error::DimensionMismatch {
            expected: a.r,
            got: b.r,
        });
    }
    let r = a.r;
    let n = words_for(r);
    let (aw, bw) = (a.coeffs.words(), b.coeffs.words());

    // Comb method: for every bit offset k within a word, XOR (b << k) at the
    // word offset of each word of `a` having bit k set.
    let mut prod = vec![0u64; 2 * n + 1];
    let mut shifted = vec![0u64; n + 1];
    for k in 0..WORD {
        shifted.iter_mut().for_each(|w| *w = 0);
        xor_shl(&mut shifted, bw, k);
        for (i, &word) in aw.iter().enumerate() {
            if (word >> k) & 1 == 1 {
                for (d, s) in prod[i..i + n + 1].iter_mut().zip(&shifted) {
                    *d ^= s;
                }
            }
        }
    }

    let mut low = prod[..n].to_vec();
    mask_tail(&mut low, r);
    xor_shr(&mut low, &prod, r);
    Ok(GF2Poly::from_bits(BitVec::from_words(r, low)))
}

fn degree(words: &[u64], hint: usize) -> Option<usize> {
    let top = (hint / WORD).min(words.len() - 1);
    for wi in (0..=top).rev() {
        if words[wi] != 0 {
            return Some(wi * WORD + (WORD - 1 - words[wi].leading_zeros() as usize));
        }
    }
    None
}

/// Inverse modulo `x^r + 1` by the extended Euclidean algorithm, or `None`
/// when `gcd(a, x^r + 1) != 1`.
pub fn poly_inverse_mod(a: &GF2Poly) -> Option<GF2Poly> {
    let r = a.r;
    let n = words_for(r + 1) + 1;

    // Invariants: u ≡ g1·a and v ≡ g2·a (mod x^r + 1).
    let mut u = a.coeffs.words().to_vec();
    u.resize(n, 0);
    let mut v = vec![0u64; n];
    v[0] = 1;
    v[r / WORD] |= 1u64 << (r % WORD);
    let mut g1 = vec![0u64; n];
    g1[0] = 1;
    let mut g2 = vec![0u64; n];

    let mut du = degree(&u, r)?;
    let mut dv = r;
    while du > 0 {
        if du < dv {
            std::mem::swap(&mut u, &mut v);
            std::mem::swap(&mut g1, &mut g2);
            std::mem::swap(&mut du, &mut dv);
        }
        let j = du - dv;
        xor_shl(&mut u, &v, j);
        xor_shl(&mut g1, &g2, j);
        du = degree(&u, du)?;
    }

    // Fold g1 back below degree r.
    let mut low = g1[..words_for(r)].to_vec();
    mask_tail(&mut low, r);
    xor_shr(&mut low, &g1, r);
    mask_tail(&mut low, r);
    Some(GF2Poly::from_bits(BitVec::from_words(r, low)))
}

/// Sorted set of nonzero positions of an r-bit vector.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct SparseSupport {
    r: usize,
    indices: Vec<usize>,
}

impl SparseSupport {
    /// Validates that `indices` are strictly increasing and below `r`.
    pub fn new(r: usize, indices: Vec<usize>) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidParams(
                "ring dimension must be positive".into(),
            ));
        }
        for (k, &i) in indices.iter().enumerate() {
            if i >= r {
                return Err(Error::IndexOutOfRange { index: i, bound: r });
            }
            if k > 0 && indices[k - 1] >= i {
                return Err(Error::InvalidParams(format!(
                    "support indices must be strictly increasing (position {k})"
                )));
            }
        }
        Ok(SparseSupport { r, indices })
    }

    /// Sorts first; duplicates are still rejected.
    pub fn from_unsorted(r: usize, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        SparseSupport::new(r, indices)
    }

    pub(crate) fn from_sorted_unchecked(r: usize, indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(indices.last().map_or(true, |&i| i < r));
        SparseSupport { r, indices }
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn weight(&self) -> usize {
        self.indices.len()
    }

    pub fn to_dense(&self) -> BitVec {
        BitVec::from_indices(self.r, self.indices.iter().copied()).expect("validated support")
    }

    pub fn from_dense(v: &BitVec) -> Self {
        SparseSupport {
            r: v.len(),
            indices: v.iter_ones().collect(),
        }
    }
}

/// Maps every index `i` to `(i + k) mod r`.
pub fn cyclic_shift(s: &SparseSupport, k: i64) -> SparseSupport {
    let r = s.r as i64;
    let k = k.rem_euclid(r);
    let mut indices: Vec<usize> = s
        .indices
        .iter()
        .map(|&i| ((i as i64 + k) % r) as usize)
        .collect();
    indices.sort_unstable();
    SparseSupport::from_sorted_unchecked(s.r, indices)
}

/// Syndrome `x·H^T` for `H = [H_0 | … | H_{n0-1}]`, where row `i` of `H_k`
/// has its nonzeros at columns `(i + s) mod r` for `s` in `h_supports[k]`.
///
/// Bit `i` of the result is the parity of `x` over the nonzero columns of row
/// `i`; equivalently `s(x) = Σ_k x_k(x)·x^{-s}` summed over each support.
pub fn syndrome(h_supports: &[SparseSupport], x: &BitVec) -> Result<BitVec> {
    let Some(first) = h_supports.first() else {
        return Err(Error::InvalidParams("no parity-check blocks".into()));
    };
    let r = first.r;
    if let Some(bad) = h_supports.iter().find(|s| s.r != r) {
        return Err(Error::DimensionMismatch {
            expected: r,
            got: bad.r,
        });
    }
    let n = h_supports.len() * r;
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }

    let nw = words_for(r);
    let mut acc = vec![0u64; nw];
    let mut scratch = vec![0u64; nw];
    for (k, support) in h_supports.iter().enumerate() {
        let block = x.slice(k * r, r);
        if block.is_zero() {
            continue;
        }
        let src = block.words();
        for &s in support.indices() {
            // rotate right by s == rotate left by r - s
            let left = (r - s) % r;
            if left == 0 {
                for (a, b) in acc.iter_mut().zip(src) {
                    *a ^= b;
                }
                continue;
            }
            scratch.iter_mut().for_each(|w| *w = 0);
            xor_shl(&mut scratch, src, left);
            mask_tail(&mut scratch, r);
            xor_shr(&mut scratch, src, r - left);
            for (a, b) in acc.iter_mut().zip(&scratch) {
                *a ^= b;
            }
        }
    }
    Ok(BitVec::from_words(r, acc))
}
