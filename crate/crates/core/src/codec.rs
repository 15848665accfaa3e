//! Systematic QC-MDPC McEliece encryption and decryption.
//!
//! A plaintext of `(n0 - 1) r` bits is encoded as `[m_0, …, m_{n0-2}, p]`
//! with `p = Σ m_k · b_k`, then hidden by a weight-`t` error.

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::gf2::{poly_mul_mod, BitVec, GF2Poly};
use crate::keygen::{CodeParams, PrivateKey, PublicKey};
use crate::minsum::{decode, DecoderConfig};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plaintext(pub BitVec);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ciphertext(pub BitVec);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeFailure {
    pub iterations: usize,
    pub final_syndrome_weight: usize,
}

pub fn plaintext_len(params: &CodeParams) -> usize {
    (params.n0 - 1) * params.r
}

pub fn random_plaintext<R: Rng + ?Sized>(params: &CodeParams, rng: &mut R) -> Plaintext {
    let bits: Vec<bool> = (0..plaintext_len(params)).map(|_| rng.gen()).collect();
    Plaintext(BitVec::from_bools(&bits))
}

/// Systematic codeword of `m`.
pub fn encode(m: &BitVec, pk: &PublicKey) -> Result<BitVec> {
    let p = &pk.params;
    if m.len() != plaintext_len(p) {
        return Err(Error::DimensionMismatch {
            expected: plaintext_len(p),
            got: m.len(),
        });
    }
    let mut parity = GF2Poly::zero(p.r);
    for (k, b) in pk.b_cols.iter().enumerate() {
        let mk = GF2Poly::from_bits(m.slice(k * p.r, p.r));
        parity.add_assign(&poly_mul_mod(&mk, b)?)?;
    }
    Ok(BitVec::concat(&[m, parity.coeffs()]))
}

/// Uniform error vector of length `n` and weight exactly `t`.
pub fn sample_error<R: Rng + ?Sized>(n: usize, t: usize, rng: &mut R) -> Result<BitVec> {
    if t > n {
        return Err(Error::InvalidParams(format!(
            "error weight {t} exceeds length {n}"
        )));
    }
    BitVec::from_indices(n, index::sample(rng, n, t).into_iter())
}

pub fn encrypt_with_error(m: &Plaintext, pk: &PublicKey, e: &BitVec) -> Result<Ciphertext> {
    let mut x = encode(&m.0, pk)?;
    x.xor_assign(e)?;
    Ok(Ciphertext(x))
}

pub fn encrypt<R: Rng + ?Sized>(m: &Plaintext, pk: &PublicKey, rng: &mut R) -> Result<Ciphertext> {
    let e = sample_error(pk.params.n(), pk.params.t, rng)?;
    encrypt_with_error(m, pk, &e)
}

/// Decodes `c` and returns the systematic part. The outer error reports
/// invalid inputs; the inner one a decoding failure.
pub fn decrypt(
    c: &Ciphertext,
    sk: &PrivateKey,
    cfg: &DecoderConfig,
) -> Result<std::result::Result<Plaintext, DecodeFailure>> {
    let out = decode(&c.0, sk, cfg)?;
    Ok(match out.codeword {
        Some(x) if out.success => Ok(Plaintext(x.slice(0, plaintext_len(&sk.params)))),
        _ => Err(DecodeFailure {
            iterations: out.iterations,
            final_syndrome_weight: out.final_syndrome_weight,
        }),
    })
}
