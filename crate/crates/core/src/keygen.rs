//! Private keys constrained by a minimum circular distance, public-key
//! derivation, and Monte-Carlo estimation of the constrained key space.
//!
//! A private vector `h_k` is stored as the support of row 0 of the circulant
//! `H_k`; row `i` has its nonzeros at `(s + i) mod r`. The first column of
//! `H_k` is therefore the reflection `Σ x^{-s}`, which is the polynomial used
//! for all ring arithmetic. Circular distances are unchanged by reflection.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::{poly_inverse_mod, poly_mul_mod, GF2Poly, SparseSupport};
use crate::rng::{derive_rng, domain};
use crate::stats::{log2_binomial, wilson95, Interval};

/// Resampling cap for an invertible last block.
pub const MAX_INVERSION_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CodeParams {
    pub n0: usize,
    pub r: usize,
    pub w: usize,
    pub t: usize,
    #[serde(rename = "L")]
    pub l: usize,
}

impl CodeParams {
    pub fn new(n0: usize, r: usize, w: usize, t: usize, l: usize) -> Result<Self> {
        let p = CodeParams { n0, r, w, t, l };
        p.validate()?;
        Ok(p)
    }

    /// The (2, 4801, 45) code at the 80-bit level with `t = 84`.
    pub fn level80(l: usize) -> Self {
        CodeParams {
            n0: 2,
            r: 4801,
            w: 45,
            t: 84,
            l,
        }
    }

    pub fn n(&self) -> usize {
        self.n0 * self.r
    }

    pub fn with_t(self, t: usize) -> Self {
        CodeParams { t, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if !(2..=4).contains(&self.n0) {
            return bad(format!("n0 must be in 2..=4, got {}", self.n0));
        }
        if !is_prime(self.r) {
            return bad(format!("r must be prime, got {}", self.r));
        }
        if self.w == 0 || self.w >= self.r {
            return bad(format!("w must be in 1..r, got {}", self.w));
        }
        if self.t >= self.n() {
            return bad(format!(
                "t must be below n0·r = {}, got {}",
                self.n(),
                self.t
            ));
        }
        if self.l == 0 {
            return bad("L must be at least 1".into());
        }
        if self.w * self.l > self.r {
            return Err(Error::Infeasible {
                r: self.r,
                w: self.w,
                l: self.l,
            });
        }
        Ok(())
    }
}

fn is_prime(n: usize) -> bool {
    n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrivateKey {
    pub params: CodeParams,
    pub supports: Vec<SparseSupport>,
}

impl PrivateKey {
    /// Checks weights, dimensions, the distance constraint and invertibility
    /// of the last block.
    pub fn new(params: CodeParams, supports: Vec<SparseSupport>) -> Result<Self> {
        params.validate()?;
        if supports.len() != params.n0 {
            return Err(Error::DimensionMismatch {
                expected: params.n0,
                got: supports.len(),
            });
        }
        for (k, s) in supports.iter().enumerate() {
            if s.r() != params.r {
                return Err(Error::DimensionMismatch {
                    expected: params.r,
                    got: s.r(),
                });
            }
            if s.weight() != params.w {
                return Err(Error::InvalidParams(format!(
                    "support {k} has weight {}, expected {}",
                    s.weight(),
                    params.w
                )));
            }
            if !check_constraint(s, params.l) {
                return Err(Error::InvalidParams(format!(
                    "support {k} is not constrained by L={}",
                    params.l
                )));
            }
        }
        let key = PrivateKey { params, supports };
        if poly_inverse_mod(&key.column_poly(params.n0 - 1)).is_none() {
            return Err(Error::InvalidParams("last block is not invertible".into()));
        }
        Ok(key)
    }

    /// First-column polynomial of `H_k`.
    pub fn column_poly(&self, k: usize) -> GF2Poly {
        GF2Poly::from_support(&self.supports[k]).reflect()
    }

    pub fn public_key(&self) -> Result<PublicKey> {
        let last = self.column_poly(self.params.n0 - 1);
        let inv = poly_inverse_mod(&last)
            .ok_or_else(|| Error::InvalidParams("last block is not invertible".into()))?;
        let b_cols = (0..self.params.n0 - 1)
            .map(|k| poly_mul_mod(&inv, &self.column_poly(k)))
            .collect::<Result<Vec<_>>>()?;
        Ok(PublicKey {
            params: self.params,
            b_cols,
        })
    }

    /// Smallest `L'` such that every support is constrained by `L'`.
    pub fn constrained_by(&self) -> usize {
        self.supports
            .iter()
            .filter_map(min_circular_distance)
            .min()
            .unwrap_or(self.params.r)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey {
    pub params: CodeParams,
    /// First columns of `H_{n0-1}^{-1} H_k` for `k < n0 - 1`.
    pub b_cols: Vec<GF2Poly>,
}

/// `min{|i-j|, r-|i-j|}`.
pub fn circular_distance(i: usize, j: usize, r: usize) -> Result<usize> {
    for x in [i, j] {
        if x >= r {
            return Err(Error::IndexOutOfRange { index: x, bound: r });
        }
    }
    let d = i.abs_diff(j);
    Ok(d.min(r - d))
}

/// Minimum circular distance over all pairs, `None` below weight 2.
///
/// On a circle the closest pair is always adjacent in sorted order, so only
/// the `w` consecutive gaps (including the wrap-around one) are inspected.
pub fn min_circular_distance(s: &SparseSupport) -> Option<usize> {
    let idx = s.indices();
    if idx.len() < 2 {
        return None;
    }
    let r = s.r();
    let wrap = idx[0] + r - idx[idx.len() - 1];
    idx.windows(2)
        .map(|p| p[1] - p[0])
        .chain(std::iter::once(wrap))
        .map(|g| g.min(r - g))
        .min()
}

pub fn check_constraint(s: &SparseSupport, l: usize) -> bool {
    l <= 1 || min_circular_distance(s).map_or(true, |d| d >= l)
}

/// Uniform weight-`w` support with no constraint.
pub fn sample_uniform_support<R: Rng + ?Sized>(r: usize, w: usize, rng: &mut R) -> SparseSupport {
    let mut idx = index::sample(rng, r, w).into_vec();
    idx.sort_unstable();
    SparseSupport::from_sorted_unchecked(r, idx)
}

fn check_feasible(r: usize, w: usize, l: usize) -> Result<()> {
    if w > r || w.saturating_mul(l.max(1)) > r {
        return Err(Error::Infeasible { r, w, l });
    }
    Ok(())
}

/// Rejection sampling: exactly uniform over constrained supports.
pub fn sample_constrained_rejection<R: Rng + ?Sized>(
    r: usize,
    w: usize,
    l: usize,
    max_attempts: usize,
    rng: &mut R,
) -> Result<SparseSupport> {
    check_feasible(r, w, l)?;
    for _ in 0..max_attempts {
        let s = sample_uniform_support(r, w, rng);
        if check_constraint(&s, l) {
            return Ok(s);
        }
    }
    Err(Error::RetriesExhausted {
        attempts: max_attempts,
        what: "constrained support by rejection",
    })
}

/// Constructive sampler: a uniform rotation offset followed by a uniform
/// composition of `r` into `w` circular gaps, each at least `l`.
///
/// Every support with a trivial rotational stabiliser has exactly `w`
/// preimages, so the output is uniform over constrained supports whenever
/// `gcd(r, w) = 1` (in particular for prime `r`). Otherwise supports with a
/// rotational symmetry are under-weighted.
pub fn sample_constrained_gaps<R: Rng + ?Sized>(
    r: usize,
    w: usize,
    l: usize,
    rng: &mut R,
) -> Result<SparseSupport> {
    check_feasible(r, w, l)?;
    if w == 0 {
        return Ok(SparseSupport::from_sorted_unchecked(r, vec![]));
    }
    let l = l.max(1);
    let offset = rng.gen_range(0..r);
    let slack = r - w * l;
    // stars and bars: w-1 bars among slack + w - 1 slots
    let mut bars = index::sample(rng, slack + w - 1, w - 1).into_vec();
    bars.sort_unstable();
    let mut idx = Vec::with_capacity(w);
    let mut pos = offset;
    let mut prev_bar: isize = -1;
    idx.push(pos);
    for &b in &bars {
        let extra = (b as isize - prev_bar - 1) as usize;
        prev_bar = b as isize;
        pos = (pos + l + extra) % r;
        idx.push(pos);
    }
    idx.sort_unstable();
    Ok(SparseSupport::from_sorted_unchecked(r, idx))
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Uniform constrained support. Uses the constructive sampler when it is
/// exactly uniform (`gcd(r, w) = 1`) and rejection otherwise.
pub fn sample_constrained_support<R: Rng + ?Sized>(
    r: usize,
    w: usize,
    l: usize,
    rng: &mut R,
) -> Result<SparseSupport> {
    if gcd(r, w) == 1 || l <= 1 {
        sample_constrained_gaps(r, w, l, rng)
    } else {
        sample_constrained_rejection(r, w, l, 100_000_000, rng)
    }
}

/// Draws `n0` constrained supports, resampling the last one until its block
/// is invertible, and derives the public key.
pub fn generate_keypair<R: Rng + ?Sized>(
    params: &CodeParams,
    rng: &mut R,
) -> Result<(PrivateKey, PublicKey)> {
    params.validate()?;
    let CodeParams { n0, r, w, l, .. } = *params;
    let mut supports = Vec::with_capacity(n0);
    for _ in 0..n0 - 1 {
        supports.push(sample_constrained_support(r, w, l, rng)?);
    }
    for _ in 0..MAX_INVERSION_ATTEMPTS {
        let last = sample_constrained_support(r, w, l, rng)?;
        let col = GF2Poly::from_support(&last).reflect();
        let Some(inv) = poly_inverse_mod(&col) else {
            continue;
        };
        supports.push(last);
        let sk = PrivateKey {
            params: *params,
            supports,
        };
        let b_cols = (0..n0 - 1)
            .map(|k| poly_mul_mod(&inv, &sk.column_poly(k)))
            .collect::<Result<Vec<_>>>()?;
        let pk = PublicKey {
            params: *params,
            b_cols,
        };
        return Ok((sk, pk));
    }
    Err(Error::RetriesExhausted {
        attempts: MAX_INVERSION_ATTEMPTS,
        what: "invertible last block",
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyspaceEstimate {
    #[serde(rename = "L")]
    pub l: usize,
    pub samples: u64,
    pub passing: u64,
    pub fraction: f64,
    pub wilson95: Interval,
    /// `log2((fraction · C(r, w))^n0)`; absent when no sample passed.
    pub log2_keys: Option<f64>,
}

impl KeyspaceEstimate {
    fn new(l: usize, samples: u64, passing: u64, n0: usize, r: usize, w: usize) -> Self {
        let fraction = passing as f64 / samples as f64;
        let log2_keys = (passing > 0)
            .then(|| n0 as f64 * (fraction.log2() + log2_binomial(r as u64, w as u64)));
        KeyspaceEstimate {
            l,
            samples,
            passing,
            fraction,
            wilson95: wilson95(passing, samples),
            log2_keys,
        }
    }
}

/// Fraction of uniform weight-`w` supports constrained by `l`, from a single
/// stream. Reports `log2` key counts for `n0 = 2`.
pub fn estimate_keyspace_fraction<R: Rng + ?Sized>(
    r: usize,
    w: usize,
    l: usize,
    num_samples: u64,
    rng: &mut R,
) -> KeyspaceEstimate {
    assert!(num_samples >= 1);
    let passing = (0..num_samples)
        .filter(|_| check_constraint(&sample_uniform_support(r, w, rng), l))
        .count() as u64;
    KeyspaceEstimate::new(l, num_samples, passing, 2, r, w)
}

const KEYSPACE_CHUNK: u64 = 1 << 14;

/// Estimates the constrained fraction for every `l` in `ls` on one shared
/// sample set, so the estimates are monotone in `l` by construction.
///
/// Samples are drawn in fixed-size chunks, each from its own stream derived
/// from `(master_seed, chunk)`, and merged by summation.
pub fn estimate_keyspace(
    n0: usize,
    r: usize,
    w: usize,
    ls: &[usize],
    num_samples: u64,
    master_seed: u64,
) -> Vec<KeyspaceEstimate> {
    assert!(num_samples >= 1);
    let chunks = num_samples.div_ceil(KEYSPACE_CHUNK);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = derive_rng(master_seed, domain::KEYSPACE, c);
            let n = KEYSPACE_CHUNK.min(num_samples - c * KEYSPACE_CHUNK);
            let mut counts = vec![0u64; ls.len()];
            for _ in 0..n {
                let d = min_circular_distance(&sample_uniform_support(r, w, &mut rng))
                    .unwrap_or(usize::MAX);
                for (cnt, &l) in counts.iter_mut().zip(ls) {
                    if l <= 1 || d >= l {
                        *cnt += 1;
                    }
                }
            }
            counts
        })
        .reduce(
            || vec![0u64; ls.len()],
            |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect(),
        );
    ls.iter()
        .zip(counts)
        .map(|(&l, passing)| KeyspaceEstimate::new(l, num_samples, passing, n0, r, w))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use proptest::prelude::*;
    use std::collections::HashMap;

    fn sup(r: usize, idx: &[usize]) -> SparseSupport {
        SparseSupport::new(r, idx.to_vec()).unwrap()
    }

    fn brute_min_distance(s: &SparseSupport) -> Option<usize> {
        let idx = s.indices();
        let mut best = None;
        for a in 0..idx.len() {
            for b in a + 1..idx.len() {
                let d = circular_distance(idx[a], idx[b], s.r()).unwrap();
                best = Some(best.map_or(d, |x: usize| x.min(d)));
            }
        }
        best
    }

    /// All weight-`w` subsets of `0..r`.
    fn enumerate(r: usize, w: usize) -> Vec<Vec<usize>> {
        fn rec(r: usize, w: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == w {
                out.push(cur.clone());
                return;
            }
            for i in start..r {
                cur.push(i);
                rec(r, w, i + 1, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(r, w, 0, &mut Vec::new(), &mut out);
        out
    }

    #[test]
    fn circular_distance_examples() {
        assert_eq!(circular_distance(5, 5, 17).unwrap(), 0);
        assert_eq!(circular_distance(0, 12, 17).unwrap(), 5);
        assert_eq!(circular_distance(0, 7, 17).unwrap(), 7);
        assert!(circular_distance(0, 17, 17).is_err());
    }

    #[test]
    fn constraint_examples() {
        assert!(check_constraint(&sup(17, &[0, 7, 12]), 4));
        assert!(!check_constraint(&sup(17, &[0, 1, 5]), 4));
        assert!(check_constraint(&sup(17, &[9]), 17));
        assert!(check_constraint(&sup(17, &[0, 1]), 1));
    }

    #[test]
    fn infeasible_sampler_errors() {
        let mut rng = derive_rng(1, 0, 0);
        assert!(matches!(
            sample_constrained_support(17, 4, 5, &mut rng),
            Err(Error::Infeasible { .. })
        ));
        assert!(sample_constrained_rejection(17, 4, 5, 10, &mut rng).is_err());
    }

    #[test]
    fn samplers_satisfy_constraint() {
        let mut rng = derive_rng(2, 0, 0);
        for _ in 0..200 {
            let s = sample_constrained_support(17, 3, 4, &mut rng).unwrap();
            assert_eq!(s.weight(), 3);
            assert!(check_constraint(&s, 4));
            let s = sample_constrained_rejection(17, 3, 4, 1000, &mut rng).unwrap();
            assert!(check_constraint(&s, 4));
        }
        for _ in 0..20 {
            let s = sample_constrained_support(4801, 45, 32, &mut rng).unwrap();
            assert_eq!(s.weight(), 45);
            assert!(check_constraint(&s, 32));
        }
        // tight packing: every gap is exactly L
        let s = sample_constrained_support(20, 5, 4, &mut rng).unwrap();
        assert_eq!(min_circular_distance(&s), Some(4));
    }

    #[test]
    fn rejection_acceptance_matches_enumeration() {
        // exact fraction of constrained supports at toy size vs. the
        // acceptance rate of the rejection step
        for (r, w, l) in [(23, 3, 3), (25, 3, 4), (19, 2, 5)] {
            let all = enumerate(r, w);
            let good = all
                .iter()
                .filter(|s| check_constraint(&sup(r, s), l))
                .count();
            let exact = good as f64 / all.len() as f64;
            let mut rng = derive_rng(3, r as u64, l as u64);
            let est = estimate_keyspace_fraction(r, w, l, 40_000, &mut rng);
            assert!(
                est.wilson95.lo <= exact + 0.005 && exact - 0.005 <= est.wilson95.hi,
                "r={r} w={w} l={l} exact={exact} est={est:?}"
            );
        }
    }

    #[test]
    fn constructive_sampler_is_uniform_for_prime_r() {
        // chi-square over the enumerated constrained set
        let (r, w, l) = (17, 3, 4);
        let good: Vec<Vec<usize>> = enumerate(r, w)
            .into_iter()
            .filter(|s| check_constraint(&sup(r, s), l))
            .collect();
        let k = good.len();
        let draws = 200 * k;
        let mut rng = derive_rng(4, 0, 0);
        let mut hist: HashMap<Vec<usize>, usize> = HashMap::new();
        for _ in 0..draws {
            let s = sample_constrained_gaps(r, w, l, &mut rng).unwrap();
            *hist.entry(s.indices().to_vec()).or_default() += 1;
        }
        assert_eq!(hist.len(), k);
        let expected = draws as f64 / k as f64;
        let chi2: f64 = hist
            .values()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // k - 1 degrees of freedom; mean k-1, sd sqrt(2(k-1))
        let dof = (k - 1) as f64;
        assert!(
            chi2 < dof + 5.0 * (2.0 * dof).sqrt(),
            "chi2={chi2} dof={dof}"
        );
    }

    #[test]
    fn keyspace_vacuous_at_l1() {
        let mut rng = derive_rng(5, 0, 0);
        let est = estimate_keyspace_fraction(4801, 45, 1, 1000, &mut rng);
        assert_eq!(est.fraction, 1.0);
    }

    #[test]
    fn keyspace_shared_samples_monotone() {
        let est = estimate_keyspace(2, 4801, 45, &[1, 2, 4, 8, 16], 20_000, 9);
        assert_eq!(est[0].fraction, 1.0);
        for pair in est.windows(2) {
            assert!(pair[0].passing >= pair[1].passing);
        }
        let again = estimate_keyspace(2, 4801, 45, &[1, 2, 4, 8, 16], 20_000, 9);
        assert_eq!(est, again);
    }

    /// Supports of `Z_r` with all circular gaps at least `l` number
    /// `r / (r - w(l-1)) · C(r - w(l-1), w)`.
    fn exact_fraction(r: u64, w: u64, l: u64) -> f64 {
        let m = r - w * (l - 1);
        ((r as f64 / m as f64).log2() + log2_binomial(m, w) - log2_binomial(r, w)).exp2()
    }

    #[test]
    fn keyspace_matches_gap_count() {
        assert_eq!(exact_fraction(17, 3, 1), 1.0);
        // brute force at toy size
        let all = (0..17usize)
            .flat_map(|a| (a + 1..17).flat_map(move |b| (b + 1..17).map(move |c| vec![a, b, c])));
        let hits = all
            .filter(|v| check_constraint(&SparseSupport::new(17, v.clone()).unwrap(), 4))
            .count();
        assert!((hits as f64 / 680.0 - exact_fraction(17, 3, 4)).abs() < 1e-12);

        let est = estimate_keyspace(2, 4801, 45, &[2, 4, 8], 200_000, 3);
        for e in &est {
            let exact = exact_fraction(4801, 45, e.l as u64);
            let ci = crate::stats::wilson_interval(e.passing, e.samples, 3.29);
            assert!(
                ci.contains(exact),
                "L={} estimate {} exact {exact}",
                e.l,
                e.fraction
            );
        }
    }

    #[test]
    fn keypair_is_deterministic_and_consistent() {
        let params = CodeParams::new(2, 17, 3, 2, 4).unwrap();
        let (sk, pk) = generate_keypair(&params, &mut derive_rng(11, 0, 0)).unwrap();
        let (sk2, pk2) = generate_keypair(&params, &mut derive_rng(11, 0, 0)).unwrap();
        assert_eq!(sk, sk2);
        assert_eq!(pk, pk2);
        assert_eq!(sk.public_key().unwrap(), pk);
        assert!(sk.supports.iter().all(|s| check_constraint(s, 4)));
        assert!(sk.constrained_by() >= 4);
        assert_eq!(PrivateKey::new(params, sk.supports.clone()).unwrap(), sk);
    }

    #[test]
    fn params_validation() {
        assert!(CodeParams::new(2, 4801, 45, 84, 32).is_ok());
        assert!(CodeParams::new(2, 4800, 45, 84, 2).is_err());
        assert!(CodeParams::new(5, 17, 3, 2, 1).is_err());
        assert!(matches!(
            CodeParams::new(2, 17, 4, 2, 5),
            Err(Error::Infeasible { .. })
        ));
    }

    proptest! {
        #[test]
        fn fast_min_distance_matches_pairs(idx in proptest::collection::btree_set(0usize..97, 0..12)) {
            let s = sup(97, &idx.into_iter().collect::<Vec<_>>());
            prop_assert_eq!(min_circular_distance(&s), brute_min_distance(&s));
        }

        #[test]
        fn constraint_is_rotation_invariant(
            idx in proptest::collection::btree_set(0usize..61, 2..8),
            k in 0i64..61,
            l in 1usize..10,
        ) {
            let s = sup(61, &idx.into_iter().collect::<Vec<_>>());
            let shifted = crate::gf2::cyclic_shift(&s, k);
            prop_assert_eq!(check_constraint(&s, l), check_constraint(&shifted, l));
        }

        #[test]
        fn sampled_supports_pass(seed in any::<u64>(), l in 1usize..6) {
            let mut rng = derive_rng(seed, 0, 0);
            let s = sample_constrained_support(101, 7, l, &mut rng).unwrap();
            prop_assert!(check_constraint(&s, l));
            prop_assert_eq!(s.weight(), 7);
        }
    }
}
