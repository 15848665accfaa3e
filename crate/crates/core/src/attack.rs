//! Distance spectra and the crafted-error experiment of a reaction attack
//! against QC-MDPC keys, plus the trial-count savings from constrained keys.

use std::collections::{BTreeMap, HashSet};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{decrypt, encrypt_with_error, random_plaintext};
use crate::error::{Error, Result};
use crate::gf2::{BitVec, SparseSupport};
use crate::keygen::{circular_distance, CodeParams, PrivateKey};
use crate::minsum::DecoderConfig;
use crate::rng::{derive_rng, domain};

/// Retry cap for placing one pair without overlap.
pub const MAX_PLACEMENT_RETRIES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistanceSpectrum {
    pub r: usize,
    /// Multiplicity of each circular distance in `1..=r/2`.
    pub counts: BTreeMap<usize, u64>,
}

impl DistanceSpectrum {
    pub fn contains(&self, d: usize) -> bool {
        self.counts.contains_key(&d)
    }

    pub fn multiplicity(&self, d: usize) -> u64 {
        self.counts.get(&d).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn min_distance(&self) -> Option<usize> {
        self.counts.keys().next().copied()
    }
}

pub fn distance_spectrum(s: &SparseSupport) -> DistanceSpectrum {
    let r = s.r();
    let idx = s.indices();
    let mut counts = BTreeMap::new();
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            let d = circular_distance(i, j, r).expect("indices below r");
            *counts.entry(d).or_insert(0) += 1;
        }
    }
    DistanceSpectrum { r, counts }
}

/// Error of weight `t` made of `t/2` disjoint pairs at circular distance `d`
/// inside the first block, plus one random extra position when `t` is odd.
pub fn crafted_error<R: Rng + ?Sized>(
    d: usize,
    params: &CodeParams,
    rng: &mut R,
) -> Result<BitVec> {
    let (r, t) = (params.r, params.t);
    if d == 0 || d > r / 2 {
        return Err(Error::InvalidParams(format!(
            "distance must be in 1..={}, got {d}",
            r / 2
        )));
    }
    if t > r {
        return Err(Error::InvalidParams(format!(
            "{t} errors do not fit in the first block of {r}"
        )));
    }
    let mut used = HashSet::with_capacity(t);
    for _ in 0..t / 2 {
        let placed = (0..MAX_PLACEMENT_RETRIES).any(|_| {
            let p = rng.gen_range(0..r);
            let q = (p + d) % r;
            if used.contains(&p) || used.contains(&q) {
                return false;
            }
            used.insert(p);
            used.insert(q);
            true
        });
        if !placed {
            return Err(Error::RetriesExhausted {
                attempts: MAX_PLACEMENT_RETRIES,
                what: "disjoint error pair",
            });
        }
    }
    if t % 2 == 1 {
        let placed = (0..MAX_PLACEMENT_RETRIES).any(|_| used.insert(rng.gen_range(0..r)));
        if !placed {
            return Err(Error::RetriesExhausted {
                attempts: MAX_PLACEMENT_RETRIES,
                what: "extra error position",
            });
        }
    }
    BitVec::from_indices(params.n(), used)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GjsTrialCounts {
    pub baseline: u64,
    pub constrained: u64,
    /// `L / floor(r/2)` as numerator and denominator.
    pub reduction_num: u64,
    pub reduction_den: u64,
    pub reduction_fraction: f64,
}

/// Decoding trials needed to scan every candidate distance with `m` trials
/// each, without and with the knowledge that `d < L` cannot occur.
pub fn gjs_trial_counts(r: usize, l: usize, m: u64) -> Result<GjsTrialCounts> {
    let half = (r / 2) as u64;
    let l = l as u64;
    if l >= half {
        return Err(Error::InvalidParams(format!(
            "L must be below floor(r/2) = {half}"
        )));
    }
    Ok(GjsTrialCounts {
        baseline: half * m,
        constrained: (half - l) * m,
        reduction_num: l,
        reduction_den: half,
        reduction_fraction: l as f64 / half as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistanceFer {
    pub d: usize,
    pub failures: u64,
    pub trials: u64,
}

/// Decodes `trials_per_d` crafted ciphertexts for every `d` under one key.
/// Trial `i` at distance `d` draws from its own stream, so results do not
/// depend on scheduling.
pub fn fer_vs_distance(
    sk: &PrivateKey,
    cfg: &DecoderConfig,
    distances: &[usize],
    trials_per_d: u64,
    seed: u64,
) -> Result<Vec<DistanceFer>> {
    if trials_per_d == 0 {
        return Err(Error::InvalidParams("trials_per_d must be positive".into()));
    }
    cfg.validate(sk)?;
    let pk = sk.public_key()?;
    let params = sk.params;
    distances
        .iter()
        .map(|&d| {
            let failures = (0..trials_per_d)
                .into_par_iter()
                .map(|i| -> Result<u64> {
                    let mut rng = derive_rng(seed, domain::GJS, ((d as u64) << 32) | i);
                    let m = random_plaintext(&params, &mut rng);
                    let e = crafted_error(d, &params, &mut rng)?;
                    let c = encrypt_with_error(&m, &pk, &e)?;
                    Ok(match decrypt(&c, sk, cfg)? {
                        Ok(p) if p == m => 0,
                        _ => 1,
                    })
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .sum();
            Ok(DistanceFer {
                d,
                failures,
                trials: trials_per_d,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf2::cyclic_shift;
    use crate::keygen::{generate_keypair, sample_constrained_support};
    use crate::minsum::{Arithmetic, FixedPointSpec, ScalarCSD};
    use crate::stats::two_proportion_z;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn spectrum_examples() {
        let s = SparseSupport::new(17, vec![0, 7, 12]).unwrap();
        let sp = distance_spectrum(&s);
        assert_eq!(sp.counts, BTreeMap::from([(5, 2), (7, 1)]));
        assert!(distance_spectrum(&SparseSupport::new(17, vec![4]).unwrap())
            .counts
            .is_empty());
    }

    #[test]
    fn constrained_keys_have_no_short_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let s = sample_constrained_support(4801, 45, 32, &mut rng).unwrap();
            let sp = distance_spectrum(&s);
            assert!(sp.min_distance().unwrap() >= 32);
            assert_eq!(sp.total(), 45 * 44 / 2);
        }
    }

    #[test]
    fn crafted_error_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let params = CodeParams::level80(2);
        let e = crafted_error(40, &params, &mut rng).unwrap();
        assert_eq!(e.weight(), 84);
        assert!(e.iter_ones().all(|i| i < 4801));
        let first = SparseSupport::from_dense(&e.slice(0, 4801));
        assert!(distance_spectrum(&first).multiplicity(40) >= 42);
        let odd = crafted_error(7, &params.with_t(53), &mut rng).unwrap();
        assert_eq!(odd.weight(), 53);
        let two = crafted_error(9, &params.with_t(2), &mut rng).unwrap();
        let pos: Vec<_> = two.iter_ones().collect();
        assert_eq!(circular_distance(pos[0], pos[1], 4801).unwrap(), 9);
        assert!(crafted_error(0, &params, &mut rng).is_err());
        assert!(crafted_error(2401, &params, &mut rng).is_err());
        // 17 positions cannot hold 9 disjoint pairs
        let tight = CodeParams {
            n0: 2,
            r: 17,
            w: 3,
            t: 18,
            l: 1,
        };
        assert!(crafted_error(3, &tight, &mut rng).is_err());
    }

    #[test]
    fn trial_counts() {
        let c = gjs_trial_counts(4801, 32, 1000).unwrap();
        assert_eq!((c.reduction_num, c.reduction_den), (32, 2400));
        assert_eq!(c.baseline, 2_400_000);
        assert_eq!(c.constrained, 2_368_000);
        assert!((c.reduction_fraction * 100.0 - 1.33).abs() < 0.005);
        assert_eq!(
            gjs_trial_counts(4801, 0, 5).unwrap().reduction_fraction,
            0.0
        );
        let c = gjs_trial_counts(9857, 32, 1).unwrap();
        assert_eq!(c.reduction_den, 4928);
        assert!(gjs_trial_counts(11, 5, 1).is_err());
    }

    fn toy_setup(t: usize) -> (PrivateKey, DecoderConfig) {
        let params = CodeParams::new(2, 587, 15, t, 1).unwrap();
        let (sk, _) = generate_keypair(&params, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let spec = FixedPointSpec::new(4, 9, ScalarCSD::default_layered(), 2, 15).unwrap();
        (sk, DecoderConfig::layered(Arithmetic::Fixed(spec), 10, 1))
    }

    #[test]
    fn no_errors_no_failures_and_replay() {
        let (sk, cfg) = toy_setup(0);
        let rows = fer_vs_distance(&sk, &cfg, &[1, 5, 100], 20, 7).unwrap();
        assert!(rows.iter().all(|r| r.failures == 0 && r.trials == 20));
        let (sk, cfg) = toy_setup(32);
        let a = fer_vs_distance(&sk, &cfg, &[3, 4], 30, 7).unwrap();
        assert_eq!(a, fer_vs_distance(&sk, &cfg, &[3, 4], 30, 7).unwrap());
    }

    #[test]
    fn spectrum_distances_fail_less_often() {
        // t sits on the waterfall of this code, where failures are frequent
        let (sk, cfg) = toy_setup(32);
        let spectrum = distance_spectrum(&sk.supports[0]);
        let inside: Vec<usize> = spectrum.counts.keys().copied().take(12).collect();
        let outside: Vec<usize> = (1..=293)
            .filter(|d| !spectrum.contains(*d))
            .take(12)
            .collect();
        let sum = |ds: &[usize]| {
            let rows = fer_vs_distance(&sk, &cfg, ds, 150, 11).unwrap();
            (
                rows.iter().map(|r| r.failures).sum::<u64>(),
                rows.iter().map(|r| r.trials).sum::<u64>(),
            )
        };
        let (fin, nin) = sum(&inside);
        let (fout, nout) = sum(&outside);
        let z = two_proportion_z(fout, nout, fin, nin);
        assert!(
            z > 1.645,
            "in-spectrum {fin}/{nin}, outside {fout}/{nout}, z = {z}"
        );
    }

    proptest! {
        #[test]
        fn spectrum_is_shift_invariant(k in 0i64..101, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = sample_constrained_support(101, 6, 3, &mut rng).unwrap();
            prop_assert_eq!(distance_spectrum(&cyclic_shift(&s, k)), distance_spectrum(&s));
        }

        #[test]
        fn crafted_weight_is_exact(d in 1usize..50, t in 0usize..40, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let params = CodeParams { n0: 2, r: 101, w: 5, t, l: 1 };
            let e = crafted_error(d, &params, &mut rng).unwrap();
            prop_assert_eq!(e.weight(), t);
            prop_assert!(e.iter_ones().all(|i| i < 101));
        }
    }
}
