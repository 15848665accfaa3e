//! Small statistics helpers shared by the Monte-Carlo estimators.

use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Wilson score interval for `successes` out of `trials` at quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> Interval {
    if trials == 0 {
        return Interval { lo: 0.0, hi: 1.0 };
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Interval {
        lo: if successes == 0 {
            0.0
        } else {
            (center - half).max(0.0)
        },
        hi: if successes == trials {
            1.0
        } else {
            (center + half).min(1.0)
        },
    }
}

pub fn wilson95(successes: u64, trials: u64) -> Interval {
    wilson_interval(successes, trials, Z95)
}

/// `log2 C(n, k)` summed term by term.
pub fn log2_binomial(n: u64, k: u64) -> f64 {
    let k = k.min(n - k.min(n));
    (0..k)
        .map(|i| ((n - i) as f64 / (i + 1) as f64).log2())
        .sum()
}

/// One-sided two-proportion z statistic for `a/na > b/nb` (pooled variance).
pub fn two_proportion_z(a: u64, na: u64, b: u64, nb: u64) -> f64 {
    let (pa, pb) = (a as f64 / na as f64, b as f64 / nb as f64);
    let pooled = (a + b) as f64 / (na + nb) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / na as f64 + 1.0 / nb as f64)).sqrt();
    if se == 0.0 {
        return 0.0;
    }
    (pa - pb) / se
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_known_values() {
        // 0 of 10: upper bound z²/(n+z²)
        let iv = wilson95(0, 10);
        assert_eq!(iv.lo, 0.0);
        assert!((iv.hi - Z95 * Z95 / (10.0 + Z95 * Z95)).abs() < 1e-12);
        let iv = wilson95(50, 100);
        assert!((iv.lo - 0.4038).abs() < 1e-4 && (iv.hi - 0.5962).abs() < 1e-4);
    }

    #[test]
    fn point_estimate_inside_interval() {
        for n in [1u64, 7, 100, 12345] {
            for k in [0, n / 3, n / 2, n] {
                assert!(wilson95(k, n).contains(k as f64 / n as f64));
            }
        }
    }

    #[test]
    fn binomial_logs() {
        assert!((log2_binomial(10, 3) - 120f64.log2()).abs() < 1e-12);
        assert_eq!(log2_binomial(5, 0), 0.0);
        // C(4801, 45) ≈ 3.1e109
        let l = log2_binomial(4801, 45);
        assert!((l - (3.1e109f64).log2()).abs() < 0.1, "{l}");
    }
}
