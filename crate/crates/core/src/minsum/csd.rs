use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Deepest shift a scalar term may use; scalars are exact in 1/64 steps.
pub const MAX_SHIFT: u8 = 6;
const DENOM: i32 = 1 << MAX_SHIFT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CsdTerm {
    pub negative: bool,
    pub shift: u8,
}

/// Scaling factor with at most two signed power-of-two terms, each
/// `±2^-shift` with `shift` in `1..=6`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ScalarCSD {
    terms: Vec<CsdTerm>,
}

impl ScalarCSD {
    pub fn new(terms: Vec<CsdTerm>) -> Result<Self> {
        let invalid = |m: &str| Err(Error::parse("alpha", m.to_string()));
        if terms.is_empty() || terms.len() > 2 {
            return invalid("a scalar needs one or two terms");
        }
        if terms.iter().any(|t| t.shift == 0 || t.shift > MAX_SHIFT) {
            return invalid("term shifts must be in 1..=6");
        }
        if terms.len() == 2 && terms[0].shift == terms[1].shift {
            return invalid("terms must use distinct shifts");
        }
        let s = ScalarCSD { terms };
        if s.numerator() <= 0 || s.numerator() >= DENOM {
            return invalid("scalar value must lie strictly between 0 and 1");
        }
        Ok(s)
    }

    /// `2^-shift`.
    pub fn pow2(shift: u8) -> Result<Self> {
        ScalarCSD::new(vec![CsdTerm {
            negative: false,
            shift,
        }])
    }

    /// 0.21875 = 2^-2 - 2^-5.
    pub fn default_layered() -> Self {
        "+2^-2-2^-5".parse().expect("valid literal")
    }

    /// Calibrated scalar of the sliced schedule.
    pub fn default_sliced() -> Self {
        "+2^-3-2^-5".parse().expect("valid literal")
    }

    pub fn terms(&self) -> &[CsdTerm] {
        &self.terms
    }

    /// Value in units of 2^-6.
    pub fn numerator(&self) -> i32 {
        self.terms
            .iter()
            .map(|t| {
                let v = DENOM >> t.shift;
                if t.negative {
                    -v
                } else {
                    v
                }
            })
            .sum()
    }

    pub fn value(&self) -> f64 {
        self.numerator() as f64 / DENOM as f64
    }

    /// Every distinct scalar value reachable with at most two terms, in
    /// ascending order of value; single-term forms win on duplicates.
    pub fn search_space() -> Vec<ScalarCSD> {
        let mut all = Vec::new();
        for a in 1..=MAX_SHIFT {
            all.push(ScalarCSD::pow2(a).unwrap());
        }
        for a in 1..=MAX_SHIFT {
            for b in a + 1..=MAX_SHIFT {
                for neg in [false, true] {
                    let terms = vec![
                        CsdTerm {
                            negative: false,
                            shift: a,
                        },
                        CsdTerm {
                            negative: neg,
                            shift: b,
                        },
                    ];
                    if let Ok(s) = ScalarCSD::new(terms) {
                        all.push(s);
                    }
                }
            }
        }
        let mut out: Vec<ScalarCSD> = Vec::new();
        for s in all {
            if !out.iter().any(|o| o.numerator() == s.numerator()) {
                out.push(s);
            }
        }
        out.sort_by_key(|s| s.numerator());
        out
    }

    /// Finds a representation of `value` in the search space.
    pub fn from_value(value: f64) -> Result<Self> {
        ScalarCSD::search_space()
            .into_iter()
            .find(|s| (s.value() - value).abs() < 1e-12)
            .ok_or_else(|| {
                Error::parse(
                    "alpha",
                    format!("{value} has no two-term signed power-of-two form with shifts <= 6"),
                )
            })
    }
}

impl fmt::Display for ScalarCSD {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.terms {
            write!(f, "{}2^-{}", if t.negative { '-' } else { '+' }, t.shift)?;
        }
        Ok(())
    }
}

impl FromStr for ScalarCSD {
    type Err = Error;

    /// Accepts `+2^-2-2^-5`-style literals or a plain decimal such as `0.21875`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if !s.contains('^') {
            let v: f64 = s
                .parse()
                .map_err(|_| Error::parse("alpha", format!("cannot parse `{s}`")))?;
            return ScalarCSD::from_value(v);
        }
        let mut terms = Vec::new();
        let mut rest = s;
        while !rest.is_empty() {
            let (negative, body) = match rest.as_bytes()[0] {
                b'+' => (false, &rest[1..]),
                b'-' => (true, &rest[1..]),
                _ if terms.is_empty() => (false, rest),
                _ => return Err(Error::parse("alpha", format!("expected sign in `{s}`"))),
            };
            let body = body
                .strip_prefix("2^-")
                .ok_or_else(|| Error::parse("alpha", format!("expected `2^-k` in `{s}`")))?;
            let end = body
                .find(|c: char| !c.is_ascii_digit())
                .unwrap_or(body.len());
            let shift: u8 = body[..end]
                .parse()
                .map_err(|_| Error::parse("alpha", format!("bad shift in `{s}`")))?;
            terms.push(CsdTerm { negative, shift });
            rest = &body[end..];
        }
        ScalarCSD::new(terms)
    }
}

impl Serialize for ScalarCSD {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ScalarCSD {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
