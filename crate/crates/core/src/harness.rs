//! Seeded Monte-Carlo campaigns, scalar calibration, and the flat-file
//! formats for keys, ciphertexts and reports.
//!
//! Trial `i` of a campaign draws everything (key, plaintext, error) from the
//! stream `(master_seed, TRIAL, i)`. Per-trial results are merged by integer
//! summation, so a report does not depend on the number of worker threads.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::codec::{encrypt, plaintext_len, random_plaintext, Ciphertext, Plaintext};
use crate::error::{Error, Result};
use crate::gf2::{BitVec, GF2Poly, SparseSupport};
use crate::keygen::{generate_keypair, CodeParams, PrivateKey, PublicKey};
use crate::minsum::{decode, Arithmetic, DecoderConfig, FixedPointSpec, ScalarCSD};
use crate::rng::{derive_rng, domain};
use crate::stats::{wilson95, Interval};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyMode {
    /// A new key pair for every trial.
    Fresh,
    /// One key for the whole campaign.
    Fixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    pub params: CodeParams,
    pub decoder: DecoderConfig,
    pub trials: u64,
    pub master_seed: u64,
    /// Replaces `params.t` for the error weight.
    pub t_override: Option<usize>,
    /// Used for every trial when set.
    pub fixed_key: Option<PrivateKey>,
    /// Record wall-clock time in the report. Off by default so reports
    /// stay byte-identical across runs.
    pub record_time: bool,
}

impl CampaignConfig {
    pub fn new(params: CodeParams, decoder: DecoderConfig, trials: u64, master_seed: u64) -> Self {
        CampaignConfig {
            params,
            decoder,
            trials,
            master_seed,
            t_override: None,
            fixed_key: None,
            record_time: false,
        }
    }

    /// Parameters with the effective error weight.
    pub fn effective_params(&self) -> CodeParams {
        let p = self.fixed_key.as_ref().map_or(self.params, |k| k.params);
        p.with_t(self.t_override.unwrap_or(p.t))
    }

    pub fn key_mode(&self) -> KeyMode {
        if self.fixed_key.is_some() {
            KeyMode::Fixed
        } else {
            KeyMode::Fresh
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParams("trials must be at least 1".into()));
        }
        if let Some(k) = &self.fixed_key {
            if (k.params.n0, k.params.r, k.params.w)
                != (self.params.n0, self.params.r, self.params.w)
            {
                return Err(Error::InvalidParams(
                    "fixed key does not match the campaign parameters".into(),
                ));
            }
        }
        let p = self.effective_params();
        if p.t > p.n() {
            return Err(Error::InvalidParams(format!(
                "t = {} exceeds n0·r = {}",
                p.t,
                p.n()
            )));
        }
        p.validate()?;
        self.decoder.validate_params(&p)
    }
}

/// Campaign settings as echoed in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignEcho {
    pub params: CodeParams,
    pub decoder: DecoderConfig,
    pub trials: u64,
    pub key_mode: KeyMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FerReport {
    pub trials: u64,
    pub failures: u64,
    pub fer: f64,
    pub wilson95: Interval,
    /// Failed trials count as `max_iterations`.
    pub mean_iterations: f64,
    /// `histogram[i]` trials stopped after `i` iterations; failures land in
    /// the last bin.
    pub histogram: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_s: Option<f64>,
    pub config: CampaignEcho,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy)]
struct TrialResult {
    failed: bool,
    iterations: usize,
}

fn run_trial(
    cfg: &CampaignConfig,
    params: &CodeParams,
    fixed: Option<&(PrivateKey, PublicKey)>,
    i: u64,
) -> Result<TrialResult> {
    let mut rng = derive_rng(cfg.master_seed, domain::TRIAL, i);
    let fresh;
    let (sk, pk) = match fixed {
        Some((sk, pk)) => (sk, pk),
        None => {
            fresh = generate_keypair(params, &mut rng)?;
            (&fresh.0, &fresh.1)
        }
    };
    let m = random_plaintext(params, &mut rng);
    let c = encrypt(&m, pk, &mut rng)?;
    let out = decode(&c.0, sk, &cfg.decoder)?;
    let ok = out.success
        && out
            .codeword
            .as_ref()
            .is_some_and(|x| x.slice(0, plaintext_len(params)) == m.0);
    Ok(TrialResult {
        failed: !ok,
        iterations: if ok {
            out.iterations
        } else {
            cfg.decoder.max_iterations
        },
    })
}

/// Runs `cfg.trials` encrypt/decrypt round trips and aggregates failures
/// and iteration counts.
pub fn run_fer(cfg: &CampaignConfig) -> Result<FerReport> {
    cfg.validate()?;
    let params = cfg.effective_params();
    let fixed = match &cfg.fixed_key {
        Some(k) => {
            let sk = PrivateKey {
                params,
                ..k.clone()
            };
            cfg.decoder.validate(&sk)?;
            let pk = sk.public_key()?;
            Some((sk, pk))
        }
        None => None,
    };
    let imax = cfg.decoder.max_iterations;
    let start = Instant::now();
    let (failures, histogram) = (0..cfg.trials)
        .into_par_iter()
        .map(|i| run_trial(cfg, &params, fixed.as_ref(), i))
        .try_fold(
            || (0u64, vec![0u64; imax + 1]),
            |(mut f, mut h), r| {
                let r = r?;
                f += r.failed as u64;
                h[r.iterations] += 1;
                Ok::<_, Error>((f, h))
            },
        )
        .try_reduce(
            || (0u64, vec![0u64; imax + 1]),
            |(fa, ha), (fb, hb)| Ok((fa + fb, ha.iter().zip(&hb).map(|(a, b)| a + b).collect())),
        )?;
    let elapsed = start.elapsed().as_secs_f64();
    let total_iterations: u64 = histogram
        .iter()
        .enumerate()
        .map(|(i, &c)| i as u64 * c)
        .sum();
    Ok(FerReport {
        trials: cfg.trials,
        failures,
        fer: failures as f64 / cfg.trials as f64,
        wilson95: wilson95(failures, cfg.trials),
        mean_iterations: total_iterations as f64 / cfg.trials as f64,
        histogram,
        wall_clock_s: cfg.record_time.then_some(elapsed),
        config: CampaignEcho {
            params,
            decoder: cfg.decoder.clone(),
            trials: cfg.trials,
            key_mode: cfg.key_mode(),
        },
        seed: cfg.master_seed,
    })
}

/// Copy of `decoder` with the scaling factor replaced. Fixed-point specs
/// are rebuilt so the a-posteriori width follows the new scalar.
pub fn with_scalar(decoder: &DecoderConfig, alpha: &ScalarCSD, w: usize) -> Result<DecoderConfig> {
    let arithmetic = match &decoder.arithmetic {
        Arithmetic::Fixed(s) => Arithmetic::Fixed(
            FixedPointSpec::new(s.q, s.channel, alpha.clone(), s.frac_bits, w)?
                .with_rounding(s.rounding),
        ),
        Arithmetic::Float(s) => {
            let mut s = s.clone();
            s.alpha = alpha.value();
            Arithmetic::Float(s)
        }
    };
    Ok(DecoderConfig {
        arithmetic,
        ..decoder.clone()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub alpha: ScalarCSD,
    pub alpha_value: f64,
    pub failures: u64,
    pub trials: u64,
    pub fer: f64,
    pub mean_iterations: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub best: ScalarCSD,
    /// One row per candidate, in the order given.
    pub rows: Vec<CalibrationRow>,
    pub seed: u64,
}

/// Runs the campaign once per candidate with the same seed and picks the
/// lowest FER, then the lowest mean iteration count, then the smallest value.
pub fn calibrate_scalar(cfg: &CampaignConfig, candidates: &[ScalarCSD]) -> Result<Calibration> {
    if candidates.is_empty() {
        return Err(Error::InvalidParams("no scalar candidates".into()));
    }
    let w = cfg.params.w;
    let rows = candidates
        .iter()
        .map(|alpha| {
            let run = CampaignConfig {
                decoder: with_scalar(&cfg.decoder, alpha, w)?,
                record_time: false,
                ..cfg.clone()
            };
            let rep = run_fer(&run)?;
            Ok(CalibrationRow {
                alpha: alpha.clone(),
                alpha_value: alpha.value(),
                failures: rep.failures,
                trials: rep.trials,
                fer: rep.fer,
                mean_iterations: rep.mean_iterations,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    // every candidate runs the same trials, so integer totals order exactly
    let key = |r: &CalibrationRow| {
        let total = (r.mean_iterations * r.trials as f64).round() as u64;
        (r.failures, total, r.alpha.numerator())
    };
    let best = rows
        .iter()
        .min_by_key(|r| key(r))
        .expect("nonempty")
        .alpha
        .clone();
    Ok(Calibration {
        best,
        rows,
        seed: cfg.master_seed,
    })
}

// ---- flat-file formats ----

fn field<'a>(v: &'a Value, name: &str) -> Result<&'a Value> {
    v.get(name).ok_or_else(|| Error::parse(name, "missing"))
}

fn usize_field(v: &Value, name: &str) -> Result<usize> {
    field(v, name)?
        .as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| Error::parse(name, "expected a non-negative integer"))
}

fn parse_document(text: &str) -> Result<Value> {
    let v: Value =
        serde_json::from_str(text).map_err(|e| Error::parse("document", e.to_string()))?;
    if !v.is_object() {
        return Err(Error::parse("document", "expected a JSON object"));
    }
    Ok(v)
}

fn parse_params(v: &Value) -> Result<CodeParams> {
    Ok(CodeParams {
        n0: usize_field(v, "n0")?,
        r: usize_field(v, "r")?,
        w: usize_field(v, "w")?,
        t: usize_field(v, "t")?,
        l: usize_field(v, "L")?,
    })
}

fn params_json(p: &CodeParams) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("n0".into(), json!(p.n0));
    m.insert("r".into(), json!(p.r));
    m.insert("w".into(), json!(p.w));
    m.insert("t".into(), json!(p.t));
    m.insert("L".into(), json!(p.l));
    m
}

/// `{n0, r, w, t, L, supports}` with each support as a sorted index array.
pub fn serialize_key(sk: &PrivateKey) -> String {
    let mut m = params_json(&sk.params);
    m.insert(
        "supports".into(),
        sk.supports.iter().map(|s| json!(s.indices())).collect(),
    );
    let mut s = serde_json::to_string_pretty(&Value::Object(m)).expect("plain JSON");
    s.push('\n');
    s
}

pub fn deserialize_key(text: &str) -> Result<PrivateKey> {
    let v = parse_document(text)?;
    let params = parse_params(&v)?;
    let arr = field(&v, "supports")?
        .as_array()
        .ok_or_else(|| Error::parse("supports", "expected an array"))?;
    let supports = arr
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let name = format!("supports[{k}]");
            let idx = s
                .as_array()
                .ok_or_else(|| Error::parse(&name, "expected an array"))?
                .iter()
                .map(|x| x.as_u64().map(|x| x as usize))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::parse(&name, "expected non-negative integers"))?;
            SparseSupport::new(params.r, idx).map_err(|e| Error::parse(&name, e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    PrivateKey::new(params, supports)
}

/// `{n0, r, w, t, L, b_cols}` with each column as LSB-first hex.
pub fn serialize_public_key(pk: &PublicKey) -> String {
    let mut m = params_json(&pk.params);
    m.insert(
        "b_cols".into(),
        pk.b_cols
            .iter()
            .map(|b| json!(b.coeffs().to_hex()))
            .collect(),
    );
    let mut s = serde_json::to_string_pretty(&Value::Object(m)).expect("plain JSON");
    s.push('\n');
    s
}

pub fn deserialize_public_key(text: &str) -> Result<PublicKey> {
    let v = parse_document(text)?;
    let params = parse_params(&v)?;
    params.validate()?;
    let arr = field(&v, "b_cols")?
        .as_array()
        .ok_or_else(|| Error::parse("b_cols", "expected an array"))?;
    if arr.len() != params.n0 - 1 {
        return Err(Error::parse(
            "b_cols",
            format!("expected {} entries, got {}", params.n0 - 1, arr.len()),
        ));
    }
    let b_cols = arr
        .iter()
        .enumerate()
        .map(|(k, h)| {
            let name = format!("b_cols[{k}]");
            let h = h
                .as_str()
                .ok_or_else(|| Error::parse(&name, "expected a hex string"))?;
            BitVec::from_hex(params.r, h)
                .map(GF2Poly::from_bits)
                .map_err(|e| Error::parse(&name, e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PublicKey { params, b_cols })
}

/// `bits N` on the first line, LSB-first hex on the second.
pub fn serialize_bits(v: &BitVec) -> String {
    format!("bits {}\n{}\n", v.len(), v.to_hex())
}

pub fn deserialize_bits(text: &str) -> Result<BitVec> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse("header", "empty input"))?;
    let len = header
        .strip_prefix("bits ")
        .ok_or_else(|| Error::parse("header", "expected `bits N`"))?
        .trim()
        .parse::<usize>()
        .map_err(|e| Error::parse("header", e.to_string()))?;
    let hex = lines.next().ok_or_else(|| Error::parse("hex", "missing"))?;
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(Error::parse("hex", "trailing data"));
    }
    BitVec::from_hex(len, hex)
}

pub fn serialize_ct(c: &Ciphertext) -> String {
    serialize_bits(&c.0)
}

pub fn deserialize_ct(text: &str) -> Result<Ciphertext> {
    deserialize_bits(text).map(Ciphertext)
}

pub fn serialize_plaintext(m: &Plaintext) -> String {
    serialize_bits(&m.0)
}

pub fn deserialize_plaintext(text: &str) -> Result<Plaintext> {
    deserialize_bits(text).map(Plaintext)
}

// ---- reports ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            _ => Err(Error::parse(
                "format",
                format!("expected json or csv, got `{s}`"),
            )),
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

/// One CSV record per row, header taken from the first row's field names.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| Error::InvalidParams(format!("csv: {e}")))?;
    }
    w.flush()
        .map_err(|e| Error::InvalidParams(format!("csv: {e}")))?;
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidParams(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Flat form of a [`FerReport`] for CSV output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FerCsvRow {
    pub n0: usize,
    pub r: usize,
    pub w: usize,
    pub t: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub schedule: String,
    pub arithmetic: String,
    pub alpha: f64,
    pub max_iterations: usize,
    pub key_mode: KeyMode,
    pub seed: u64,
    pub trials: u64,
    pub failures: u64,
    pub fer: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub mean_iterations: f64,
    /// Space-separated bin counts.
    pub histogram: String,
}

impl From<&FerReport> for FerCsvRow {
    fn from(rep: &FerReport) -> Self {
        let p = rep.config.params;
        let d = &rep.config.decoder;
        let (arithmetic, alpha) = match &d.arithmetic {
            Arithmetic::Fixed(s) => (
                format!("fixed q={} f={}", s.q, s.frac_bits),
                s.alpha.value(),
            ),
            Arithmetic::Float(s) => match s.message_bits {
                Some(q) => (format!("float q={q}"), s.alpha),
                None => ("float".to_string(), s.alpha),
            },
        };
        FerCsvRow {
            n0: p.n0,
            r: p.r,
            w: p.w,
            t: p.t,
            l: p.l,
            schedule: format!("{:?}", d.schedule).to_lowercase(),
            arithmetic,
            alpha,
            max_iterations: d.max_iterations,
            key_mode: rep.config.key_mode,
            seed: rep.seed,
            trials: rep.trials,
            failures: rep.failures,
            fer: rep.fer,
            wilson_lo: rep.wilson95.lo,
            wilson_hi: rep.wilson95.hi,
            mean_iterations: rep.mean_iterations,
            histogram: rep
                .histogram
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(" "),
        }
    }
}

/// Writes `text` to `path`, or to stdout when `path` is `None`.
pub fn emit(text: &str, path: Option<&std::path::Path>) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    }
}
