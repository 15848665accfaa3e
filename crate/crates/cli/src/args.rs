use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use qcmdpc_core::harness::ReportFormat;
use qcmdpc_core::minsum::{DEFAULT_CHANNEL, DEFAULT_Q};
use qcmdpc_core::{
    Arithmetic, CodeParams, DecoderConfig, FixedPointSpec, FloatSpec, RoundingMode, ScalarCSD,
};

/// `n0,r,w,t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamTuple {
    pub n0: usize,
    pub r: usize,
    pub w: usize,
    pub t: usize,
}

impl std::str::FromStr for ParamTuple {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let v = s
            .split(',')
            .map(|x| x.trim().parse::<usize>().map_err(|e| format!("`{x}`: {e}")))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        match v[..] {
            [n0, r, w, t] => Ok(ParamTuple { n0, r, w, t }),
            _ => Err(format!("expected n0,r,w,t, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CodeArgs {
    /// Code parameters as n0,r,w,t
    #[arg(long, default_value = "2,4801,45,84")]
    pub params: ParamTuple,
    /// Minimum circular distance of key supports (parallelism)
    #[arg(long = "L", default_value_t = 1)]
    pub l: usize,
}

impl CodeArgs {
    pub fn code(&self) -> Result<CodeParams> {
        let p = self.params;
        Ok(CodeParams::new(p.n0, p.r, p.w, p.t, self.l)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScheduleArg {
    Layered,
    Sliced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ArithArg {
    Fixed,
    /// Full-precision floating point
    Float,
    /// Floating point with messages quantized to q magnitude bits
    FloatQ,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RoundingArg {
    HalfAway,
    TowardZero,
}

#[derive(Debug, Clone, Args)]
pub struct DecoderArgs {
    #[arg(long, value_enum, default_value_t = ScheduleArg::Layered)]
    pub schedule: ScheduleArg,
    #[arg(long, value_enum, default_value_t = ArithArg::Fixed)]
    pub arith: ArithArg,
    /// Message magnitude bits
    #[arg(long, default_value_t = DEFAULT_Q)]
    pub q: u32,
    /// Channel magnitude
    #[arg(long = "C", default_value_t = DEFAULT_CHANNEL)]
    pub channel: u32,
    /// Scaling factor as a CSD literal such as +2^-2-2^-5 (or a decimal);
    /// defaults to the calibrated value of the schedule
    #[arg(long)]
    pub alpha: Option<ScalarCSD>,
    #[arg(long = "frac-bits", default_value_t = 2)]
    pub frac_bits: u32,
    #[arg(long, value_enum, default_value_t = RoundingArg::HalfAway)]
    pub rounding: RoundingArg,
    #[arg(long, default_value_t = 30)]
    pub imax: usize,
    /// Rows per layer of the layered schedule; defaults to L
    #[arg(long = "layer-rows")]
    pub layer_rows: Option<usize>,
}

impl DecoderArgs {
    pub fn alpha(&self) -> ScalarCSD {
        self.alpha.clone().unwrap_or_else(|| match self.schedule {
            ScheduleArg::Layered => ScalarCSD::default_layered(),
            ScheduleArg::Sliced => ScalarCSD::default_sliced(),
        })
    }

    pub fn config(&self, params: &CodeParams) -> Result<DecoderConfig> {
        let alpha = self.alpha();
        let arithmetic = match self.arith {
            ArithArg::Fixed => {
                let rounding = match self.rounding {
                    RoundingArg::HalfAway => RoundingMode::HalfAwayFromZero,
                    RoundingArg::TowardZero => RoundingMode::TowardZero,
                };
                Arithmetic::Fixed(
                    FixedPointSpec::new(self.q, self.channel, alpha, self.frac_bits, params.w)?
                        .with_rounding(rounding),
                )
            }
            ArithArg::Float | ArithArg::FloatQ => Arithmetic::Float(FloatSpec {
                channel: self.channel as f64,
                alpha: alpha.value(),
                message_bits: (self.arith == ArithArg::FloatQ).then_some(self.q),
            }),
        };
        Ok(match self.schedule {
            ScheduleArg::Layered => {
                DecoderConfig::layered(arithmetic, self.imax, self.layer_rows.unwrap_or(params.l))
            }
            ScheduleArg::Sliced => DecoderConfig::sliced(arithmetic, self.imax),
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Write the report here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    pub format: ReportFormat,
}

/// Comma-separated list such as `2,8,16,32`.
pub fn parse_list(s: &str) -> Result<Vec<usize>> {
    let v = s
        .split(',')
        .map(|x| {
            x.trim()
                .parse::<usize>()
                .with_context(|| format!("bad list entry `{x}`"))
        })
        .collect::<Result<Vec<_>>>()?;
    if v.is_empty() {
        bail!("empty list");
    }
    Ok(v)
}

/// A list, or an inclusive range `a..b`.
pub fn parse_distances(s: &str) -> Result<Vec<usize>> {
    match s.split_once("..") {
        Some((a, b)) => {
            let a: usize = a.trim().parse().context("range start")?;
            let b: usize = b.trim().parse().context("range end")?;
            if a > b {
                bail!("empty range {a}..{b}");
            }
            Ok((a..=b).collect())
        }
        None => parse_list(s),
    }
}
