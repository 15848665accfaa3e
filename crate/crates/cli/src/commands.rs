use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use qcmdpc_core::attack::{distance_spectrum, fer_vs_distance, gjs_trial_counts, GjsTrialCounts};
use qcmdpc_core::codec::{plaintext_len, random_plaintext};
use qcmdpc_core::harness::{
    deserialize_ct, deserialize_key, deserialize_plaintext, deserialize_public_key, emit,
    serialize_ct, serialize_key, serialize_plaintext, serialize_public_key, to_csv, to_json,
    Calibration, CalibrationRow, FerCsvRow, ReportFormat,
};
use qcmdpc_core::keygen::{estimate_keyspace, KeyspaceEstimate};
use qcmdpc_core::parallel::{
    dynamic_division, fixed_division_counts, fixed_division_stats_seeded, validate_layers,
    IdentityBlockSchedule,
};
use qcmdpc_core::{
    calibrate_scalar, cycle_report, generate_keypair, memory_report, run_fer, CampaignConfig,
    CodeParams, CycleReport, FixedPointSpec, MemoryReport, PrivateKey, ScalarCSD,
};

use crate::args::{parse_distances, parse_list, CodeArgs, DecoderArgs, OutputArgs};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_key(path: &Path) -> Result<PrivateKey> {
    deserialize_key(&read(path)?).with_context(|| format!("parsing key {}", path.display()))
}

fn report<T: Serialize + ?Sized, R: Serialize>(
    out: &OutputArgs,
    json: &T,
    rows: &[R],
) -> Result<()> {
    let text = match out.format {
        ReportFormat::Json => to_json(json),
        ReportFormat::Csv => to_csv(rows)?,
    };
    emit(&text, out.out.as_deref()).context("writing report")
}

#[derive(Debug, Args)]
pub struct KeygenArgs {
    #[command(flatten)]
    code: CodeArgs,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Private key file; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    /// Public key file
    #[arg(long = "pub-out")]
    pub_out: Option<PathBuf>,
}

pub fn keygen(a: KeygenArgs) -> Result<()> {
    let params = a.code.code()?;
    let (sk, pk) = generate_keypair(&params, &mut ChaCha8Rng::seed_from_u64(a.seed))?;
    emit(&serialize_key(&sk), a.out.as_deref())?;
    if let Some(p) = a.pub_out {
        write_file(&p, &serialize_public_key(&pk))?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct EncryptArgs {
    /// Public key file
    #[arg(long = "pub")]
    public: PathBuf,
    /// Plaintext file; a random plaintext is drawn when absent
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Error weight; defaults to t of the key
    #[arg(long)]
    t: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Ciphertext file; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to store the random plaintext
    #[arg(long = "plain-out")]
    plain_out: Option<PathBuf>,
}

pub fn encrypt(a: EncryptArgs) -> Result<()> {
    let mut pk = deserialize_public_key(&read(&a.public)?).context("parsing public key")?;
    if let Some(t) = a.t {
        pk.params = pk.params.with_t(t);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let m = match &a.input {
        Some(p) => deserialize_plaintext(&read(p)?).context("parsing plaintext")?,
        None => random_plaintext(&pk.params, &mut rng),
    };
    if m.0.len() != plaintext_len(&pk.params) {
        bail!(
            "plaintext has {} bits, the key expects {}",
            m.0.len(),
            plaintext_len(&pk.params)
        );
    }
    let c = qcmdpc_core::encrypt(&m, &pk, &mut rng)?;
    if let Some(p) = a.plain_out {
        write_file(&p, &serialize_plaintext(&m))?;
    }
    emit(&serialize_ct(&c), a.out.as_deref())?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct DecryptArgs {
    /// Private key file
    #[arg(long)]
    key: PathBuf,
    /// Ciphertext file
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    decoder: DecoderArgs,
    /// Plaintext file; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn decrypt(a: DecryptArgs) -> Result<()> {
    let sk = load_key(&a.key)?;
    let c = deserialize_ct(&read(&a.input)?).context("parsing ciphertext")?;
    let cfg = a.decoder.config(&sk.params)?;
    match qcmdpc_core::decrypt(&c, &sk, &cfg)? {
        Ok(m) => emit(&serialize_plaintext(&m), a.out.as_deref())?,
        Err(f) => bail!(
            "decoding failed after {} iterations (syndrome weight {})",
            f.iterations,
            f.final_syndrome_weight
        ),
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct CampaignArgs {
    #[command(flatten)]
    code: CodeArgs,
    #[command(flatten)]
    decoder: DecoderArgs,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Error weight, replacing t of --params
    #[arg(long)]
    t: Option<usize>,
    /// Decode every trial under this private key
    #[arg(long = "fixed-key")]
    fixed_key: Option<PathBuf>,
}

impl CampaignArgs {
    fn campaign(&self) -> Result<CampaignConfig> {
        let key = self.fixed_key.as_deref().map(load_key).transpose()?;
        let params = match &key {
            Some(k) => k.params,
            None => self.code.code()?,
        };
        let mut cfg = CampaignConfig::new(
            params,
            self.decoder.config(&params)?,
            self.trials,
            self.seed,
        );
        cfg.t_override = self.t;
        cfg.fixed_key = key;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct FerArgs {
    #[command(flatten)]
    campaign: CampaignArgs,
    /// Include wall-clock time in the report
    #[arg(long)]
    timing: bool,
    #[command(flatten)]
    output: OutputArgs,
}

pub fn fer(a: FerArgs) -> Result<()> {
    let mut cfg = a.campaign.campaign()?;
    cfg.record_time = a.timing;
    let rep = run_fer(&cfg)?;
    report(&a.output, &rep, &[FerCsvRow::from(&rep)])
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    campaign: CampaignArgs,
    /// Comma-separated CSD literals; all two-term scalars when absent
    #[arg(long)]
    candidates: Option<String>,
    #[command(flatten)]
    output: OutputArgs,
}

pub fn calibrate(a: CalibrateArgs) -> Result<()> {
    let cfg = a.campaign.campaign()?;
    let candidates = match &a.candidates {
        Some(s) => s
            .split(',')
            .map(|x| {
                x.parse::<ScalarCSD>()
                    .with_context(|| format!("candidate `{x}`"))
            })
            .collect::<Result<Vec<_>>>()?,
        None => ScalarCSD::search_space(),
    };
    let cal: Calibration = calibrate_scalar(&cfg, &candidates)?;
    let rows: Vec<CalibrationRow> = cal.rows.clone();
    report(&a.output, &cal, &rows)
}

#[derive(Debug, Args)]
pub struct HwmodelArgs {
    /// Code parameters as n0,r,w,t
    #[arg(long, default_value = "2,4801,45,84")]
    params: crate::args::ParamTuple,
    /// Parallelism levels, comma-separated
    #[arg(long = "L", default_value = "2,8,16,32")]
    ls: String,
    #[arg(long, default_value_t = qcmdpc_core::minsum::DEFAULT_Q)]
    q: u32,
    #[arg(long = "C", default_value_t = qcmdpc_core::minsum::DEFAULT_CHANNEL)]
    channel: u32,
    #[arg(long)]
    alpha: Option<ScalarCSD>,
    #[arg(long = "frac-bits", default_value_t = 2)]
    frac_bits: u32,
    /// A-posteriori word width; derived from q, C, alpha and frac-bits when absent
    #[arg(long = "apost-width")]
    apost_width: Option<u32>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Serialize)]
struct HwmodelEntry {
    memory: MemoryReport,
    cycles: CycleReport,
}

#[derive(Debug, Serialize)]
struct HwmodelReport {
    n0: usize,
    r: usize,
    w: usize,
    q: u32,
    apost_width: u32,
    models: Vec<HwmodelEntry>,
}

#[derive(Debug, Serialize)]
struct HwmodelRow {
    #[serde(rename = "L")]
    l: usize,
    ram_i: u64,
    ram_m: u64,
    ram_s: u64,
    ram_u: u64,
    ram_t: u64,
    total_bits: u64,
    clocks_per_iteration_worst: u64,
    speedup_num: u64,
    speedup_den: u64,
    speedup: f64,
}

pub fn hwmodel(a: HwmodelArgs) -> Result<()> {
    let p = a.params;
    let params = CodeParams {
        n0: p.n0,
        r: p.r,
        w: p.w,
        t: p.t,
        l: 1,
    };
    params.validate()?;
    let apost_width = match a.apost_width {
        Some(x) => x,
        None => {
            let alpha = a.alpha.clone().unwrap_or_else(ScalarCSD::default_layered);
            FixedPointSpec::new(a.q, a.channel, alpha, a.frac_bits, p.w)?.posteriori_width()
        }
    };
    let models: Vec<HwmodelEntry> = parse_list(&a.ls)?
        .into_iter()
        .map(|l| {
            if l == 0 || l > p.r {
                bail!("L must be in 1..=r, got {l}");
            }
            Ok(HwmodelEntry {
                memory: memory_report(&params, l, a.q, apost_width),
                cycles: cycle_report(&params, l),
            })
        })
        .collect::<Result<_>>()?;
    let rows: Vec<HwmodelRow> = models
        .iter()
        .map(|m| {
            let bits = |i: usize| m.memory.entries[i].total_bits;
            HwmodelRow {
                l: m.memory.l,
                ram_i: bits(0),
                ram_m: bits(1),
                ram_s: bits(2),
                ram_u: bits(3),
                ram_t: bits(4),
                total_bits: m.memory.total_bits,
                clocks_per_iteration_worst: m.cycles.clocks_per_iteration_worst,
                speedup_num: m.cycles.speedup_num,
                speedup_den: m.cycles.speedup_den,
                speedup: m.cycles.speedup,
            }
        })
        .collect();
    let rep = HwmodelReport {
        n0: p.n0,
        r: p.r,
        w: p.w,
        q: a.q,
        apost_width,
        models,
    };
    report(&a.output, &rep, &rows)
}

#[derive(Debug, Args)]
pub struct KeySource {
    /// Private key file; a key is generated from --params, --L and --seed when absent
    #[arg(long)]
    key: Option<PathBuf>,
    #[command(flatten)]
    code: CodeArgs,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl KeySource {
    fn key(&self) -> Result<PrivateKey> {
        match &self.key {
            Some(p) => load_key(p),
            None => {
                let params = self.code.code()?;
                Ok(generate_keypair(&params, &mut ChaCha8Rng::seed_from_u64(self.seed))?.0)
            }
        }
    }
}

#[derive(Debug, Args)]
pub struct DivideArgs {
    #[command(flatten)]
    source: KeySource,
    /// Include the block start columns of every layer
    #[arg(long)]
    layers: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Serialize)]
struct FixedDivision {
    cells: u64,
    blocks: u64,
    mean_per_block: f64,
}

#[derive(Debug, Serialize)]
struct DivideReport {
    params: CodeParams,
    #[serde(rename = "L")]
    l: usize,
    num_layers: usize,
    last_layer_rows: usize,
    valid: bool,
    /// Identity blocks per full layer, per submatrix.
    blocks_per_layer: usize,
    /// Fewest and most nonzeros of H inside one block of a full layer.
    nonzeros_per_block: (usize, usize),
    fixed_division: Vec<FixedDivision>,
    #[serde(skip_serializing_if = "Option::is_none")]
    layers: Option<Vec<Vec<Vec<usize>>>>,
}

#[derive(Debug, Serialize)]
struct DivideRow {
    #[serde(rename = "L")]
    l: usize,
    num_layers: usize,
    last_layer_rows: usize,
    valid: bool,
    min_nonzeros_per_block: usize,
    max_nonzeros_per_block: usize,
    fixed_mean_per_block: f64,
}

/// Counts the nonzeros of H inside every L×L block of the full layers,
/// straight from the supports.
fn block_nonzeros(sk: &PrivateKey, sched: &IdentityBlockSchedule) -> (usize, usize) {
    let (r, l) = (sk.params.r, sched.l);
    let dense: Vec<Vec<bool>> = sk
        .supports
        .iter()
        .map(|s| s.to_dense().iter().collect())
        .collect();
    let (mut lo, mut hi) = (usize::MAX, 0);
    for (layer, blocks) in sched.layers.iter().enumerate() {
        if sched.rows_in_layer(layer) != l {
            continue;
        }
        for (k, starts) in blocks.iter().enumerate() {
            for &s in starts {
                let mut nz = 0;
                for i in layer * l..layer * l + l {
                    for j in 0..l {
                        let c = (s + j) % r;
                        nz += dense[k][(c + r - i % r) % r] as usize;
                    }
                }
                lo = lo.min(nz);
                hi = hi.max(nz);
            }
        }
    }
    if hi == 0 {
        (0, 0)
    } else {
        (lo, hi)
    }
}

pub fn divide(a: DivideArgs) -> Result<()> {
    let sk = a.source.key()?;
    let l = sk.params.l;
    let sched = dynamic_division(&sk, l)?;
    let (min_nz, max_nz) = block_nonzeros(&sk, &sched);
    let fixed_division = sk
        .supports
        .iter()
        .map(|s| {
            let (cells, blocks) = fixed_division_counts(s, l);
            FixedDivision {
                cells,
                blocks,
                mean_per_block: cells as f64 / blocks.max(1) as f64,
            }
        })
        .collect::<Vec<_>>();
    let (cells, blocks) = fixed_division
        .iter()
        .fold((0, 0), |(c, b), f| (c + f.cells, b + f.blocks));
    let rep = DivideReport {
        params: sk.params,
        l,
        num_layers: sched.num_layers(),
        last_layer_rows: sched.last_layer_rows,
        valid: validate_layers(&sched),
        blocks_per_layer: sk.params.w,
        nonzeros_per_block: (min_nz, max_nz),
        fixed_division,
        layers: a.layers.then(|| sched.layers.clone()),
    };
    let row = DivideRow {
        l,
        num_layers: rep.num_layers,
        last_layer_rows: rep.last_layer_rows,
        valid: rep.valid,
        min_nonzeros_per_block: min_nz,
        max_nonzeros_per_block: max_nz,
        fixed_mean_per_block: cells as f64 / blocks.max(1) as f64,
    };
    report(&a.output, &rep, &[row])
}

#[derive(Debug, Args)]
pub struct KeyspaceArgs {
    /// Code parameters as n0,r,w,t
    #[arg(long, default_value = "2,4801,45,84")]
    params: crate::args::ParamTuple,
    #[arg(long = "L", default_value = "2,4,8,16,32")]
    ls: String,
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Serialize)]
struct KeyspaceRow {
    #[serde(rename = "L")]
    l: usize,
    samples: u64,
    passing: u64,
    fraction: f64,
    wilson_lo: f64,
    wilson_hi: f64,
    log2_keys: Option<f64>,
}

pub fn keyspace(a: KeyspaceArgs) -> Result<()> {
    let p = a.params;
    if a.samples == 0 {
        bail!("--samples must be positive");
    }
    let est: Vec<KeyspaceEstimate> =
        estimate_keyspace(p.n0, p.r, p.w, &parse_list(&a.ls)?, a.samples, a.seed);
    let rows: Vec<KeyspaceRow> = est
        .iter()
        .map(|e| KeyspaceRow {
            l: e.l,
            samples: e.samples,
            passing: e.passing,
            fraction: e.fraction,
            wilson_lo: e.wilson95.lo,
            wilson_hi: e.wilson95.hi,
            log2_keys: e.log2_keys,
        })
        .collect();
    report(&a.output, &est, &rows)
}

#[derive(Debug, Args)]
pub struct BlockstatsArgs {
    /// Code parameters as n0,r,w,t
    #[arg(long, default_value = "2,4801,45,84")]
    params: crate::args::ParamTuple,
    #[arg(long = "L", default_value = "2,4")]
    ls: String,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Serialize)]
struct BlockstatsRow {
    #[serde(rename = "L")]
    l: usize,
    samples: usize,
    fixed_mean_per_block: f64,
    dynamic_per_block: usize,
}

pub fn blockstats(a: BlockstatsArgs) -> Result<()> {
    let p = a.params;
    if a.samples == 0 {
        bail!("--samples must be positive");
    }
    let rows = parse_list(&a.ls)?
        .into_iter()
        .map(|l| {
            Ok(BlockstatsRow {
                l,
                samples: a.samples,
                fixed_mean_per_block: fixed_division_stats_seeded(a.samples, p.r, p.w, l, a.seed)?,
                dynamic_per_block: l,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    report(&a.output, &rows, &rows)
}

#[derive(Debug, Args)]
pub struct GjsArgs {
    #[command(flatten)]
    source: KeySource,
    #[command(flatten)]
    decoder: DecoderArgs,
    /// Distances to probe: a list or an inclusive range a..b
    #[arg(long, default_value = "1..32")]
    distances: String,
    /// Crafted ciphertexts per distance
    #[arg(long, default_value_t = 100)]
    trials: u64,
    /// Error weight; defaults to t of the key
    #[arg(long)]
    t: Option<usize>,
    /// Constraint assumed for the trial-count savings; defaults to L of the key
    #[arg(long = "assume-L")]
    assume_l: Option<usize>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Serialize)]
struct GjsRow {
    d: usize,
    multiplicity: u64,
    failures: u64,
    trials: u64,
    fer: f64,
}

#[derive(Debug, Serialize)]
struct GjsReport {
    params: CodeParams,
    spectrum: BTreeMap<usize, u64>,
    min_distance: Option<usize>,
    trial_counts: Option<GjsTrialCounts>,
    seed: u64,
    rows: Vec<GjsRow>,
}

pub fn gjs(a: GjsArgs) -> Result<()> {
    let mut sk = a.source.key()?;
    if let Some(t) = a.t {
        sk.params = sk.params.with_t(t);
    }
    let cfg = a.decoder.config(&sk.params)?;
    let spectrum = distance_spectrum(&sk.supports[0]);
    let distances = parse_distances(&a.distances)?;
    let rows = fer_vs_distance(&sk, &cfg, &distances, a.trials, a.source.seed)?
        .into_iter()
        .map(|r| GjsRow {
            d: r.d,
            multiplicity: spectrum.multiplicity(r.d),
            failures: r.failures,
            trials: r.trials,
            fer: r.failures as f64 / r.trials as f64,
        })
        .collect::<Vec<_>>();
    let l = a.assume_l.unwrap_or(sk.params.l);
    let rep = GjsReport {
        params: sk.params,
        min_distance: spectrum.min_distance(),
        trial_counts: gjs_trial_counts(sk.params.r, l, a.trials).ok(),
        spectrum: spectrum.counts,
        seed: a.source.seed,
        rows,
    };
    report(&a.output, &rep, &rep.rows)
}
