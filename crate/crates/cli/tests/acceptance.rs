//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so the lines are always shown. The process fails
//! when a criterion outside `EXPECTED_FAILURES` fails.

use std::collections::BTreeSet;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use qcmdpc_core::attack::{distance_spectrum, gjs_trial_counts};
use qcmdpc_core::codec::encode;
use qcmdpc_core::gf2::{poly_inverse_mod, poly_mul_mod, syndrome};
use qcmdpc_core::minsum::{cnu_compress, cnu_expand};
use qcmdpc_core::parallel::{dynamic_division, BankMap, BankedMemory};
use qcmdpc_core::stats::two_proportion_z;
use qcmdpc_core::{generate_keypair, BitVec, CodeParams, GF2Poly, PrivateKey};

/// Criteria that fail for reasons analysed outside the code base; they are
/// still run and reported.
const EXPECTED_FAILURES: &[u32] = &[3, 5, 7];

/// Error weight for the finite-precision comparison, on the waterfall of
/// the f = 2 decoder.
const T_ELEVATED: usize = 112;

const SEED: &str = "20240601";

fn qcmdpc(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_qcmdpc"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "qcmdpc {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&qcmdpc(args)).expect("JSON report")
}

struct Check {
    ok: bool,
    detail: String,
}

impl Check {
    fn new(ok: bool, detail: impl Into<String>) -> Self {
        Check {
            ok,
            detail: detail.into(),
        }
    }
}

fn u(v: &Value) -> u64 {
    v.as_u64().expect("integer")
}

fn f(v: &Value) -> f64 {
    v.as_f64().expect("number")
}

// 1
fn memory_model() -> Check {
    let start = Instant::now();
    let v = json(&[
        "hwmodel",
        "--params",
        "2,4801,45,84",
        "--L",
        "2,8,16,32",
        "--q",
        "4",
        "--apost-width",
        "11",
    ]);
    let secs = start.elapsed().as_secs_f64();
    let l2: Vec<u64> = v["models"][0]["memory"]["entries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| u(&e["total_bits"]))
        .collect();
    let totals: Vec<u64> = v["models"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| u(&m["memory"]["total_bits"]))
        .collect();
    let ok = l2 == [1260, 110446, 432180, 105600, 1980]
        && totals == [651466, 658084, 666908, 684556]
        && secs < 1.0;
    Check::new(
        ok,
        format!("L=2 RAMs {l2:?}, totals {totals:?}, {secs:.3} s"),
    )
}

// 2
fn cycle_model() -> Check {
    let (n0, r, w) = (2u64, 4801u64, 45u64);
    let v = json(&[
        "hwmodel",
        "--params",
        "2,4801,45,84",
        "--L",
        "1,2,3,4,8,16,32,64",
    ]);
    let mut ok = true;
    let mut speedups = Vec::new();
    for m in v["models"].as_array().unwrap() {
        let c = &m["cycles"];
        let l = u(&c["L"]);
        let clocks = n0 * w * r.div_ceil(l);
        ok &= u(&c["clocks_per_iteration_worst"]) == clocks;
        // serial over parallel clocks is r / ceil(r/L), reduced
        let (num, den) = (u(&c["speedup_num"]), u(&c["speedup_den"]));
        ok &= num * r.div_ceil(l) == den * r && gcd(num, den) == 1;
        // the only loss is the partially filled last layer
        ok &= l * r.div_ceil(l) - r < l;
        if [2, 8, 16, 32].contains(&l) {
            ok &= f(&c["speedup"]).round() as u64 == l;
            speedups.push(format!("{num}/{den}"));
        }
    }
    let l2 = u(&v["models"][1]["cycles"]["clocks_per_iteration_worst"]);
    ok &= l2 == 216090;
    Check::new(
        ok,
        format!("L=2 clocks {l2}, speedups {}", speedups.join(" ")),
    )
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

// 3
fn keyspace_fractions() -> Check {
    let v = json(&[
        "keyspace",
        "--params",
        "2,4801,45,84",
        "--L",
        "2,4,8,16,32",
        "--samples",
        "1000000",
        "--seed",
        SEED,
    ]);
    let fr: Vec<f64> = v
        .as_array()
        .unwrap()
        .iter()
        .map(|e| f(&e["fraction"]))
        .collect();
    let bands = [(0.2243, 0.2283), (0.0968, 0.1008), (0.0169, 0.0189)];
    let in_band = fr
        .iter()
        .zip(bands)
        .all(|(x, (lo, hi))| (lo..=hi).contains(x));
    let monotone = fr[2] > fr[3] && fr[3] >= fr[4];
    Check::new(
        in_band && monotone,
        format!(
            "fractions L=2,4,8,16,32: {:.5} {:.5} {:.5} {:.6} {:.6} (bands [0.2243,0.2283] [0.0968,0.1008] [0.0169,0.0189]; monotone {monotone})",
            fr[0], fr[1], fr[2], fr[3], fr[4]
        ),
    )
}

// 4
fn block_density() -> Check {
    let v = json(&[
        "blockstats",
        "--params",
        "2,4801,45,84",
        "--L",
        "2,4",
        "--samples",
        "10000",
        "--seed",
        SEED,
    ]);
    let m2 = f(&v[0]["fixed_mean_per_block"]);
    let m4 = f(&v[1]["fixed_mean_per_block"]);
    let fixed_ok = (m2 - 1.346).abs() <= 0.02 && (m4 - 2.319).abs() <= 0.03;
    let mut dynamic_ok = true;
    for l in ["2", "4", "8", "16", "32"] {
        let d = json(&[
            "divide",
            "--params",
            "2,4801,45,84",
            "--L",
            l,
            "--seed",
            SEED,
        ]);
        let want: u64 = l.parse().unwrap();
        dynamic_ok &= d["valid"] == true
            && u(&d["nonzeros_per_block"][0]) == want
            && u(&d["nonzeros_per_block"][1]) == want;
    }
    Check::new(
        fixed_ok && dynamic_ok,
        format!("fixed-division means L=2 {m2:.4}, L=4 {m4:.4}; dynamic blocks hold exactly L nonzeros: {dynamic_ok}"),
    )
}

// 5 and 6 share the layered campaign
fn layered_campaign() -> Value {
    json(&[
        "fer",
        "--params",
        "2,4801,45,84",
        "--L",
        "2",
        "--imax",
        "30",
        "--q",
        "4",
        "--frac-bits",
        "2",
        "--trials",
        "10000",
        "--seed",
        SEED,
    ])
}

fn convergence(layered: &Value) -> Check {
    let sliced = json(&[
        "fer",
        "--params",
        "2,4801,45,84",
        "--schedule",
        "sliced",
        "--imax",
        "30",
        "--q",
        "4",
        "--frac-bits",
        "2",
        "--trials",
        "1000",
        "--seed",
        SEED,
    ]);
    let ml = f(&layered["mean_iterations"]);
    let ms = f(&sliced["mean_iterations"]);
    let alpha = |v: &Value| {
        v["config"]["decoder"]["arithmetic"]["alpha"]
            .as_str()
            .unwrap()
            .to_string()
    };
    Check::new(
        (1.85..=2.25).contains(&ml) && (4.3..=5.0).contains(&ms),
        format!(
            "layered {ml:.3} (alpha {}, {} trials), sliced {ms:.3} (alpha {}, {} trials)",
            alpha(layered),
            layered["trials"],
            alpha(&sliced),
            sliced["trials"]
        ),
    )
}

fn correction(layered: &Value) -> Check {
    let failures = u(&layered["failures"]);
    Check::new(
        failures == 0 && u(&layered["trials"]) >= 10_000,
        format!(
            "{failures} failures in {} layered decodes at t=84",
            layered["trials"]
        ),
    )
}

// 7
fn finite_precision() -> Check {
    let t = T_ELEVATED.to_string();
    let run = |extra: &[&str]| {
        let mut args = vec![
            "fer",
            "--params",
            "2,4801,45,84",
            "--t",
            &t,
            "--trials",
            "10000",
            "--seed",
            SEED,
        ];
        args.extend_from_slice(extra);
        let v = json(&args);
        (u(&v["failures"]), u(&v["trials"]))
    };
    let (f2, n) = run(&["--frac-bits", "2"]);
    let (f0, _) = run(&["--frac-bits", "0"]);
    let (ff, _) = run(&["--arith", "float-q"]);
    let fer = |x: u64| x as f64 / n as f64;
    let z = two_proportion_z(f0, n, f2, n);
    let band = (1e-3..=1e-1).contains(&fer(f2));
    let near_float = ff > 0 && f2 <= 2 * ff && ff <= 2 * f2;
    Check::new(
        band && z > 1.645 && near_float,
        format!(
            "t={T_ELEVATED}: FER f=0 {:.4}, f=2 {:.4}, all fraction bits {:.4} (ratio {:.2}) over {n} trials; z = {z:.2}",
            fer(f0),
            fer(f2),
            fer(ff),
            f2 as f64 / ff.max(1) as f64
        ),
    )
}

// 8
fn dense_h(sk: &PrivateKey) -> Vec<Vec<bool>> {
    let CodeParams { n0, r, .. } = sk.params;
    (0..r)
        .map(|i| {
            let mut row = vec![false; n0 * r];
            for (k, s) in sk.supports.iter().enumerate() {
                for &c in s.indices() {
                    row[k * r + (c + i) % r] = true;
                }
            }
            row
        })
        .collect()
}

fn dense_syndrome(h: &[Vec<bool>], x: &BitVec) -> BitVec {
    BitVec::from_bools(
        &h.iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold(false, |a, (j, &b)| a ^ (b & x.get(j)))
            })
            .collect::<Vec<_>>(),
    )
}

fn structural() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let params = CodeParams::new(2, 17, 3, 2, 4).unwrap();
    let (sk, pk) = generate_keypair(&params, &mut rng).unwrap();
    let h = dense_h(&sk);
    let mut notes = Vec::new();

    let gh = (0..17).all(|j| {
        let m = BitVec::from_indices(17, [j]).unwrap();
        dense_syndrome(&h, &encode(&m, &pk).unwrap()).is_zero()
    });
    notes.push(format!("G·H^T=0 {gh}"));

    let random_bits =
        |rng: &mut ChaCha8Rng| BitVec::from_bools(&(0..34).map(|_| rng.gen()).collect::<Vec<_>>());
    let lin = (0..1000).all(|_| {
        let (x, y) = (random_bits(&mut rng), random_bits(&mut rng));
        let sx = syndrome(&sk.supports, &x).unwrap();
        let sy = syndrome(&sk.supports, &y).unwrap();
        let sxy = syndrome(&sk.supports, &(&x ^ &y)).unwrap();
        sx == dense_syndrome(&h, &x) && sxy == &sx ^ &sy
    });
    notes.push(format!("syndrome linear and dense-equal {lin}"));

    let cells: Vec<(usize, usize)> = dynamic_division(&sk, 4).unwrap().cells().collect();
    let covered: BTreeSet<_> = cells.iter().copied().collect();
    let nonzero: BTreeSet<_> = h
        .iter()
        .enumerate()
        .flat_map(|(i, row)| {
            row.iter()
                .enumerate()
                .filter(|e| *e.1)
                .map(move |(j, _)| (i, j))
        })
        .collect();
    let cover = covered == nonzero && cells.len() == nonzero.len();
    notes.push(format!("identity blocks cover H exactly {cover}"));

    let mut banks = true;
    for l in [2usize, 4, 8, 16, 32] {
        let map = BankMap::new(l, 2, 4801).unwrap();
        let mut image: Vec<u32> = (0..9602 + 2 * l).map(|_| rng.gen()).collect();
        let mut mem = BankedMemory::from_image(map, &image);
        for _ in 0..2000 {
            let a = rng.gen_range(0..9602);
            banks &= mem.gather(a) == image[a..a + l];
            let vals: Vec<u32> = (0..l).map(|_| rng.gen()).collect();
            mem.scatter(a, &vals);
            image[a..a + l].copy_from_slice(&vals);
            banks &= mem.to_image()[..image.len()] == image[..];
        }
    }
    notes.push(format!("bank gather/scatter {banks}"));

    let mut cnu = true;
    for _ in 0..100_000 {
        let row: Vec<(u32, u8, bool)> = (0..90)
            .map(|c| (c, rng.gen_range(0..16), rng.gen()))
            .collect();
        let got = cnu_expand(&cnu_compress(&row), &row);
        cnu &= (0..row.len()).all(|j| {
            let others = row
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != j)
                .map(|(_, e)| e);
            let mag = others.clone().map(|e| e.1).min().unwrap() as i32;
            let neg = others.fold(false, |a, e| a ^ e.2);
            got[j] == if neg { -mag } else { mag }
        });
    }
    notes.push(format!("CNU vs exclusive min on 1e5 rows {cnu}"));

    let one = GF2Poly::one(4801);
    let inv = (0..1000).all(|_| {
        let mut bits: Vec<bool> = (0..4801).map(|_| rng.gen()).collect();
        if bits.iter().filter(|&&b| b).count() % 2 == 0 {
            bits[0] ^= true;
        }
        let a = GF2Poly::from_bits(BitVec::from_bools(&bits));
        poly_inverse_mod(&a).is_some_and(|b| poly_mul_mod(&a, &b).unwrap() == one)
    });
    notes.push(format!(
        "inverse times polynomial is 1 on 1e3 odd-weight polynomials {inv}"
    ));

    Check::new(gh && lin && cover && banks && cnu && inv, notes.join("; "))
}

// 9
fn gjs_economics() -> Check {
    let counts_ok = [1u64, 1000, 1_000_000].iter().all(|&m| {
        let c = gjs_trial_counts(4801, 32, m).unwrap();
        c.reduction_num == 32 && c.reduction_den == 2400 && c.baseline - c.constrained == 32 * m
    });
    let c = gjs_trial_counts(4801, 32, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let params = CodeParams::level80(32);
    let mut smallest = usize::MAX;
    for _ in 0..1000 {
        let (sk, _) = generate_keypair(&params, &mut rng).unwrap();
        for s in &sk.supports {
            smallest = smallest.min(distance_spectrum(s).min_distance().unwrap());
        }
    }
    Check::new(
        counts_ok && smallest >= 32,
        format!(
            "reduction {}/{} = {:.2}%; smallest distance over 1e3 keys at L=32: {smallest}",
            c.reduction_num,
            c.reduction_den,
            100.0 * c.reduction_fraction
        ),
    )
}

// 10
fn determinism() -> Check {
    let campaigns: [&[&str]; 7] = [
        &["fer", "--trials", "40", "--seed", "3", "--L", "2"],
        &[
            "fer",
            "--trials",
            "20",
            "--seed",
            "3",
            "--schedule",
            "sliced",
            "--format",
            "csv",
        ],
        &[
            "calibrate",
            "--params",
            "2,4801,45,100",
            "--trials",
            "8",
            "--candidates",
            "+2^-2-2^-5,+2^-3",
            "--seed",
            "3",
        ],
        &["keyspace", "--samples", "50000", "--seed", "3"],
        &["blockstats", "--samples", "500", "--seed", "3"],
        &[
            "gjs",
            "--params",
            "2,4801,45,100",
            "--distances",
            "30..33",
            "--trials",
            "4",
            "--seed",
            "3",
        ],
        &["divide", "--L", "8", "--seed", "3", "--format", "csv"],
    ];
    let mut bad = Vec::new();
    for args in campaigns {
        let reference = qcmdpc(&[&["--threads", "1"], args].concat());
        for threads in ["1", "2", "4"] {
            if qcmdpc(&[&["--threads", threads], args].concat()) != reference {
                bad.push(format!("{} with {threads} threads", args[0]));
            }
        }
    }
    Check::new(
        bad.is_empty(),
        if bad.is_empty() {
            "7 campaigns byte-identical across 1, 2 and 4 threads and reruns".to_string()
        } else {
            format!("differing reports: {}", bad.join(", "))
        },
    )
}

fn main() {
    let started = Instant::now();
    let mut results: Vec<(u32, &str, Check, f64)> = Vec::new();
    let mut run = |id: u32, name: &'static str, check: &dyn Fn() -> Check| {
        let t = Instant::now();
        let c = check();
        let secs = t.elapsed().as_secs_f64();
        let tag = match (c.ok, EXPECTED_FAILURES.contains(&id)) {
            (true, _) => "PASS",
            (false, true) => "FAIL (expected)",
            (false, false) => "FAIL",
        };
        println!("[{tag}] {id:>2} {name}: {} [{secs:.1} s]", c.detail);
        results.push((id, name, c, secs));
    };
    run(1, "memory model", &memory_model);
    run(2, "cycle model", &cycle_model);
    run(3, "key-space fractions", &keyspace_fractions);
    run(4, "fixed-division density", &block_density);
    let layered = layered_campaign();
    run(5, "convergence statistics", &|| convergence(&layered));
    run(6, "error-correction capability", &|| correction(&layered));
    run(7, "finite-precision mitigation", &finite_precision);
    run(8, "structural oracles", &structural);
    run(9, "reaction-attack economics", &gjs_economics);
    run(10, "determinism", &determinism);

    let passed = results.iter().filter(|r| r.2.ok).count();
    let unexpected: Vec<u32> = results
        .iter()
        .filter(|r| !r.2.ok && !EXPECTED_FAILURES.contains(&r.0))
        .map(|r| r.0)
        .collect();
    println!(
        "acceptance: {passed}/{} criteria pass in {:.0} s; expected failures {EXPECTED_FAILURES:?}",
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
