mod args;
mod commands;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::*;

/// QC-MDPC McEliece with a fixed-point layered min-sum decoder: keys,
/// encryption, Monte-Carlo campaigns and hardware/attack models.
#[derive(Debug, Parser)]
#[command(name = "qcmdpc", version)]
struct Cli {
    /// Worker threads (default: all cores). Reports do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a key pair constrained by L
    Keygen(KeygenArgs),
    /// Encrypt a plaintext file (or a random plaintext) under a public key
    Encrypt(EncryptArgs),
    /// Decrypt a ciphertext file with a private key
    Decrypt(DecryptArgs),
    /// Frame error rate and iteration statistics
    Fer(FerArgs),
    /// Pick the scaling factor with the lowest FER
    Calibrate(CalibrateArgs),
    /// Decoder memory and clock-cycle model
    Hwmodel(HwmodelArgs),
    /// Identity-block division of a key
    Divide(DivideArgs),
    /// Fraction of the key space constrained by L
    Keyspace(KeyspaceArgs),
    /// Mean nonzeros per nonzero block under fixed division
    Blockstats(BlockstatsArgs),
    /// Distance spectrum and crafted-error failure rates of one key
    Gjs(GjsArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    match cli.command {
        Command::Keygen(a) => keygen(a),
        Command::Encrypt(a) => encrypt(a),
        Command::Decrypt(a) => decrypt(a),
        Command::Fer(a) => fer(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Hwmodel(a) => hwmodel(a),
        Command::Divide(a) => divide(a),
        Command::Keyspace(a) => keyspace(a),
        Command::Blockstats(a) => blockstats(a),
        Command::Gjs(a) => gjs(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
