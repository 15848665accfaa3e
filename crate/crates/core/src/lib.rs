//! QC-MDPC McEliece with a bit-accurate fixed-point, row-layered scaled
//! min-sum decoder, together with models of its parallel hardware
//! architecture and of a reaction attack on its keys.

pub mod attack;
pub mod codec;
pub mod error;
pub mod gf2;
pub mod harness;
pub mod keygen;
pub mod minsum;
pub mod parallel;
pub mod rng;
pub mod stats;

pub use codec::{decrypt, encrypt, Ciphertext, DecodeFailure, Plaintext};
pub use error::{Error, Result};
pub use gf2::{BitVec, GF2Poly, SparseSupport};
pub use harness::{calibrate_scalar, run_fer, CampaignConfig, FerReport, KeyMode, ReportFormat};
pub use keygen::{generate_keypair, CodeParams, PrivateKey, PublicKey};
pub use minsum::{
    decode, Arithmetic, DecodeOutcome, DecoderConfig, FixedPointSpec, FloatSpec, RoundingMode,
    ScalarCSD, Schedule,
};
pub use parallel::{cycle_report, memory_report, CycleReport, IdentityBlockSchedule, MemoryReport};
