//! Experiment harness around the `dppens` library: dataset ingestion,
//! train/test stratification by ridge leverage score, ensemble benchmarks
//! for Nystrom error and bulk/tail SMAPE, and a `verify` driver for the
//! brute-force oracles.
//!
//! Everything here is `f64`; the harness is plumbing, not numerics. All
//! randomness flows from one master seed through [`dppens::stream_rng`]
//! with a fixed path layout (see [`stream_tag`]), so reports are
//! byte-identical across worker counts.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod experiment;
pub mod report;
pub mod synth;
pub mod verify;

pub use dataset::{load_csv, Dataset};
pub use experiment::{
    matched_alpha, run_ensemble_krr, run_ensemble_nystrom, smape, split_and_stratify,
    SamplerRequest, StratifiedSplit,
};
pub use report::ExperimentReport;

use thiserror::Error;

/// Top-level stream tags: the first path element under the master seed.
/// Distinct tags keep the split, the subset draws and the synthetic data
/// generator on independent streams.
pub mod stream_tag {
    pub const SPLIT: u64 = 0x73706c69;
    pub const SUBSAMPLE: u64 = 0x73756273;
    pub const KRR: u64 = 0x6b7272;
    pub const NYSTROM: u64 = 0x6e7973;
    pub const SYNTH: u64 = 0x73796e;
    pub const VERIFY: u64 = 0x76657269;
    pub const SAMPLE: u64 = 0x73616d70;
}

/// Harness error, partitioned by exit code: usage 1, data 2, verification 3,
/// numerical 4.
#[derive(Debug, Clone, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Verification(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }
}

impl From<dppens::Error> for CliError {
    fn from(e: dppens::Error) -> Self {
        use dppens::Error::*;
        match &e {
            InvalidArgument(_) | EnumerationTooLarge { .. } => CliError::Usage(e.to_string()),
            NonFiniteInput { .. } => CliError::Data(e.to_string()),
            NotPositiveDefinite { .. } | Factorization { .. } | DegenerateSampling { .. } => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}

/// `Result` alias for the harness.
pub type Result<T> = std::result::Result<T, CliError>;
