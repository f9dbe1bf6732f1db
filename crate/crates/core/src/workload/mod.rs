//! Deterministic skewed workload generation and the on-disk workload format.

mod config;
mod format;
mod generate;
mod popularity;
mod rng;

use std::io;

use thiserror::Error;

pub use config::{KeyOrder, KeyPattern, WorkloadConfig};
pub use format::{decode, encode, read_workload, write_workload, WorkloadFile, WorkloadReader, MAGIC, VERSION};
pub use generate::{Operation, Workload};
pub use popularity::{PopularityModel, RankOrder};
pub use rng::WorkloadRng;

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("invalid workload configuration: {0}")]
    InvalidConfig(String),
    #[error("not a workload file (bad magic)")]
    BadMagic,
    #[error("unsupported workload file version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt workload file: {0}")]
    CorruptWorkload(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}
