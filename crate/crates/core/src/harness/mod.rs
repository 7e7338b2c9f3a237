//! Reproducible experiments: configuration, runs, rate fits and output files.

pub mod config;
pub mod emit;
pub mod experiments;
pub mod fit;

pub use config::{Experiment, ExperimentConfig, InitialData, PotentialKind, RadialKind};
pub use emit::{emit, Check, Emitted, Report, Skipped, Table};
pub use experiments::{exit_code, run};
pub use fit::{fit_rate, RateFit};

/// Generator used for sampled runs, seeded with `seed_from_u64`.
pub const RNG_NAME: &str = "ChaCha8Rng";
