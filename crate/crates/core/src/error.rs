use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("fock basis with {modes} modes and cutoff {n_max} has {size} states, above the cap of {cap}")]
    BasisTooLarge {
        modes: usize,
        n_max: usize,
        size: u128,
        cap: usize,
    },

    #[error("mode index {mode} out of range for {modes} modes")]
    ModeOutOfRange { mode: usize, modes: usize },

    #[error("sector {sector} out of range (cutoff {n_max})")]
    SectorOutOfRange { sector: usize, n_max: usize },

    #[error("state is not normalized: |norm^2 - 1| = {deviation:e}")]
    NotNormalized { deviation: f64 },

    #[error("state is not sector-pure")]
    NotSectorPure,

    #[error("vacuum state has no reduced density")]
    VacuumInput,

    #[error("truncation inadequate: {what} (defect {defect:e}, tolerance {tolerance:e})")]
    TruncationInadequate {
        what: String,
        defect: f64,
        tolerance: f64,
    },

    #[error("krylov step did not converge: error estimate {estimate:e} at subspace dimension {dim}")]
    KrylovNoConvergence { estimate: f64, dim: usize },

    #[error("integrator stability violated: {0}")]
    Stability(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("iteration cap {iterations} reached with residual {residual:e} above tolerance {tolerance:e}")]
    IterationCap {
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("asymptotic fit residual {residual:e} above tolerance {tolerance:e}")]
    FitResidual { residual: f64, tolerance: f64 },

    #[error("negative asymptotic slope {alpha}: bound-state regime is not supported")]
    BoundState { alpha: f64 },

    #[error("symplectic defect {defect:e} exceeds bound {bound:e} at t = {time}")]
    SymplecticDefect { defect: f64, bound: f64, time: f64 },

    #[error("operator is not Hermitian (deviation {0:e})")]
    NonHermitian(f64),

    #[error("enumeration budget exceeded: {size} outcomes above budget {budget}")]
    EnumerationBudget { size: usize, budget: usize },

    #[error("consistency check failed: {0}")]
    Consistency(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("N = {n}: {source}")]
    AtParticleNumber {
        n: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code for the command-line harness.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidInput(_) => 2,
            Error::Io { .. } => 2,
            Error::AtParticleNumber { source, .. } => source.exit_code(),
            _ => 3,
        }
    }

    /// Attach the particle number of the failing run.
    pub fn at_n(n: usize) -> impl FnOnce(Error) -> Error {
        move |e| Error::AtParticleNumber { n, source: Box::new(e) }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
