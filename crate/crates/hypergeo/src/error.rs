//! Error taxonomy shared by the library and the CLI.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse category used by the CLI for exit codes and machine-readable
/// error lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Model,
    Numerics,
}

impl ErrorCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Config => "ConfigError",
            ErrorCategory::Model => "ModelError",
            ErrorCategory::Numerics => "NumericsError",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Config => 2,
            ErrorCategory::Model => 3,
            ErrorCategory::Numerics => 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown model '{0}'")]
    UnknownModel(String),

    #[error("bad constants for model '{model}': {detail}")]
    BadConstants { model: String, detail: String },

    #[error("matrix is not Hermitian: max |H - H^dag| = {deviation:.3e} exceeds {tol:.3e}")]
    NonHermitian { deviation: f64, tol: f64 },

    #[error("degenerate spectrum: gap {gap:.3e} below tolerance {tol:.3e} (levels {lower} and {upper})")]
    DegenerateSpectrum {
        gap: f64,
        tol: f64,
        lower: usize,
        upper: usize,
    },

    #[error("index {index} out of range (limit {limit}) for {what}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("multi-parameter tensor requires even integer beta, got {0}")]
    OddBetaMultiParam(f64),

    #[error("beta = {0} outside the domain {1}")]
    BetaOutOfDomain(f64, &'static str),

    #[error("curvature pole at theta = {0:.6} (sin(theta) vanishes)")]
    PoleSingularity(f64),

    #[error("embedding undefined: g'^2 < 0 on theta in [{lo:.6}, {hi:.6}]")]
    EmbeddingUndefined { lo: f64, hi: f64 },

    #[error("metric not positive and finite at lambda = {lambda:.6} (G = {value:.3e})")]
    MetricSingular { lambda: f64, value: f64 },

    #[error("arclength inversion failed: {0}")]
    InversionFailure(String),

    #[error("iteration did not converge: {0}")]
    NonConvergent(String),

    #[error("non-physical state: {0}")]
    NonPhysicalState(String),

    #[error("operation supports dimension {supported}, model has {actual}")]
    UnsupportedDimension { supported: usize, actual: usize },

    #[error("invalid frequency band: {0}")]
    BandInvalid(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("basis is empty after pruning (threshold {0:.3e})")]
    EmptyBasis(f64),

    #[error("linear system ill-conditioned: {0}")]
    IllConditioned(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        use Error::*;
        match self {
            UnknownModel(_) | BadConstants { .. } | Config(_) | InvalidArgument(_) | Io(_) => {
                ErrorCategory::Config
            }
            NonHermitian { .. }
            | DegenerateSpectrum { .. }
            | IndexOutOfRange { .. }
            | UnsupportedDimension { .. }
            | NonPhysicalState(_) => ErrorCategory::Model,
            OddBetaMultiParam(_)
            | BetaOutOfDomain(..)
            | PoleSingularity(_)
            | EmbeddingUndefined { .. }
            | MetricSingular { .. }
            | InversionFailure(_)
            | NonConvergent(_)
            | BandInvalid(_)
            | GridTooCoarse(_)
            | EmptyBasis(_)
            | IllConditioned(_) => ErrorCategory::Numerics,
        }
    }
}
