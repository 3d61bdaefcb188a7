use thiserror::Error;

/// Errors raised by the finite-model constructions.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("atom index {index} out of range for {atoms} atoms")]
    AtomOutOfRange { index: usize, atoms: usize },

    #[error("objects belong to different systems")]
    SystemMismatch,

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("observable has a non-finite value at atom {0}")]
    NonFinite(usize),

    #[error("empty shell for j = {j}, c = {c}")]
    EmptyShell { j: u32, c: f64 },

    #[error("support of the composed operator exceeds the cap of {cap} elements")]
    SupportTooLarge { cap: usize },

    #[error("system is not ergodic: {0}")]
    NotErgodic(String),

    #[error("infeasible construction: {0}")]
    Infeasible(String),

    #[error("no shift satisfies the overlap bound {bound:.6e}; best overlap {best:.6e}")]
    NoAdmissibleShift { bound: f64, best: f64 },

    #[error("towers overlap: {0}")]
    Overlap(String),

    #[error("tower construction stopped at measure {best:.6} after {iterations} iterations, target {target:.6}")]
    TowerNotReached { best: f64, target: f64, iterations: usize },

    #[error("observable does not have zero mean (integral {0:.3e})")]
    NonZeroMean(f64),

    #[error("stage {stage}: {source}")]
    Stage { stage: usize, source: Box<Error> },

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
