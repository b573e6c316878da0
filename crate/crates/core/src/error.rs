use thiserror::Error;

/// Errors produced by model construction, simulation and the sweep machinery.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("statevector of {amplitudes} amplitudes exceeds the cap of {cap}")]
    StateTooLarge { amplitudes: u128, cap: usize },

    #[error("parameter variant does not match model kind {0}")]
    ParamMismatch(String),

    #[error("parameter out of range: {0}")]
    ParamRange(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("model {0} is not supported by this backend")]
    WrongBackend(String),

    #[error("missing boundary angles for the bilinear-biquadratic chain")]
    MissingBoundary,

    #[error("observable is not Hermitian: {0}")]
    NonHermitian(String),

    #[error("order parameter {kind} is not defined for model {model}")]
    IncompatibleObservable { kind: String, model: String },

    #[error("degenerate Fermi level: gap {gap:e} below tolerance {tol:e}")]
    DegenerateFermiLevel { gap: f64, tol: f64 },

    #[error("state is not a pure Gaussian state (purity defect {0:e})")]
    NotPure(f64),

    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),

    #[error("invalid site index {0}")]
    InvalidSite(usize),

    #[error("{0}")]
    Analysis(String),

    #[error("configuration error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error("record store: {0}")]
    Store(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
