use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("cannot normalize a vector with norm {norm:e}")]
    ZeroVector { norm: f64 },

    #[error("flat is the zero subspace and does not meet the sphere")]
    EmptyFlat,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid problem instance: {0}")]
    InvalidInstance(String),

    #[error("feasibility of sign pattern {signs:?} on strict set {strict:?} is inconclusive (distance {distance:e})")]
    Inconclusive {
        strict: Vec<usize>,
        signs: Vec<i8>,
        distance: f64,
    },

    #[error("certificate is not differentiable at w: |<w, x^{index}>| = {value:e}")]
    Nondifferentiable { index: usize, value: f64 },

    #[error("atom {atom} lies within {margin:e} of hyperplane {hyperplane}")]
    StratumBoundary {
        atom: usize,
        hyperplane: usize,
        margin: f64,
    },

    #[error("no stratum compatible with the atom was found")]
    EmptyFamily,

    #[error("matrix of size {size} exceeds the supported maximum {max}")]
    TooLarge { size: usize, max: usize },

    #[error("inner solve at lambda = {lambda:e} did not certify")]
    SolverFailed { lambda: f64 },

    #[error("noisy solve at |zeta| = {noise:e} returned {found} atoms, baseline has {expected}")]
    AtomCountChanged {
        noise: f64,
        expected: usize,
        found: usize,
    },

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
