use thiserror::Error;

/// Errors surfaced by the laboratory's numerical kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point {point:?} lies outside the field's domain")]
    OutsideDomain { point: Vec<f64> },

    #[error("coefficient field is singular at {point:?}")]
    SingularPoint { point: Vec<f64> },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArg(String),

    #[error("ellipticity violated at t={t}, x={point:?}: min symmetric eigenvalue {min_eig:.3e} < alpha0 = {alpha0:.3e}")]
    Ellipticity {
        t: f64,
        point: Vec<f64>,
        min_eig: f64,
        alpha0: f64,
    },

    #[error("negative Robin coefficient {beta} at t={t}, boundary point {point:?}")]
    NegativeRobin { t: f64, point: Vec<f64>, beta: f64 },

    #[error("matrix is not sectorial for half-angle {phi}: eigenvalue {lambda} outside the open sector")]
    NotSectorial { phi: f64, lambda: num_complex::Complex64 },

    #[error("shift {lambda} is within {margin:.3e} of the spectrum")]
    NearSingular {
        lambda: num_complex::Complex64,
        margin: f64,
    },

    #[error("eigenvalue {lambda} lies on or near the branch cut along the negative reals")]
    BranchCut { lambda: num_complex::Complex64 },

    #[error("eigensolver failed to converge")]
    EigFailed,

    #[error("resource budget exceeded: {0}")]
    Resource(String),

    #[error("matrix exponential argument too large: ||sA|| = {0:.3e}")]
    ExpOverflow(f64),

    #[error("zero denominator in ratio")]
    ZeroDenominator,

    #[error("exact enumeration limited to k <= {limit}, got k = {k}")]
    EnumerationBudget { k: usize, limit: usize },

    #[error("Neumann strategy requires ||Q|| < 1, estimated {0:.4}")]
    ContractionFailed(f64),

    #[error("no sampled shift reached the contraction target; table: {0:?}")]
    ShiftExhausted(Vec<(f64, f64)>),

    #[error("singular time-node matrix; apply a positive shift first")]
    SingularNode,

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
