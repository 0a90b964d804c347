use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model: {invariant} ({detail})")]
    Validation { invariant: &'static str, detail: String },

    #[error("magnetic flux is incommensurate with the periodic box: {0}")]
    IncommensurateFlux(String),

    #[error("box edge {edge} is not larger than twice the hopping range {range}")]
    RangeTooLarge { edge: usize, range: usize },

    #[error("model is not translation invariant (magnetic field or disorder present)")]
    NotTranslationInvariant,

    #[error("no sites survive the bulk margin {margin}")]
    EmptyInterior { margin: usize },

    #[error("eigenvalue {eigenvalue} lies within {tol} of the Fermi level")]
    EigenvalueAtFermiLevel { eigenvalue: f64, tol: f64 },

    #[error("operator has {count} eigenvalue(s) with modulus below {tol}")]
    KernelPresent { count: usize, tol: f64 },

    #[error("model or operator is not chiral: {0}")]
    NotChiral(String),

    #[error("input is not unitary (deviation {deviation:e})")]
    NonUnitaryInput { deviation: f64 },

    #[error("input is not a projection (deviation {deviation:e})")]
    NotAProjection { deviation: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("pseudogap fit window contains no spectral weight (gap detected)")]
    GapDetected,

    #[error("cut normal is the zero vector")]
    ZeroVector,

    #[error("boundary term reaches depth {depth} beyond the allowed strip {strip}")]
    BoundaryTermOutOfStrip { depth: f64, strip: f64 },

    #[error("boundary term breaks chiral symmetry")]
    NonChiralBoundaryTerm,

    #[error("symbol is not invertible on the circle (min modulus {min_modulus:e})")]
    SymbolNotInvertible { min_modulus: f64 },

    #[error("truncation has not converged: {0}")]
    NonConvergedTruncation(String),

    #[error("Fedosov traces are not summable: {0}")]
    NotSummable(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("iterative eigensolver failed: {0}")]
    NoConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
