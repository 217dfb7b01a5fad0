use thiserror::Error;

/// Everything that can go wrong in the forward and inverse pipelines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-physical chain: {0}")]
    NonPhysical(String),

    #[error("theta = 1 leaves gamma undefined")]
    ThetaOne,

    #[error("invalid site {site} for a matrix of size {size}")]
    InvalidSite { site: usize, size: usize },

    #[error("eigenvector iteration for eigenvalue #{index} did not converge after {sweeps} sweeps")]
    ConvergenceFailure { index: usize, sweeps: usize },

    #[error("evaluation point {re}{im:+}i hits a pole")]
    PoleHit { re: f64, im: f64 },

    #[error("Green function denominator vanished at {re}{im:+}i")]
    DenominatorZero { re: f64, im: f64 },

    #[error("eigenvalue #{0} is not simple at working precision")]
    DegenerateEigenvalue(usize),

    #[error("interlacing violation: {0}")]
    InterlacingViolation(String),

    #[error("gamma = {0} coincides with an eigenvalue of the unperturbed operator")]
    GammaIsPole(f64),

    #[error("no sign change of the Green function in gap ({lo}, {hi})")]
    RootNotBracketed { lo: f64, hi: f64 },

    #[error("negative residue {value} at {at}: input spectra are inconsistent")]
    NegativeResidue { at: f64, value: f64 },

    #[error("too few poles: a split needs {needed}, only {available} available")]
    TooFewPoles { needed: usize, available: usize },

    #[error("numerical breakdown at step {step}: {detail}")]
    NumericalBreakdown { step: usize, detail: String },
}

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// A precondition on the inputs does not hold.
    Domain,
    /// The numerics failed on otherwise valid inputs.
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::ConvergenceFailure { .. }
            | Error::NumericalBreakdown { .. }
            | Error::RootNotBracketed { .. }
            | Error::DegenerateEigenvalue(_) => ErrorClass::Numerical,
            _ => ErrorClass::Domain,
        }
    }

    pub(crate) fn pole(z: num_complex::Complex64) -> Self {
        Error::PoleHit { re: z.re, im: z.im }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
