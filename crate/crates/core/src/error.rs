use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("failed to parse model document: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("theta = {0} is a pole of a phase-type transform")]
    TransformPole(num_complex::Complex64),

    #[error("polynomial has degree 0")]
    ConstantPolynomial,

    #[error("matrix is not numerically singular (smallest/largest singular value = {ratio:.3e})")]
    NotSingular { ratio: f64 },

    #[error("generator is defective (row sums down to {min_row_sum:.3e})")]
    DefectiveGenerator { min_row_sum: f64 },

    #[error(
        "common eigenvalue: the spectra are separated by only {separation:.3e}; \
         try perturbing the observation rates by about 1e-6"
    )]
    CommonEigenvalue { separation: f64 },

    #[error("expected {expected} roots in the closed right half-plane, found {found}")]
    WrongRootCount { expected: usize, found: usize },

    #[error(
        "repeated eigenvalue near {value}; Jordan chains are not supported, \
         try perturbing the observation rates by about 1e-6"
    )]
    RepeatedEigenvalue { value: num_complex::Complex64 },

    #[error(
        "repeated root near {value} of the cleared determinant; \
         try perturbing the model parameters by about 1e-6"
    )]
    RepeatedRoot { value: num_complex::Complex64 },

    #[error("asymptotic drift {mu} is negative; the first passage chain is defective")]
    DefectiveDrift { mu: f64 },

    #[error("asymptotic drift is zero; the occupation matrix is infinite")]
    ZeroDrift,

    #[error("asymptotic drift {mu} is not positive")]
    NonPositiveDrift { mu: f64 },

    #[error("all observation rates must be positive (state {state} has rate 0)")]
    NotAllObserved { state: usize },

    #[error("resolvent (rho I + killed generator) is near singular at rho = {rho} (cond {cond:.3e})")]
    NearSingularResolvent { rho: num_complex::Complex64, cond: f64 },

    #[error("bracket matrix at x = {x} is singular (cond {cond:.3e})")]
    SingularBracket { x: f64, cond: f64 },

    #[error(
        "R({u}) is ill-conditioned (cond {cond:.3e}); survival is reliable only for u <= {usable:.3}"
    )]
    IllConditioned { u: f64, cond: f64, usable: f64 },

    #[error("{what} = {value:.3e} lies outside [0, 1] beyond roundoff")]
    OutOfRange { what: &'static str, value: f64 },

    #[error("Monte Carlo simulation does not support Brownian components (state {state})")]
    BrownianUnsupported { state: usize },

    #[error("numerical check failed: {0}")]
    Numerical(String),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::TransformPole(_)
            | Error::NotSingular { .. }
            | Error::CommonEigenvalue { .. }
            | Error::WrongRootCount { .. }
            | Error::RepeatedEigenvalue { .. }
            | Error::RepeatedRoot { .. }
            | Error::NearSingularResolvent { .. }
            | Error::SingularBracket { .. }
            | Error::IllConditioned { .. }
            | Error::OutOfRange { .. }
            | Error::Numerical(_) => 2,
            _ => 1,
        }
    }
}
