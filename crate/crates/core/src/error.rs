use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[non_exhaustive]
pub enum Error {
    #[error("component index {index} out of range for dimension {dimension}")]
    IndexOutOfRange { index: usize, dimension: usize },

    #[error("invalid test function: {0}")]
    InvalidTestFunction(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("{what} must be {requirement}, got {value}")]
    Domain {
        what: &'static str,
        requirement: &'static str,
        value: f64,
    },

    #[error("incomplete gamma parameter a = {a} outside supported range [-10, 10]")]
    UnsupportedParameter { a: f64 },

    #[error(
        "quadrature budget of {node_count} evaluations exhausted \
         (best value {value}, error estimate {abs_error_estimate})"
    )]
    BudgetExceeded {
        value: f64,
        abs_error_estimate: f64,
        node_count: usize,
    },

    #[error("integrand returned a non-finite value at t = {t}")]
    IntegrandFailure { t: f64 },

    #[error(
        "endpoint singularity t^{exponent} is not integrable without a damping factor"
    )]
    NotIntegrable { exponent: f64 },

    /// The current at the origin in dimension `d > 1` is not a Hida
    /// distribution: its first chaos diverges.
    #[error(
        "xi(0) does not exist for d = {dimension}: the first chaos xi_i^(1)(0) is divergent, \
         so xi(0) cannot be a Hida distribution"
    )]
    Nonexistence { dimension: usize },

    #[error(
        "order-{order} derivative estimate unstable: {estimate} with step disagreement {disagreement}"
    )]
    UnstableDerivative {
        order: usize,
        estimate: f64,
        disagreement: f64,
    },

    #[error("malformed cutoff grid: {0}")]
    MalformedGrid(String),
}
