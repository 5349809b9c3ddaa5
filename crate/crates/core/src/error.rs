use thiserror::Error;

/// Errors raised by the numerical and modelling layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },

    /// The optimization problem has an empty feasible set.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// A documented precondition does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The primary queue is not stable, so the secondary service rate is undefined.
    #[error("primary queue unstable: lambda_p = {lambda_p} >= mu_p = {mu_p}")]
    PrimaryUnstable { lambda_p: f64, mu_p: f64 },

    /// Queueing delay is unbounded (arrival rate at or above service rate).
    #[error("unbounded delay: lambda_p = {lambda_p} >= mu_p = {mu_p}")]
    UnboundedDelay { lambda_p: f64, mu_p: f64 },

    /// A structured parameter failed validation.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_probability(what: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain { what, value })
    }
}
