use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Effective load of flows `1..=flow` is not below one.
    #[error("flow {flow} is unstable: effective load {load:.6} >= 1")]
    Unstable { flow: usize, load: f64 },

    #[error("no sign change of the root equation for phi <= {cap}")]
    NoRoot { cap: f64 },

    #[error("invalid energy mode: {0}")]
    InvalidMode(String),

    /// Closed-form outage is only derived for always-on interferers.
    #[error("closed-form outage unavailable for alpha = {alpha}")]
    ClosedFormUnavailable { alpha: f64 },

    /// Residue cancellation made the closed form unreliable.
    #[error("ill-conditioned partial-fraction expansion: {0}")]
    IllConditioned(String),

    #[error("unsupported cluster size {0} without explicit cell centers")]
    UnsupportedCluster(usize),

    #[error("stochastic approximation diverged at iteration {iteration}: {reason}")]
    Divergence { iteration: usize, reason: String },
}

pub(crate) fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg()))
    }
}
