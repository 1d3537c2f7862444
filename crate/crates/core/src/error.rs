use thiserror::Error;

/// Errors raised across the solver suite.
///
/// The CLI maps `Config`, `Input`, `Domain` and `Usage` to exit code 1 and
/// the numerical variants to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("picard iteration did not converge after {iterations} iterations (last difference {last_difference:e})")]
    NonConvergence {
        iterations: usize,
        last_difference: f64,
        trace: Box<crate::picard::PicardTrace>,
    },

    #[error("iterate blew up at iteration {iteration}")]
    BlowUp {
        iteration: usize,
        last_finite: Box<crate::picard::Trajectory>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad input or configuration rather than by
    /// the numerics.
    pub fn is_configuration(&self) -> bool {
        matches!(
            self,
            Error::Input(_) | Error::Domain(_) | Error::Config(_) | Error::Usage(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
