use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("eigendecomposition did not converge after {iterations} iterations")]
    EigenConvergence { iterations: usize },

    #[error("integration accuracy: {0}; increase n_steps")]
    IntegrationAccuracy(String),

    #[error("invalid Gram matrix: {0}")]
    InvalidGram(String),

    #[error("inconsistent Gram matrix: radicand {radicand:e} for column {column}")]
    InconsistentGram { column: usize, radicand: f64 },

    #[error("solver did not converge in {iterations} iterations (best duality gap {gap:e})")]
    NonConvergence {
        iterations: usize,
        gap: f64,
        best: Option<Box<crate::sdp::DiscriminationResult>>,
    },

    #[error("at t = {time}: {source}")]
    AtTime {
        time: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Strips `AtTime` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtTime { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::EigenConvergence { .. }
                | Error::IntegrationAccuracy(_)
                | Error::InconsistentGram { .. }
                | Error::NonConvergence { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
