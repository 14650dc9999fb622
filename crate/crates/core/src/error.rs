use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{what} did not converge within {iterations} iterations")]
    NotConverged { what: &'static str, iterations: usize },

    #[error("series hit the cap of {cap} terms")]
    TermCap { cap: usize },

    /// The asymptotic closed form is only defined above a minimum received power.
    #[error("below the asymptotic regime: need Er > {min_er_watts:.6e} W")]
    BelowAsymptoticRegime { min_er_watts: f64 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("integration did not reach tolerance: estimate {estimate:.6e}, error bound {error_bound:.3e}")]
    Integration { estimate: f64, error_bound: f64 },

    #[error("constrained search failed: {0}")]
    SearchFailed(String),

    #[error("config: {0}")]
    Config(String),

    #[error("unsupported: {0}")]
    Capability(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
