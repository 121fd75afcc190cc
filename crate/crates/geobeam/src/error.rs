use thiserror::Error;

/// Errors raised by the geometry, flow, and classification layers.
#[derive(Debug, Error)]
pub enum GeobeamError {
    /// A chart point lies outside the manifold's chart domain or inside a pole guard.
    #[error("domain error: {0}")]
    Domain(String),

    /// Numerical degeneracy (ill-conditioned metric, degenerate rotation-number map, ...).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// The adaptive integrator failed (step-size underflow near a pole guard, horizon exceeded).
    #[error("integration error: {0}")]
    Integration(String),

    /// A sampling density post-check failed; carries a suggested sample count.
    #[error("density error: {msg} (suggested sample count: {suggested})")]
    Density { msg: String, suggested: usize },

    /// A constructed cover failed its verification pass.
    #[error("cover error: {0}")]
    Cover(String),

    /// An internal consistency check tripped (e.g. coloring exceeded the family cap).
    #[error("structural error: {0}")]
    Structural(String),

    /// Invalid experiment configuration.
    #[error("config error: {0}")]
    Config(String),

    /// A verification invariant failed on otherwise-valid inputs.
    #[error("verification failure: {0}")]
    Verification(String),

    /// Unsupported manifold configuration for the requested operation.
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl GeobeamError {
    /// Process exit code for the CLI: 1 computation, 2 config, 3 verification.
    pub fn exit_code(&self) -> i32 {
        match self {
            GeobeamError::Config(_) => 2,
            GeobeamError::Verification(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, GeobeamError>;
