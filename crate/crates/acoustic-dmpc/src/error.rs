use thiserror::Error;

/// Crate-wide error type. Variants mirror the failure classes of the
/// individual modules so callers can match on what went wrong without
/// caring which layer raised it.
#[derive(Debug, Error)]
pub enum Error {
    /// A query point or shift fell outside a spline's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// An object was too small to be well formed (e.g. a cubic spline
    /// with fewer than four coefficients).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A parameter violated its documented range.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A least-squares system was rank deficient.
    #[error("rank deficient system: {0}")]
    Rank(String),

    /// A buffer or sample set had the wrong length.
    #[error("length mismatch: {0}")]
    Length(String),

    /// An agent or sender id was out of range.
    #[error("unknown id: {0}")]
    Id(String),

    /// A configuration failed validation.
    #[error("config error: {0}")]
    Config(String),

    /// A linear solve failed (singular or ill-conditioned KKT system).
    #[error("solve failed: {0}")]
    Solve(String),

    /// A lookup key (e.g. a neighbor belief) was absent.
    #[error("missing key: {0}")]
    Key(String),

    /// Malformed textual input.
    #[error("parse error: {0}")]
    Parse(String),

    /// A search finished without finding any feasible point.
    #[error("infeasible: {0}")]
    Infeasible(String),
}

pub type Result<T> = std::result::Result<T, Error>;
