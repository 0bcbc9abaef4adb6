//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by region construction, estimators, and the exact
/// enumeration oracle.
#[derive(Debug, Error)]
pub enum PercError {
    /// A region constructor received parameters that do not describe a
    /// valid region (negative radius, inverted rectangle bounds, ...).
    #[error("invalid region: {0}")]
    InvalidRegion(String),

    /// An operation required a sub-region of the configuration window but
    /// was handed sites or edges outside it.
    #[error("region not contained in configuration window: {0}")]
    RegionOutsideWindow(String),

    /// Estimator or construction parameters violate a documented
    /// precondition (even grid side, 3t > s, probability outside [0,1], ...).
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    /// A circuit operation was applied to a region that is not an annulus
    /// with a nonempty hole.
    #[error("not an annulus: {0}")]
    NotAnAnnulus(String),

    /// Exact enumeration refuses windows with more free edges than the cap.
    #[error("enumeration over {edges} free edges exceeds the cap of {cap}")]
    EnumerationCapExceeded { edges: usize, cap: usize },

    /// Conditional expectation against an event of probability zero.
    #[error("conditioning event has probability zero")]
    ZeroProbabilityConditioning,

    /// A conditional Monte Carlo estimate accepted too few samples to
    /// report a meaningful value.
    #[error("insufficient support: accepted {accepted} samples, need at least {required}")]
    InsufficientSupport { accepted: u64, required: u64 },

    /// The parameter search exhausted its grid without satisfying every
    /// inequality; the report names the first violated constraint per
    /// candidate.
    #[error("{0}")]
    Infeasible(String),

    /// Checkpoint or snapshot text did not parse.
    #[error("malformed input: {0}")]
    Malformed(String),
}
