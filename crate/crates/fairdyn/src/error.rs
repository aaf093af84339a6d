//! Crate-wide error type.

/// Errors surfaced by the library.
///
/// Variants split into two broad classes: input/domain problems (bad
/// parameters, malformed data) and numerical failures (an iteration that
/// should have converged but did not). [`Error::is_numerical`] exposes the
/// distinction so callers can map them to different exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument fell outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A fair-policy offset violated the bound required for valid Beta shapes.
    #[error("policy parameter bound violated: {0}")]
    ParameterBound(String),

    /// The threshold excludes the entire population, so the selected mean is
    /// undefined (0/0). Callers that can take the analytic limit handle this
    /// themselves; see `dynamics::step_mean`.
    #[error("degenerate selection: threshold {threshold} admits no one (p+ = 0)")]
    DegenerateSelection { threshold: f64 },

    /// A histogram has no valid Beta fit (zero variance, or variance at or
    /// above the Bernoulli limit mu(1-mu)).
    #[error("degenerate histogram: {0}")]
    DegenerateHistogram(String),

    /// Groups were required to share a shape parameter but do not.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// An operation requires a specific number of groups.
    #[error("group count: expected {expected}, got {got}")]
    GroupCount { expected: usize, got: usize },

    /// An iteration failed to converge. This signals a bug or a pathological
    /// input, never an expected outcome for valid parameters.
    #[error("convergence failure in {context}: {detail}")]
    Convergence {
        context: &'static str,
        detail: String,
    },

    /// Malformed input data, with location diagnostics where available.
    #[error("parse error in {path} (record {record}): {detail}")]
    Parse {
        path: String,
        record: usize,
        detail: String,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Convergence { .. } | Error::DegenerateSelection { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
