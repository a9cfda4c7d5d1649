use thiserror::Error;

use crate::sensitivity::ActiveSetReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A cost model broke one of its standing assumptions (symmetry,
    /// positive definiteness, finite values) at a queried point.
    #[error("model violation for player {player}: {reason}")]
    ModelViolation { player: usize, reason: String },

    /// Farkas certificate: multipliers `y` over the stacked `[B; H]` rows with
    /// `Bᵀy_B + Hᵀy_H = 0`, `y_B >= 0` and `bᵀy_B + hᵀy_H < 0`.
    #[error("infeasible constraint set ({context})")]
    Infeasible { context: String, certificate: Vec<f64> },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("step {step:e} too large: residual grew to {residual:e}")]
    StepTooLarge { step: f64, residual: f64 },

    #[error("constraint qualification fails at the equilibrium: {}", describe_cq(.0))]
    CqViolation(Box<ActiveSetReport>),

    #[error("ill-conditioned system (condition number {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    /// Neumann series / Leontief inverse does not exist for the given weights.
    #[error("spectral condition violated: {0}")]
    Divergence(String),

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("monotonicity certificate refused: {0}")]
    CertificateRefused(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn describe_cq(report: &ActiveSetReport) -> String {
    let mut parts = Vec::new();
    if !report.full_row_rank {
        parts.push(format!(
            "active-constraint matrix has rank {} < {} rows",
            report.rank,
            report.a.nrows()
        ));
    }
    if !report.strict_complementarity {
        parts.push(format!(
            "strict complementarity fails on inequality rows {:?}",
            report.offending_rows
        ));
    }
    parts.join(", ")
}

impl Error {
    /// Stable machine-readable identifier used by the CLI error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::ModelViolation { .. } => "model_violation",
            Error::Infeasible { .. } => "infeasible",
            Error::NonConvergence { .. } => "non_convergence",
            Error::StepTooLarge { .. } => "step_too_large",
            Error::CqViolation(_) => "cq_violation",
            Error::IllConditioned { .. } => "ill_conditioned",
            Error::Singular(_) => "singular",
            Error::Divergence(_) => "divergence",
            Error::UnsupportedRegime(_) => "unsupported_regime",
            Error::CertificateRefused(_) => "certificate_refused",
            Error::Configuration(_) => "configuration",
            Error::Validation(_) => "validation",
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn dims(context: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            expected,
            found,
        }
    }
}
