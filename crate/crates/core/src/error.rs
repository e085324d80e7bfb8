use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} <= tolerance)")]
    NotPositiveDefinite { pivot: usize },

    #[error("design restricted to the selected rows is rank deficient")]
    RankDeficient,

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("removing {} would collapse the rank (denominator {denominator:e})", .row.map(|r| format!("row {r}")).unwrap_or_else(|| "the row".into()))]
    RankCollapse { row: Option<usize>, denominator: f64 },

    #[error("row {row} is pivotal (leverage {leverage})")]
    PivotalRow { row: usize, leverage: f64 },

    #[error("IRLS did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("enumeration needs {subsets} subsets, budget is {budget}")]
    BudgetExceeded { subsets: u128, budget: u128 },

    #[error("unsupported noise distribution: {0}")]
    UnsupportedDistribution(String),

    #[error("alpha = {0} is outside the admissible range")]
    AlphaOutOfRange(f64),

    #[error("leading term of the finite-sample lower bound is not positive ({0})")]
    LeadingTermNonpositive(f64),

    #[error("rho = {0} >= 1")]
    RhoTooLarge(f64),

    #[error("bound condition violated: {lhs} > {limit}")]
    ConditionViolated { lhs: f64, limit: f64 },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("non-finite value in row {row}, column `{column}`")]
    NonFiniteValue { row: usize, column: String },

    #[error("no rows left after applying the drop list")]
    EmptyAfterDrops,

    #[error("{failed} of {total} replicates failed")]
    TooManyFailures { failed: usize, total: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. }
                | Error::RankDeficient
                | Error::RankCollapse { .. }
                | Error::PivotalRow { .. }
                | Error::NoConvergence { .. }
                | Error::LeadingTermNonpositive(_)
                | Error::RhoTooLarge(_)
                | Error::ConditionViolated { .. }
                | Error::TooManyFailures { .. }
        )
    }
}
