use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid field `{field}`: {message}")]
    Parse { field: String, message: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("entry ({row}, {col}) = {value} exceeds its public supremum {sup}")]
    Membership {
        row: usize,
        col: usize,
        value: f64,
        sup: f64,
    },

    #[error("supremum entry ({row}, {col}) is not finite")]
    UnboundedSupremum { row: usize, col: usize },

    #[error("entry ({row}, {col}) is structurally zero but holds {value}")]
    MaskViolation { row: usize, col: usize, value: f64 },

    #[error("perturbed feasibility violated: no x >= 0 satisfies sup_A x <= b")]
    WorstCaseInfeasible,

    #[error("invalid privacy parameters: {0}")]
    InvalidPrivacy(String),

    #[error("support width needs at least one non-zero entry in the row")]
    EmptyRow,

    #[error("hoffman constant enumeration is capped at {cap} rows, got {rows}")]
    HoffmanSizeCap { rows: usize, cap: usize },

    #[error("no row subset admits a positive inner-cone minimum")]
    DegenerateHoffman,

    #[error("vertex enumeration over {count} candidate bases exceeds the limit")]
    VertexEnumerationTooLarge { count: u128 },

    #[error("feasible region is empty")]
    Infeasible,

    #[error("simplex iteration limit reached")]
    IterationLimit,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cost of privacy is undefined for non-positive optimal value {0}")]
    UndefinedMetric(f64),

    #[error("trial {trial} at epsilon {epsilon} produced an infeasible private problem")]
    TrialInfeasible { epsilon: f64, trial: usize },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
