use thiserror::Error;

use crate::ode::OdeError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({u1}, {u2}) lies outside the chart")]
    Domain { u1: f64, u2: f64 },
    #[error("theta is undefined at ({u1}, {u2})")]
    UndefinedPoint { u1: f64, u2: f64 },
    #[error("integration broke down near a singular locus: {0}")]
    Singularity(OdeError),
    #[error("numerical budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("no shooting solution found: {reason}\n{trace}")]
    NotFound { reason: String, trace: String },
    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid boundary condition: {0}")]
    InvalidBoundary(String),
    #[error("mesh error: {0}")]
    Mesh(String),
    #[error("threshold {threshold} lies within {gap:e} of a discrete eigenvalue {eigenvalue}; refine the mesh")]
    Ambiguous {
        threshold: f64,
        gap: f64,
        eigenvalue: f64,
    },
    #[error("operators do not match: {0}")]
    OperatorMismatch(String),
    #[error("function is numerically zero on the whole mesh")]
    DegenerateFunction,
    #[error("known-field tag {tag} does not apply to the {model} model")]
    TagMismatch { tag: &'static str, model: &'static str },
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error("cache: {0}")]
    Cache(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, looking through stage tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    /// Whether the failure came from running out of a numerical budget
    /// (step counts, refinement limits, singular breakdown) rather than from
    /// bad input.
    pub fn is_numerical_budget(&self) -> bool {
        matches!(
            self.root(),
            Error::BudgetExceeded(_)
                | Error::Singularity(_)
                | Error::NotFound { .. }
                | Error::Ambiguous { .. }
                | Error::InternalConsistency(_)
        )
    }
}

impl From<OdeError> for Error {
    fn from(e: OdeError) -> Self {
        match e {
            OdeError::BudgetExceeded { .. } => Error::BudgetExceeded(e.to_string()),
            other => Error::Singularity(other),
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
