use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed map document: {0}")]
    MapParse(#[from] serde_json::Error),

    #[error("invalid map: {element}: {reason}")]
    MapValidation { element: String, reason: String },

    #[error("planner gave up after {iterations} iterations without reaching the goal")]
    PlanningFailure { iterations: usize },

    #[error("all weights are zero")]
    AllZeroWeights,

    #[error("trajectory does not cover steps {first}..={last} (covers {have_first}..={have_last})")]
    Coverage {
        first: usize,
        last: usize,
        have_first: usize,
        have_last: usize,
    },

    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid_map(element: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::MapValidation {
            element: element.into(),
            reason: reason.into(),
        }
    }
}
