use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("value `{value}` is not in the domain of `{var}`")]
    UnknownValue { var: String, value: String },

    #[error("duplicate name `{0}`")]
    DuplicateName(String),

    #[error("invalid distribution for `{name}`: {reason}")]
    InvalidDistribution { name: String, reason: String },

    #[error("mechanism for `{var}` is missing table entry `{key}`")]
    MissingTableEntry { var: String, key: String },

    #[error("invalid mechanism for `{var}`: {reason}")]
    Mechanism { var: String, reason: String },

    #[error("mechanism graph is cyclic: {0}")]
    Cycle(String),

    #[error("invalid roles: {0}")]
    Roles(String),

    #[error("exogenous joint has {states} states, above the enumeration limit of {limit}")]
    Capacity { states: u128, limit: u64 },

    #[error("invalid noise state: {0}")]
    Noise(String),

    #[error("conditioning event has zero probability: {0}")]
    ZeroProbability(String),

    #[error("invalid query: {0}")]
    Query(String),

    #[error("invalid table: {0}")]
    Table(String),

    #[error("utility is not outcome dependent: {0}")]
    OutcomeDependence(String),

    #[error("phi = {phi} is outside the admissible range [{lower}, {upper}]")]
    PhiOutOfBounds { phi: f64, lower: f64, upper: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {message}")]
    Schema { path: String, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}
