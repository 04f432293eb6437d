use thiserror::Error;

pub type Result<T> = std::result::Result<T, HjError>;

#[derive(Debug, Error)]
pub enum HjError {
    /// Malformed or out-of-range input, tagged with the offending field.
    #[error("invalid input `{field}`: {message}")]
    Input { field: String, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("CFL violation: dt = {dt} exceeds h / alpha = {limit}")]
    Cfl { dt: f64, limit: f64 },

    #[error("numerical blow-up at t = {t}, node {node} (x = {x}): value {value}")]
    BlowUp {
        t: f64,
        node: usize,
        x: f64,
        value: f64,
    },

    #[error("envelope undefined at node {0}: every neighbour is exceptional")]
    EmptyNeighbourhood(usize),

    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("scenario parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

impl HjError {
    pub fn input(field: impl Into<String>, message: impl Into<String>) -> Self {
        HjError::Input {
            field: field.into(),
            message: message.into(),
        }
    }
}
