use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} joint values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid robot model: {0}")]
    InvalidModel(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("reachability map would enumerate {projected} configurations, above the cap of {cap}")]
    MapTooLarge { projected: u128, cap: u64 },

    #[error("malformed reachability map file: {0}")]
    MapFormat(String),

    #[error("reachability map was built for robot {expected}, but the robot hashes to {found}")]
    RobotMismatch { expected: String, found: String },

    #[error("no favoured base placements survived filtering")]
    NoFavouredPlacements,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
