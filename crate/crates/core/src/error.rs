use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("agents {i} and {j} are at degenerate distance {dist:e}")]
    DegenerateDistance { i: usize, j: usize, dist: f64 },

    #[error("agent {agent} is at degenerate distance {dist:e} from the obstacle surface")]
    DegenerateObstacleDistance { agent: usize, dist: f64 },

    #[error("agent {agent} is inside the obstacle")]
    AgentInsideObstacle { agent: usize },

    #[error("relaxation did not reach schooling within t_max = {t_max}")]
    NoConvergence { t_max: f64 },

    #[error("gap {gap} is too small: need more than {required}")]
    GapTooSmall { gap: f64, required: f64 },

    #[error("trajectory ends at t = {t_end}, before the required time {required}")]
    HorizonTooShort { t_end: f64, required: f64 },

    #[error("not all trials are schooling at the starting noise level {sigma}")]
    NotSchoolingAtStart { sigma: f64 },

    #[error("no schooling failure found up to sigma_max = {sigma_max}")]
    NoBreakBelowMax { sigma_max: f64 },

    #[error("every grid point failed: {0}")]
    AllPointsFailed(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
