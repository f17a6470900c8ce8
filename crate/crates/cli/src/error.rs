use duplex_agent::checkpoint::CheckpointError;
use duplex_agent::AgentError;
use duplex_core::backtest::BacktestError;
use duplex_core::data::DataError;
use duplex_core::env::EnvError;
use duplex_core::metrics::MetricsError;
use duplex_core::sppo::SppoError;
use duplex_core::trace::TraceError;
use thiserror::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Data(_) => EXIT_DATA,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }

    pub fn context(self, what: impl std::fmt::Display) -> Self {
        match self {
            CliError::Config(m) => CliError::Config(format!("{what}: {m}")),
            CliError::Data(m) => CliError::Data(format!("{what}: {m}")),
            CliError::Runtime(m) => CliError::Runtime(format!("{what}: {m}")),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<TraceError> for CliError {
    fn from(e: TraceError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<EnvError> for CliError {
    fn from(e: EnvError) -> Self {
        match e {
            EnvError::InvalidConfig(m) => CliError::Config(m),
            EnvError::InsufficientData(m) => CliError::Data(m),
            e => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<SppoError> for CliError {
    fn from(e: SppoError) -> Self {
        match e {
            SppoError::InvalidConfig(m) => CliError::Config(m),
            e => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<BacktestError> for CliError {
    fn from(e: BacktestError) -> Self {
        match e {
            BacktestError::Env(e) => e.into(),
            BacktestError::Sppo(e) => e.into(),
            e => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        match e {
            CheckpointError::SpecMismatch(_) | CheckpointError::Version(_) => CliError::Config(e.to_string()),
            e => CliError::Data(e.to_string()),
        }
    }
}

impl From<AgentError> for CliError {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::Config(m) => CliError::Config(m),
            AgentError::Network(e) => CliError::Config(e.to_string()),
            AgentError::Env(e) => e.into(),
            AgentError::Checkpoint(e) => e.into(),
            e => CliError::Runtime(e.to_string()),
        }
    }
}
