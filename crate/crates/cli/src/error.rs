use recall_core::aggregate::AggregateError;
use recall_core::dataset::DatasetError;
use recall_core::dbscan::DbscanError;
use recall_core::openfda_client::FetchError;
use recall_core::report::ReportError;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Network(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Contract(String),
    #[error("{0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Network(_) => 3,
            CliError::Data(_) => 4,
            CliError::Contract(_) => 5,
            CliError::Output(_) => 6,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Network(_) => "network",
            CliError::Data(_) => "data",
            CliError::Contract(_) => "contract",
            CliError::Output(_) => "output",
        }
    }

    /// One-line JSON for stderr.
    pub fn to_line(&self) -> String {
        #[derive(Serialize)]
        struct Line<'a> {
            error: &'a str,
            code: i32,
            message: String,
        }
        serde_json::to_string(&Line {
            error: self.kind(),
            code: self.exit_code(),
            message: self.to_string().replace(['\n', '\r'], " "),
        })
        .expect("error line serializes")
    }
}

impl From<FetchError> for CliError {
    fn from(e: FetchError) -> Self {
        match &e {
            FetchError::InvalidSpec(_) => CliError::Usage(e.to_string()),
            _ if e.is_network() => CliError::Network(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<DbscanError> for CliError {
    fn from(e: DbscanError) -> Self {
        match e {
            DbscanError::InvalidParams(_) => CliError::Usage(e.to_string()),
            _ => CliError::Contract(e.to_string()),
        }
    }
}

impl From<AggregateError> for CliError {
    fn from(e: AggregateError) -> Self {
        match e {
            AggregateError::InvalidParams(_) => CliError::Usage(e.to_string()),
            AggregateError::DuplicateLabel(_) | AggregateError::ZeroCount(_) => CliError::Contract(e.to_string()),
            AggregateError::OverrideIo { .. } | AggregateError::OverrideFormat { .. } => CliError::Data(e.to_string()),
        }
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Empty => CliError::Data(e.to_string()),
            ReportError::UnsupportedFormat(_) => CliError::Usage(e.to_string()),
        }
    }
}
