use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad classification used by front ends to choose an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad or unreadable input data, files or parameters.
    Input,
    /// Inputs are well formed but violate a precondition of the model.
    Model,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid tariff: {0}")]
    InvalidTariff(String),
    #[error("invalid amortized costs: {0}")]
    InvalidCosts(String),
    #[error("invalid period partition: {0}")]
    InvalidPartition(String),
    #[error("invalid panel model: {0}")]
    InvalidPanel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "degenerate tariff: peak buy price equals peak sell price (lambda_h = mu_h), the storage fractile is undefined"
    )]
    DegenerateTariff,
    #[error("storage sizing requires the strict price chain lambda_h > mu_h > lambda_l > mu_l")]
    StrictTariffRequired,
    #[error("closed-form solar sizing requires parity prices (lambda_h = mu_h, lambda_l = mu_l); use a numeric area scan instead")]
    ParityRequired,
    #[error("negative irradiance {0} W/m2 (clamp at ingest)")]
    NegativeIrradiance(f64),

    #[error("probability {0} outside the open interval (0, 1)")]
    ProbabilityOutOfRange(f64),
    #[error("distribution needs at least one sample")]
    EmptySamples,
    #[error("bandwidth estimate needs at least two samples, got {0}")]
    TooFewSamples(usize),
    #[error("samples have zero spread, bandwidth is undefined")]
    DegenerateSamples,
    #[error("non-finite sample value")]
    NonFiniteSample,
    #[error("kernel bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),

    #[error("invalid generator parameters: {0}")]
    InvalidLawParameters(String),

    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("line {line}: timestamp {timestamp} is not after the previous row")]
    NonMonotonicTimestamp { line: u64, timestamp: String },
    #[error("missing column `{0}` in header")]
    MissingColumn(String),
    #[error("input contains no data rows")]
    EmptyInput,
    #[error("config: {0}")]
    Config(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::DegenerateTariff
            | Error::StrictTariffRequired
            | Error::ParityRequired
            | Error::DegenerateSamples
            | Error::TooFewSamples(_) => ErrorKind::Model,
            _ => ErrorKind::Input,
        }
    }
}
