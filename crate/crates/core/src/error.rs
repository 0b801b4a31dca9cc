use alloc::string::String;

/// Errors raised by the pure chart-processing routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("point outside the calibrated range: {0}")]
    OutOfRange(String),
    #[error("invalid calibration: {0}")]
    InvalidCalibration(String),
    #[error("invalid chart spec: {0}")]
    InvalidSpec(String),
    #[error("layout failed: {0}")]
    Layout(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("chart slot {index} rejected {attempts} times, last rule: {rule}")]
    Generation { index: u64, attempts: u32, rule: String },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("duplicate chart id: {0}")]
    DuplicateChartId(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
