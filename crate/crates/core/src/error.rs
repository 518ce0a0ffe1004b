use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    MalformedRow { line: u64, message: String },

    #[error("line {line}: time {time_s} s does not strictly increase")]
    NonMonotoneTime { line: u64, time_s: f64 },

    #[error("missing mandatory column `{0}`")]
    MissingColumn(&'static str),

    #[error("invalid time series: {0}")]
    InvalidSeries(String),

    #[error("interval [{a}, {b}] s is outside the series range [{start}, {end}] s")]
    IntervalOutOfRange { a: f64, b: f64, start: f64, end: f64 },

    #[error("no complete aging cycle found")]
    NoCompleteCycle,

    #[error("sample {index} at t = {time_s} s: current {current_a} A matches no segment band")]
    MagnitudeOutOfBand { index: usize, time_s: f64, current_a: f64 },

    #[error("sample {index} at t = {time_s} s: current sign contradicts step label")]
    SignViolation { index: usize, time_s: f64 },

    #[error("C/20 charge span not found")]
    ChargeSpanNotFound,

    #[error("HPPC pulse not found: {0}")]
    PulseNotFound(&'static str),

    #[error("degenerate HPPC pulse: |dI| = {delta_i} A is below the {floor} A floor")]
    DegeneratePulse { delta_i: f64, floor: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("immediate cutoff: {0}")]
    ImmediateCutoff(String),

    #[error("feature `{0}` has zero variance")]
    ZeroVariance(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("missing feature `{0}`")]
    MissingFeature(String),

    #[error("zero label at index {0}")]
    ZeroLabel(usize),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("missing input: {}", .0.display())]
    MissingInput(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True when the failure was caused by the caller's inputs or
    /// parameters rather than by the toolkit itself.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Io(_))
    }

    /// Stable machine-readable tag for error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MalformedRow { .. } => "malformed_row",
            Error::NonMonotoneTime { .. } => "non_monotone_time",
            Error::MissingColumn(_) => "missing_column",
            Error::InvalidSeries(_) => "invalid_series",
            Error::IntervalOutOfRange { .. } => "interval_out_of_range",
            Error::NoCompleteCycle => "no_complete_cycle",
            Error::MagnitudeOutOfBand { .. } => "magnitude_out_of_band",
            Error::SignViolation { .. } => "sign_violation",
            Error::ChargeSpanNotFound => "charge_span_not_found",
            Error::PulseNotFound(_) => "pulse_not_found",
            Error::DegeneratePulse { .. } => "degenerate_pulse",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::ImmediateCutoff(_) => "immediate_cutoff",
            Error::ZeroVariance(_) => "zero_variance",
            Error::NonFinite(_) => "non_finite",
            Error::MissingFeature(_) => "missing_feature",
            Error::ZeroLabel(_) => "zero_label",
            Error::LengthMismatch(_) => "length_mismatch",
            Error::Schema(_) => "schema",
            Error::MissingInput(_) => "missing_input",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
