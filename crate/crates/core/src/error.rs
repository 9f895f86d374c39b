use chrono::NaiveDate;
use thiserror::Error;

use crate::trace::Bssid;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid value: {0}")]
    Validation(String),

    #[error("records out of order: ts {next} follows ts {prev}")]
    Ordering { prev: i64, next: i64 },

    #[error("day {new} is not later than the newest window day {newest}")]
    DayOrder { newest: NaiveDate, new: NaiveDate },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("no nightly dwell data in any trace")]
    NoNightData,

    #[error("no home arrival detected on {0}")]
    NoArrival(NaiveDate),

    #[error("bssid {0} is unknown to both the window and the fallback map")]
    UnknownBssid(Bssid),

    #[error("profile covers {days} day(s) of history, need {required} before predicting")]
    ColdStart { days: i64, required: i64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("nearest-neighbor history is empty")]
    NoHistory,

    #[error("dataset spans {days} day(s); evaluation needs more than {required}")]
    InsufficientHistory { days: usize, required: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
