use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("coordinate out of range: lat {lat}, lon {lon}")]
    InvalidCoordinate { lat: f64, lon: f64 },

    #[error("accuracy must be a positive finite number of meters, got {0}")]
    InvalidAccuracy(f64),

    #[error("timestamps must be strictly increasing: {prev} ms then {cur} ms")]
    TimestampOrder { prev: i64, cur: i64 },

    #[error("invalid trace {session_id}: {reason}")]
    InvalidTrace { session_id: String, reason: String },

    #[error("signal set must not be empty")]
    EmptySignalSet,

    #[error("invalid weight profile: {0}")]
    InvalidProfile(String),

    #[error("profile covers {profile} but signals present are {present}")]
    ProfileMismatch { profile: String, present: String },

    #[error("invalid thresholds: theta_p = {theta_p}, theta_s = {theta_s}")]
    InvalidThresholds { theta_p: f64, theta_s: f64 },

    #[error("trust score must lie in [0, 1], got {0}")]
    InvalidScore(f64),

    #[error("fix for session {got} routed to session {expected}")]
    SessionMismatch { expected: String, got: String },

    #[error("step-up resolution requested but the session latch is {0}")]
    NotStepUpLatched(&'static str),

    #[error("trace {0} carries no ground-truth label")]
    MissingLabel(String),

    #[error("both classes must be present")]
    SingleClass,

    #[error("input must not be empty")]
    EmptyInput,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by reading or writing files.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
