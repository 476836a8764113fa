use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the localization library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid direction: azimuth {azimuth} deg, elevation {elevation} deg")]
    InvalidDirection { azimuth: f64, elevation: f64 },
    #[error("no microphone pair is closer than {threshold_m:.5} m (v / f_max); lower f_max")]
    EmptyPairSet { threshold_m: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("signal too short: {len} samples, frame needs {frame_len}")]
    SignalTooShort { len: usize, frame_len: usize },
    #[error("covariance window is empty")]
    EmptyWindow,
    #[error("Jacobi eigendecomposition did not converge after {sweeps} sweeps")]
    ConvergenceFailure { sweeps: usize },
    #[error("invalid source count {qhat} for {mics} microphones")]
    InvalidSourceCount { qhat: usize, mics: usize },
    #[error("delay of {tau_s} s does not fit a signal of {duration_s} s")]
    DelayTooLarge { tau_s: f64, duration_s: f64 },
    #[error("estimate and truth trajectories do not overlap")]
    NoOverlap,
    #[error("nothing to score")]
    EmptyInput,
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("unsupported WAV format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt WAV header at byte {offset}: {detail}")]
    CorruptHeader { offset: u64, detail: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {detail}")]
    Parse { path: PathBuf, detail: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, detail: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            detail: detail.to_string(),
        }
    }
}
