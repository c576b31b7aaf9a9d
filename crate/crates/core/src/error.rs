use std::path::PathBuf;

use crate::ids::DeviceId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid challenge: {0}")]
    Challenge(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("payload of {len} bytes exceeds the {max}-byte limit")]
    PayloadTooLarge { len: usize, max: usize },

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("device {0} is already enrolled")]
    AlreadyEnrolled(DeviceId),

    #[error("enrolment of device {0} failed: no challenge passed screening")]
    EnrollmentFailed(DeviceId),

    #[error("device {0} is not enrolled")]
    NotFound(DeviceId),

    #[error("node {0} may not read the secure database")]
    AccessDenied(DeviceId),

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("malformed record: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
