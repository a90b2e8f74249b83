use thiserror::Error;

use crate::deflection::WheelPose;
use crate::rover::{LocomotionMode, WheelId};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("lateral velocity unsupported in {0}")]
    LateralVelocityUnsupported(LocomotionMode),

    #[error("yaw rate unsupported in {0}")]
    YawRateUnsupported(LocomotionMode),

    #[error("translation unsupported in {0}")]
    TranslationUnsupported(LocomotionMode),

    #[error("steering limit exceeded at {wheel}: {angle_deg:.3} deg")]
    SteeringLimitExceeded { wheel: WheelId, angle_deg: f64 },

    #[error("non-positive duration {0} s")]
    NonPositiveDuration(f64),

    #[error("non-positive integration step {0} s")]
    NonPositiveStep(f64),

    #[error("underdetermined calibration: {rows} rows for {params} free parameters")]
    UnderdeterminedCalibration { rows: usize, params: usize },

    #[error("undefined at zero velocity")]
    ZeroVelocity,

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("wheel behind camera")]
    WheelBehindCamera,

    #[error("pose fit needs at least {needed} points per loop, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("pose fit did not converge after {iterations} iterations (rms {rms_px:.6} px)")]
    NonConvergence {
        iterations: usize,
        rms_px: f64,
        best: Box<WheelPose>,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("non-unit quaternion at line {0}")]
    NonUnitQuaternion(usize),

    #[error("no temporal overlap")]
    NoTemporalOverlap,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    /// Non-convergence is a numerical failure; everything else is a data or input problem.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonConvergence { .. })
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let line = err.position().map(|p| p.line() as usize).unwrap_or(0);
        Error::parse(line, err.to_string())
    }
}
