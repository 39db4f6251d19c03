//! Hands-free zoom and pan driven by head pose.
//!
//! A stream of [`HeadPose`] samples passes through an outlier guard and a
//! bank of lean-scheduled Kalman filters, is normalized against a per-user
//! [`CalibrationProfile`], and is mapped by one of three interaction modes
//! onto a [`ViewState`] over a 2 m × 1 m virtual image plane.
//!
//! The crate also carries the offline tooling around the engine: pose trace
//! and trial log formats, a scripted trace synthesizer, per-trial metrics and
//! the repeated-measures statistics used to compare modes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub mod calibration;
pub mod filtering;
pub mod geometry;
pub mod metrics;
pub mod modes;
pub mod stats;
pub mod synth;
pub mod trace;
pub mod trial;

pub use calibration::{calibrate, normalize_lean, CalibrationError, CalibrationProfile, LeanCoordinate};
pub use filtering::{builtin_schedule, FilterBank, FilterSchedule, GuardConfig, ParamCurve};
pub use geometry::{forward_vector, place_plane, raycast_plane, HeadPose, ImagePlane, Orientation, PlaneHit, Vec3};
pub use metrics::MetricsReport;
pub use modes::{Engine, EngineConfig, EngineError, ViewState, ZoomRange};
pub use trace::PoseTrace;
pub use trial::{Outcome, TrialRecord};

/// Interaction technique.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Image ignores head motion; only the cursor ring moves.
    #[default]
    Static,
    /// Fixed plane; lean zooms, gaze ray pans.
    Parallel,
    /// Parallel plus a plane that turns to face the user and rolls with the head.
    Tilt,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Static, Mode::Parallel, Mode::Tilt];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Static => "static",
            Mode::Parallel => "parallel",
            Mode::Tilt => "tilt",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown mode `{0}` (expected static, parallel or tilt)")]
pub struct ParseModeError(pub String);

impl FromStr for Mode {
    type Err = ParseModeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "static" => Ok(Mode::Static),
            "parallel" => Ok(Mode::Parallel),
            "tilt" => Ok(Mode::Tilt),
            _ => Err(ParseModeError(s.to_string())),
        }
    }
}
