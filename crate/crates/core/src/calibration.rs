//! Per-user lean calibration and the normalized lean coordinate.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{wrap_angle, HeadPose, Orientation, Vec3};

/// Minimum number of samples per captured pose.
pub const MIN_CALIBRATION_SAMPLES: usize = 30;
/// Smallest accepted lean limit in meters.
pub const MIN_LEAN_LIMIT: f64 = 0.01;

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("insufficient samples for {pose} pose: {found} < {required}")]
    InsufficientSamples {
        pose: &'static str,
        found: usize,
        required: usize,
    },
    #[error("InvertedLimits: forward lean {forward:.4} m / backward lean {backward:.4} m must both be positive")]
    InvertedLimits { forward: f64, backward: f64 },
    #[error("lean limit {0:.4} m is below the {MIN_LEAN_LIMIT} m minimum")]
    LimitTooSmall(f64),
    #[error("calibration samples contain non-finite values")]
    NonFinite,
    #[error("neutral pose looks straight up or down; lean axis undefined")]
    DegenerateAxis,
    #[error("invalid lean axis: must be unit length and horizontal")]
    InvalidAxis,
    #[error("profile parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Neutral pose and comfortable lean range of one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationProfile {
    neutral: HeadPose,
    forward_limit: f64,
    backward_limit: f64,
    lean_axis: Vec3,
}

/// Normalized lean: 0 = backward limit, 0.5 = neutral, 1 = forward limit.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LeanCoordinate(f64);

impl LeanCoordinate {
    pub const NEUTRAL: LeanCoordinate = LeanCoordinate(0.5);

    /// Clamps into [0, 1]; NaN maps to neutral.
    pub fn new(x: f64) -> Self {
        if x.is_nan() {
            Self::NEUTRAL
        } else {
            LeanCoordinate(x.clamp(0.0, 1.0))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl CalibrationProfile {
    /// Builds a profile from explicit parameters, validating the invariants.
    pub fn new(
        neutral: HeadPose,
        forward_limit: f64,
        backward_limit: f64,
        lean_axis: Vec3,
    ) -> Result<Self, CalibrationError> {
        if !neutral.position.is_finite() || !forward_limit.is_finite() || !backward_limit.is_finite() {
            return Err(CalibrationError::NonFinite);
        }
        if forward_limit <= 0.0 || backward_limit <= 0.0 {
            return Err(CalibrationError::InvertedLimits {
                forward: forward_limit,
                backward: -backward_limit,
            });
        }
        for limit in [forward_limit, backward_limit] {
            if limit <= MIN_LEAN_LIMIT {
                return Err(CalibrationError::LimitTooSmall(limit));
            }
        }
        if lean_axis.y != 0.0 || (lean_axis.norm() - 1.0).abs() > 1e-9 {
            return Err(CalibrationError::InvalidAxis);
        }
        Ok(CalibrationProfile {
            neutral,
            forward_limit,
            backward_limit,
            lean_axis,
        })
    }

    /// Profile whose lean axis is the horizontal direction of `yaw`.
    pub fn with_heading(
        neutral_position: Vec3,
        yaw: f64,
        forward_limit: f64,
        backward_limit: f64,
    ) -> Result<Self, CalibrationError> {
        let neutral = HeadPose::new(0.0, neutral_position, Orientation::new(wrap_angle(yaw), 0.0, 0.0));
        Self::new(neutral, forward_limit, backward_limit, horizontal_axis(yaw))
    }

    pub fn neutral(&self) -> &HeadPose {
        &self.neutral
    }

    pub fn forward_limit(&self) -> f64 {
        self.forward_limit
    }

    pub fn backward_limit(&self) -> f64 {
        self.backward_limit
    }

    pub fn lean_axis(&self) -> Vec3 {
        self.lean_axis
    }

    /// Signed displacement from neutral along the lean axis; positive is towards the image.
    pub fn displacement(&self, p: Vec3) -> f64 {
        (p - self.neutral.position).dot(self.lean_axis)
    }

    pub fn normalize(&self, p: Vec3) -> LeanCoordinate {
        normalize_lean(p, self)
    }

    /// Serializes to the `key = values` text format read by [`Self::parse`].
    pub fn to_text(&self) -> String {
        let n = &self.neutral;
        let mut s = String::from("# headzoom calibration profile (meters, radians)\n");
        let _ = writeln!(s, "neutral_position = {} {} {}", n.position.x, n.position.y, n.position.z);
        let _ = writeln!(
            s,
            "neutral_orientation = {} {} {}",
            n.orientation.yaw, n.orientation.pitch, n.orientation.roll
        );
        let _ = writeln!(s, "neutral_timestamp_ms = {}", n.timestamp_ms);
        let _ = writeln!(s, "forward_limit = {}", self.forward_limit);
        let _ = writeln!(s, "backward_limit = {}", self.backward_limit);
        let _ = writeln!(s, "lean_axis = {} {} {}", self.lean_axis.x, self.lean_axis.y, self.lean_axis.z);
        s
    }

    pub fn parse(text: &str) -> Result<Self, CalibrationError> {
        let mut position = None;
        let mut orientation = Orientation::default();
        let mut timestamp = 0.0;
        let mut forward = None;
        let mut backward = None;
        let mut axis = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| CalibrationError::Parse { line: line_no, message };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected `key = value`".into()))?;
            let nums = value
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| err(format!("bad number: {e}")))?;
            let want = |n: usize| -> Result<(), CalibrationError> {
                if nums.len() == n {
                    Ok(())
                } else {
                    Err(err(format!("`{}` expects {n} values, got {}", key.trim(), nums.len())))
                }
            };
            match key.trim() {
                "neutral_position" => {
                    want(3)?;
                    position = Some(Vec3::new(nums[0], nums[1], nums[2]));
                }
                "neutral_orientation" => {
                    want(3)?;
                    orientation = Orientation::new(nums[0], nums[1], nums[2]);
                }
                "neutral_timestamp_ms" => {
                    want(1)?;
                    timestamp = nums[0];
                }
                "forward_limit" => {
                    want(1)?;
                    forward = Some(nums[0]);
                }
                "backward_limit" => {
                    want(1)?;
                    backward = Some(nums[0]);
                }
                "lean_axis" => {
                    want(3)?;
                    axis = Some(Vec3::new(nums[0], nums[1], nums[2]));
                }
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        let missing = |name: &str| CalibrationError::Parse {
            line: 0,
            message: format!("missing key `{name}`"),
        };
        let position = position.ok_or_else(|| missing("neutral_position"))?;
        let axis = axis.unwrap_or_else(|| horizontal_axis(orientation.yaw));
        Self::new(
            HeadPose::new(timestamp, position, orientation),
            forward.ok_or_else(|| missing("forward_limit"))?,
            backward.ok_or_else(|| missing("backward_limit"))?,
            axis,
        )
    }

    pub fn load(path: &Path) -> Result<Self, CalibrationError> {
        let text = std::fs::read_to_string(path).map_err(|source| CalibrationError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), CalibrationError> {
        std::fs::write(path, self.to_text()).map_err(|source| CalibrationError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

fn horizontal_axis(yaw: f64) -> Vec3 {
    let (s, c) = yaw.sin_cos();
    Vec3::new(s, 0.0, c)
}

/// Incremental mean; exact for constant input.
fn running_mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut mean = 0.0;
    for (k, v) in values.enumerate() {
        mean += (v - mean) / (k + 1) as f64;
    }
    mean
}

/// Mean of angles as wrapped offsets from the first one.
fn angular_mean(angles: &[f64]) -> f64 {
    let reference = angles[0];
    wrap_angle(reference + running_mean(angles.iter().map(|a| wrap_angle(a - reference))))
}

fn mean_pose(samples: &[HeadPose]) -> HeadPose {
    let component = |f: fn(&HeadPose) -> f64| running_mean(samples.iter().map(f));
    let yaws: Vec<f64> = samples.iter().map(|s| s.orientation.yaw).collect();
    let rolls: Vec<f64> = samples.iter().map(|s| s.orientation.roll).collect();
    HeadPose::new(
        component(|s| s.timestamp_ms),
        Vec3::new(
            component(|s| s.position.x),
            component(|s| s.position.y),
            component(|s| s.position.z),
        ),
        Orientation::new(angular_mean(&yaws), component(|s| s.orientation.pitch), angular_mean(&rolls)),
    )
}

fn mean_projection(samples: &[HeadPose], axis: Vec3) -> f64 {
    running_mean(samples.iter().map(|s| s.position.dot(axis)))
}

/// Averages the three captured poses into a profile.
///
/// The lean axis is the horizontal facing direction of the mean neutral pose;
/// limits are the distances of the mean forward/backward projections from the
/// neutral projection along that axis.
pub fn calibrate(
    neutral: &[HeadPose],
    forward: &[HeadPose],
    backward: &[HeadPose],
) -> Result<CalibrationProfile, CalibrationError> {
    for (pose, samples) in [("neutral", neutral), ("forward", forward), ("backward", backward)] {
        if samples.len() < MIN_CALIBRATION_SAMPLES {
            return Err(CalibrationError::InsufficientSamples {
                pose,
                found: samples.len(),
                required: MIN_CALIBRATION_SAMPLES,
            });
        }
        if samples.iter().any(|s| !s.position.is_finite() || !s.orientation.is_finite()) {
            return Err(CalibrationError::NonFinite);
        }
    }
    let neutral_pose = mean_pose(neutral);
    if neutral_pose.orientation.pitch.cos().abs() <= 1e-6 {
        return Err(CalibrationError::DegenerateAxis);
    }
    let axis = horizontal_axis(neutral_pose.orientation.yaw);
    let origin = neutral_pose.position.dot(axis);
    let forward_d = mean_projection(forward, axis) - origin;
    let backward_d = mean_projection(backward, axis) - origin;
    if forward_d <= 0.0 || backward_d >= 0.0 {
        return Err(CalibrationError::InvertedLimits {
            forward: forward_d,
            backward: backward_d,
        });
    }
    CalibrationProfile::new(neutral_pose, forward_d, -backward_d, axis)
}

/// Two-segment linear map of lean displacement onto [0, 1], clamped.
pub fn normalize_lean(p: Vec3, profile: &CalibrationProfile) -> LeanCoordinate {
    let d = profile.displacement(p);
    let x = if d >= 0.0 {
        0.5 + 0.5 * d / profile.forward_limit
    } else {
        0.5 - 0.5 * (-d) / profile.backward_limit
    };
    LeanCoordinate::new(x)
}
