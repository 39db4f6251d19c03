//! Mode controllers and the per-tick engine pipeline
//! (guard → filter → normalize → mode tick → clamp).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{normalize_lean, CalibrationProfile, LeanCoordinate};
use crate::filtering::{builtin_schedule, FilterBank, FilterOutcome, FilterSchedule, GuardConfig};
use crate::geometry::{place_plane, raycast_plane, wrap_angle, GeometryError, HeadPose, ImagePlane, Orientation, PLANE_DISTANCE};
use crate::Mode;

const CENTER_UV: (f64, f64) = (0.5, 0.5);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("NotCalibrated: {0} mode requires a calibration profile")]
    NotCalibrated(Mode),
    #[error("invalid zoom range [{min}, {max}]: need 1 <= min < max")]
    InvalidZoomRange { min: f64, max: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawZoomRange")]
pub struct ZoomRange {
    min: f64,
    max: f64,
}

#[derive(Deserialize)]
struct RawZoomRange {
    min: f64,
    max: f64,
}

impl TryFrom<RawZoomRange> for ZoomRange {
    type Error = EngineError;
    fn try_from(r: RawZoomRange) -> Result<Self, EngineError> {
        ZoomRange::new(r.min, r.max)
    }
}

impl ZoomRange {
    pub fn new(min: f64, max: f64) -> Result<Self, EngineError> {
        if !(min >= 1.0) || !(max > min) || !max.is_finite() {
            return Err(EngineError::InvalidZoomRange { min, max });
        }
        Ok(ZoomRange { min, max })
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn span(&self) -> f64 {
        self.max - self.min
    }

    pub fn clamp(&self, zoom: f64) -> f64 {
        zoom.clamp(self.min, self.max)
    }
}

impl Default for ZoomRange {
    fn default() -> Self {
        ZoomRange { min: 1.0, max: 8.0 }
    }
}

/// Linear lean-to-zoom map over the calibrated range.
pub fn zoom_from_lean(x: LeanCoordinate, zr: &ZoomRange) -> f64 {
    zr.clamp(zr.min + x.value() * zr.span())
}

/// Eye-to-image distance that produces `zoom` by moving the viewpoint.
/// Renderers keep their field of view fixed and dolly to this distance.
pub fn plane_distance(zoom: f64) -> f64 {
    PLANE_DISTANCE / zoom
}

/// Output of one engine tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewState {
    pub timestamp_ms: f64,
    pub mode: Mode,
    pub zoom: f64,
    /// Image point centered on screen.
    pub pan_uv: (f64, f64),
    /// Image point under the cursor ring.
    pub cursor_uv: (f64, f64),
    pub lean_x: f64,
    pub plane: ImagePlane,
}

impl ViewState {
    pub fn plane_distance(&self) -> f64 {
        plane_distance(self.zoom)
    }

    /// Equality on everything except the timestamp.
    pub fn same_view(&self, other: &ViewState) -> bool {
        ViewState {
            timestamp_ms: other.timestamp_ms,
            ..*self
        } == *other
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub mode: Mode,
    pub zoom: ZoomRange,
    pub guard: GuardConfig,
    /// Replaces the built-in Q/R curves for the configured mode.
    pub schedule: Option<FilterSchedule>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            mode: Mode::Static,
            zoom: ZoomRange::default(),
            guard: GuardConfig::default(),
            schedule: None,
        }
    }
}

impl EngineConfig {
    pub fn with_mode(mode: Mode) -> Self {
        EngineConfig {
            mode,
            ..EngineConfig::default()
        }
    }

    pub fn schedule(&self) -> FilterSchedule {
        match &self.schedule {
            Some(s) => FilterSchedule {
                mode: self.mode,
                ..s.clone()
            },
            None => builtin_schedule(self.mode),
        }
    }
}

/// Static: the image is inert, the cursor still follows the gaze ray.
pub fn tick_static(
    pose: &HeadPose,
    lean: LeanCoordinate,
    plane: &ImagePlane,
    zr: &ZoomRange,
    previous_cursor: (f64, f64),
) -> ViewState {
    let cursor_uv = raycast_plane(pose.position, pose.forward(), plane)
        .map(|h| h.uv)
        .unwrap_or(previous_cursor);
    ViewState {
        timestamp_ms: pose.timestamp_ms,
        mode: Mode::Static,
        zoom: zr.min(),
        pan_uv: CENTER_UV,
        cursor_uv,
        lean_x: lean.value(),
        plane: *plane,
    }
}

/// Parallel: fixed plane, zoom from lean, pan at the gaze hit.
pub fn tick_parallel(
    pose: &HeadPose,
    profile: &CalibrationProfile,
    plane: &ImagePlane,
    zr: &ZoomRange,
    previous_cursor: (f64, f64),
) -> ViewState {
    let lean = normalize_lean(pose.position, profile);
    let cursor_uv = raycast_plane(pose.position, pose.forward(), plane)
        .map(|h| h.uv)
        .unwrap_or(previous_cursor);
    ViewState {
        timestamp_ms: pose.timestamp_ms,
        mode: Mode::Parallel,
        zoom: zoom_from_lean(lean, zr),
        pan_uv: cursor_uv,
        cursor_uv,
        lean_x: lean.value(),
        plane: *plane,
    }
}

/// Orientation that makes the plane at `center` face `eye`, rolled by `roll`.
pub fn facing_orientation(center: crate::Vec3, eye: crate::Vec3, roll: f64) -> Option<Orientation> {
    let view = (center - eye).normalized()?;
    Some(Orientation::new(
        view.x.atan2(view.z),
        view.y.clamp(-1.0, 1.0).asin(),
        wrap_angle(roll),
    ))
}

/// Tilt: the plane keeps its center, turns to face the head and copies its roll.
pub fn tick_tilt(
    pose: &HeadPose,
    profile: &CalibrationProfile,
    previous_plane: &ImagePlane,
    zr: &ZoomRange,
    previous_cursor: (f64, f64),
) -> ViewState {
    let lean = normalize_lean(pose.position, profile);
    let orientation = facing_orientation(previous_plane.center, pose.position, pose.orientation.roll)
        .unwrap_or(previous_plane.orientation);
    let plane = ImagePlane {
        orientation,
        ..*previous_plane
    };
    let cursor_uv = raycast_plane(pose.position, pose.forward(), &plane)
        .map(|h| h.uv)
        .unwrap_or(previous_cursor);
    ViewState {
        timestamp_ms: pose.timestamp_ms,
        mode: Mode::Tilt,
        zoom: zoom_from_lean(lean, zr),
        pan_uv: cursor_uv,
        cursor_uv,
        lean_x: lean.value(),
        plane,
    }
}

/// Single-user sequential engine.
#[derive(Debug, Clone)]
pub struct Engine {
    config: EngineConfig,
    profile: Option<CalibrationProfile>,
    bank: FilterBank,
    plane: Option<ImagePlane>,
    last_view: Option<ViewState>,
    lean: LeanCoordinate,
}

impl Engine {
    pub fn new(config: EngineConfig, profile: Option<CalibrationProfile>) -> Result<Self, EngineError> {
        ZoomRange::new(config.zoom.min(), config.zoom.max())?;
        if config.mode != Mode::Static && profile.is_none() {
            return Err(EngineError::NotCalibrated(config.mode));
        }
        let bank = FilterBank::new(config.schedule(), config.guard);
        Ok(Engine {
            config,
            profile,
            bank,
            plane: None,
            last_view: None,
            lean: LeanCoordinate::NEUTRAL,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.config.mode
    }

    pub fn profile(&self) -> Option<&CalibrationProfile> {
        self.profile.as_ref()
    }

    pub fn last_view(&self) -> Option<&ViewState> {
        self.last_view.as_ref()
    }

    pub fn filter_bank(&self) -> &FilterBank {
        &self.bank
    }

    /// Restarts the engine with a new mode; the plane is re-placed on the next sample.
    pub fn set_mode(&mut self, mode: Mode) -> Result<(), EngineError> {
        let config = EngineConfig {
            mode,
            ..self.config.clone()
        };
        *self = Engine::new(config, self.profile.clone())?;
        Ok(())
    }

    /// Installs a profile and restarts the engine.
    pub fn set_profile(&mut self, profile: CalibrationProfile) {
        *self = Engine::new(self.config.clone(), Some(profile)).expect("profile present");
    }

    /// One tick. Held samples re-emit the previous view with the new
    /// timestamp; `None` only before the first accepted sample.
    pub fn step(&mut self, raw: &HeadPose) -> Result<Option<ViewState>, EngineError> {
        let pose = match self.bank.process(raw, self.lean) {
            FilterOutcome::Filtered(p) => p,
            FilterOutcome::Held => {
                return Ok(self.last_view.map(|mut v| {
                    if raw.timestamp_ms.is_finite() {
                        v.timestamp_ms = raw.timestamp_ms;
                    }
                    self.last_view = Some(v);
                    v
                }));
            }
        };
        let plane = match self.plane {
            Some(p) => p,
            None => {
                let p = place_plane(&pose)?;
                self.plane = Some(p);
                p
            }
        };
        let previous_cursor = self.last_view.map_or(CENTER_UV, |v| v.cursor_uv);
        let zr = &self.config.zoom;
        let view = match (self.config.mode, &self.profile) {
            (Mode::Static, profile) => {
                let lean = profile
                    .as_ref()
                    .map_or(LeanCoordinate::NEUTRAL, |p| normalize_lean(pose.position, p));
                tick_static(&pose, lean, &plane, zr, previous_cursor)
            }
            (Mode::Parallel, Some(profile)) => tick_parallel(&pose, profile, &plane, zr, previous_cursor),
            (Mode::Tilt, Some(profile)) => {
                let v = tick_tilt(&pose, profile, &plane, zr, previous_cursor);
                self.plane = Some(v.plane);
                v
            }
            (mode, None) => return Err(EngineError::NotCalibrated(mode)),
        };
        self.lean = LeanCoordinate::new(view.lean_x);
        self.last_view = Some(view);
        Ok(Some(view))
    }

    /// Runs a whole sample sequence, collecting emitted views.
    pub fn run(&mut self, samples: &[HeadPose]) -> Result<Vec<ViewState>, EngineError> {
        let mut out = Vec::with_capacity(samples.len());
        for s in samples {
            if let Some(v) = self.step(s)? {
                out.push(v);
            }
        }
        Ok(out)
    }
}
