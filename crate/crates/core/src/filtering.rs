//! Lean-scheduled scalar Kalman smoothing of the six pose channels, plus the
//! outlier / tracking-loss guard that sits in front of it.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::LeanCoordinate;
use crate::geometry::{wrap_angle, HeadPose, Orientation, Vec3};
use crate::Mode;

/// Process-noise level shared by every built-in schedule on its flat segment.
pub const Q_HIGH: f64 = 0.01;
/// Lower end of the Parallel process-noise ramp.
pub const Q_LOW: f64 = 0.0001;
/// Measurement-noise level on the flat segment.
pub const R_LOW: f64 = 0.0001;
/// Measurement noise at full forward lean.
pub const R_HIGH: f64 = 0.1;
/// Initial error covariance of a freshly seeded channel.
pub const INITIAL_COVARIANCE: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("curve needs at least one breakpoint")]
    EmptyCurve,
    #[error("curve breakpoints must have strictly increasing x in [0, 1]")]
    UnorderedBreakpoints,
    #[error("curve values must be positive and finite")]
    NonPositiveValue,
}

/// Piecewise-linear function on [0, 1], constant outside its breakpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct ParamCurve {
    points: Vec<(f64, f64)>,
}

impl ParamCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, FilterError> {
        if points.is_empty() {
            return Err(FilterError::EmptyCurve);
        }
        if points.iter().any(|&(x, _)| !(0.0..=1.0).contains(&x))
            || points.windows(2).any(|w| !(w[0].0 < w[1].0))
        {
            return Err(FilterError::UnorderedBreakpoints);
        }
        if points.iter().any(|&(_, y)| !(y > 0.0) || !y.is_finite()) {
            return Err(FilterError::NonPositiveValue);
        }
        Ok(ParamCurve { points })
    }

    pub fn constant(y: f64) -> Result<Self, FilterError> {
        Self::new(vec![(0.0, y), (1.0, y)])
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn eval(&self, x: f64) -> f64 {
        eval_curve(self, x)
    }
}

impl TryFrom<Vec<(f64, f64)>> for ParamCurve {
    type Error = FilterError;
    fn try_from(points: Vec<(f64, f64)>) -> Result<Self, FilterError> {
        ParamCurve::new(points)
    }
}

impl From<ParamCurve> for Vec<(f64, f64)> {
    fn from(c: ParamCurve) -> Self {
        c.points
    }
}

/// Linear interpolation between breakpoints; `x` is clamped to [0, 1].
pub fn eval_curve(curve: &ParamCurve, x: f64) -> f64 {
    let x = if x.is_nan() { 0.5 } else { x.clamp(0.0, 1.0) };
    let pts = &curve.points;
    let first = pts[0];
    let last = pts[pts.len() - 1];
    if x <= first.0 {
        return first.1;
    }
    if x >= last.0 {
        return last.1;
    }
    let i = pts.partition_point(|&(px, _)| px <= x);
    let (x0, y0) = pts[i - 1];
    let (x1, y1) = pts[i];
    if x == x0 {
        return y0;
    }
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSchedule {
    pub mode: Mode,
    pub q: ParamCurve,
    pub r: ParamCurve,
}

impl FilterSchedule {
    /// (Q, R) at lean `x`.
    pub fn sample(&self, x: LeanCoordinate) -> (f64, f64) {
        (self.q.eval(x.value()), self.r.eval(x.value()))
    }

    /// Breakpoint table: one `curve<TAB>x<TAB>y` row per breakpoint.
    pub fn to_table(&self) -> String {
        let mut s = format!("# filter schedule mode={}\ncurve\tx\ty\n", self.mode);
        for (name, curve) in [("q", &self.q), ("r", &self.r)] {
            for &(x, y) in curve.points() {
                let _ = writeln!(s, "{name}\t{x}\t{y}");
            }
        }
        s
    }
}

/// The per-mode Q/R curves.
pub fn builtin_schedule(mode: Mode) -> FilterSchedule {
    let flat = |y| ParamCurve::constant(y).expect("positive constant");
    let knee = |a, b| ParamCurve::new(vec![(0.0, a), (0.5, a), (1.0, b)]).expect("valid knee");
    match mode {
        Mode::Tilt => FilterSchedule {
            mode,
            q: flat(Q_HIGH),
            r: knee(R_LOW, R_HIGH),
        },
        Mode::Parallel => FilterSchedule {
            mode,
            q: knee(Q_HIGH, Q_LOW),
            r: knee(R_LOW, R_HIGH),
        },
        Mode::Static => FilterSchedule {
            mode,
            q: flat(Q_HIGH),
            r: flat(R_LOW),
        },
    }
}

/// Random-walk scalar Kalman state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KalmanChannel {
    pub estimate: f64,
    pub covariance: f64,
    pub initialized: bool,
    /// Innovations and estimates are wrapped into (-π, π].
    pub angular: bool,
}

impl KalmanChannel {
    pub fn linear() -> Self {
        KalmanChannel::default()
    }

    pub fn angular() -> Self {
        KalmanChannel {
            angular: true,
            ..KalmanChannel::default()
        }
    }

    /// One predict/correct step; returns the new estimate.
    pub fn update(&mut self, z: f64, q: f64, r: f64) -> f64 {
        if !self.initialized {
            self.estimate = if self.angular { wrap_angle(z) } else { z };
            self.covariance = INITIAL_COVARIANCE;
            self.initialized = true;
            return self.estimate;
        }
        let predicted = self.covariance + q;
        let gain = predicted / (predicted + r);
        let mut innovation = z - self.estimate;
        if self.angular {
            innovation = wrap_angle(innovation);
        }
        self.estimate += gain * innovation;
        if self.angular {
            self.estimate = wrap_angle(self.estimate);
        }
        self.covariance = (1.0 - gain) * predicted;
        self.estimate
    }
}

/// Functional form of [`KalmanChannel::update`].
pub fn update_channel(ch: KalmanChannel, z: f64, q: f64, r: f64) -> (KalmanChannel, f64) {
    let mut next = ch;
    let out = next.update(z, q, r);
    (next, out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GuardConfig {
    /// Head speeds above this (m/s) are treated as outliers.
    pub max_speed_mps: f64,
    /// Inter-sample gaps longer than this (s) are treated as tracking loss.
    pub gap_timeout_s: f64,
}

impl Default for GuardConfig {
    fn default() -> Self {
        GuardConfig {
            max_speed_mps: 2.0,
            gap_timeout_s: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuardDecision {
    Accept,
    Hold,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterOutcome {
    Filtered(HeadPose),
    Held,
}

/// Six Kalman channels (x, y, z, yaw, pitch, roll) sharing one schedule.
///
/// Process noise is a rate: each predict step adds `Q · dt` with `dt` the
/// time in seconds since the previous accepted sample, so smoothing does not
/// depend on the tracker's sample rate.
#[derive(Debug, Clone)]
pub struct FilterBank {
    channels: [KalmanChannel; 6],
    schedule: FilterSchedule,
    guard: GuardConfig,
    last_valid: Option<HeadPose>,
    last_output: Option<HeadPose>,
    last_raw_ms: Option<f64>,
    hold_active: bool,
}

impl FilterBank {
    pub fn new(schedule: FilterSchedule, guard: GuardConfig) -> Self {
        let l = KalmanChannel::linear();
        let a = KalmanChannel::angular();
        FilterBank {
            channels: [l, l, l, a, a, a],
            schedule,
            guard,
            last_valid: None,
            last_output: None,
            last_raw_ms: None,
            hold_active: false,
        }
    }

    pub fn schedule(&self) -> &FilterSchedule {
        &self.schedule
    }

    pub fn set_schedule(&mut self, schedule: FilterSchedule) {
        self.schedule = schedule;
    }

    pub fn channels(&self) -> &[KalmanChannel; 6] {
        &self.channels
    }

    /// Last accepted raw sample.
    pub fn last_valid(&self) -> Option<&HeadPose> {
        self.last_valid.as_ref()
    }

    pub fn last_output(&self) -> Option<&HeadPose> {
        self.last_output.as_ref()
    }

    pub fn hold_active(&self) -> bool {
        self.hold_active
    }

    /// Decides whether `raw` is usable. `dt` is the interval in seconds since
    /// the previous raw sample; the speed test measures displacement from the
    /// last accepted sample over the time elapsed since it.
    pub fn guard_sample(&self, raw: &HeadPose, dt: f64) -> GuardDecision {
        if !raw.is_finite() || !(dt > 0.0) {
            return GuardDecision::Hold;
        }
        if dt > self.guard.gap_timeout_s {
            return GuardDecision::Hold;
        }
        if let Some(valid) = &self.last_valid {
            let elapsed = (raw.timestamp_ms - valid.timestamp_ms) / 1000.0;
            if !(elapsed > 0.0) {
                return GuardDecision::Hold;
            }
            let moved = raw.position.distance(valid.position);
            if moved > self.guard.max_speed_mps * elapsed {
                return GuardDecision::Hold;
            }
        }
        GuardDecision::Accept
    }

    /// Smooths an accepted sample using the (Q, R) sampled at `x`.
    pub fn filter_pose(&mut self, raw: &HeadPose, x: LeanCoordinate) -> HeadPose {
        let (q_rate, r) = self.schedule.sample(x);
        let dt = match &self.last_valid {
            Some(v) => ((raw.timestamp_ms - v.timestamp_ms) / 1000.0).clamp(0.0, self.guard.gap_timeout_s),
            None => 0.0,
        };
        let q = q_rate * dt;
        let z = [
            raw.position.x,
            raw.position.y,
            raw.position.z,
            raw.orientation.yaw,
            raw.orientation.pitch,
            raw.orientation.roll,
        ];
        let mut out = [0.0; 6];
        for ((ch, &zi), o) in self.channels.iter_mut().zip(z.iter()).zip(out.iter_mut()) {
            *o = ch.update(zi, q, r);
        }
        let filtered = HeadPose::new(
            raw.timestamp_ms,
            Vec3::new(out[0], out[1], out[2]),
            Orientation::new(out[3], out[4], out[5]),
        );
        self.last_valid = Some(*raw);
        self.last_output = Some(filtered);
        self.hold_active = false;
        filtered
    }

    /// Guard then filter.
    pub fn process(&mut self, raw: &HeadPose, x: LeanCoordinate) -> FilterOutcome {
        let decision = match self.last_raw_ms {
            None => {
                if raw.is_finite() {
                    GuardDecision::Accept
                } else {
                    GuardDecision::Hold
                }
            }
            Some(prev) => self.guard_sample(raw, (raw.timestamp_ms - prev) / 1000.0),
        };
        if raw.timestamp_ms.is_finite() {
            self.last_raw_ms = Some(raw.timestamp_ms);
        }
        match decision {
            GuardDecision::Accept => FilterOutcome::Filtered(self.filter_pose(raw, x)),
            GuardDecision::Hold => {
                self.hold_active = true;
                FilterOutcome::Held
            }
        }
    }
}

impl fmt::Display for FilterSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_table())
    }
}
