//! Target-finding trial rules and the trial record sidecar file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{read_trace, PoseTrace, TraceError};
use crate::Mode;

/// Reference image size in pixels.
pub const IMAGE_WIDTH_PX: f64 = 2800.0;
pub const IMAGE_HEIGHT_PX: f64 = 1749.0;
/// Radius of the cursor ring in reference-image pixels.
pub const HIT_RADIUS_PX: f64 = 105.0;
pub const TIME_LIMIT_S: f64 = 120.0;
pub const MAX_ATTEMPTS: usize = 3;

#[derive(Debug, Error)]
pub enum TrialError {
    #[error("invalid trial record: {0}")]
    Invalid(String),
    #[error("trial record parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    FailedAttempts,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub timestamp_ms: f64,
    pub cursor_uv: (f64, f64),
    pub correct: bool,
}

/// Image-space hit test in reference pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HitTest {
    pub radius_px: f64,
    pub image_width_px: f64,
    pub image_height_px: f64,
}

impl Default for HitTest {
    fn default() -> Self {
        HitTest {
            radius_px: HIT_RADIUS_PX,
            image_width_px: IMAGE_WIDTH_PX,
            image_height_px: IMAGE_HEIGHT_PX,
        }
    }
}

impl HitTest {
    pub fn pixel_distance(&self, a: (f64, f64), b: (f64, f64)) -> f64 {
        let du = (a.0 - b.0) * self.image_width_px;
        let dv = (a.1 - b.1) * self.image_height_px;
        du.hypot(dv)
    }

    /// Strictly inside the ring.
    pub fn hits(&self, cursor: (f64, f64), target: (f64, f64)) -> bool {
        self.pixel_distance(cursor, target) < self.radius_px
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialRules {
    pub time_limit_s: f64,
    pub max_attempts: usize,
}

impl Default for TrialRules {
    fn default() -> Self {
        TrialRules {
            time_limit_s: TIME_LIMIT_S,
            max_attempts: MAX_ATTEMPTS,
        }
    }
}

/// Classifies a finished trial. Attempts after the time limit or after the
/// trial ended do not count.
pub fn classify(attempts: &[Attempt], start_ms: f64, rules: &TrialRules) -> (Outcome, f64, usize) {
    let limit_ms = start_ms + rules.time_limit_s * 1000.0;
    let mut used = 0;
    for a in attempts {
        if a.timestamp_ms > limit_ms {
            break;
        }
        used += 1;
        if a.correct {
            return (Outcome::Success, (a.timestamp_ms - start_ms) / 1000.0, used);
        }
        if used == rules.max_attempts {
            return (Outcome::FailedAttempts, (a.timestamp_ms - start_ms) / 1000.0, used);
        }
    }
    // no decision within the limit; an abandoned trial scores the same
    (Outcome::Timeout, rules.time_limit_s, used)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttemptResult {
    Correct,
    Wrong { remaining: usize },
    /// Attempt arrived after the time limit.
    Timeout,
    /// The trial already ended; carries the final outcome.
    Finished(Outcome),
}

/// Live trial bookkeeping used by the streaming server.
#[derive(Debug, Clone)]
pub struct TrialSession {
    pub target_uv: (f64, f64),
    pub rules: TrialRules,
    pub hit: HitTest,
    start_ms: Option<f64>,
    attempts: Vec<Attempt>,
    outcome: Option<(Outcome, f64)>,
}

impl TrialSession {
    pub fn new(target_uv: (f64, f64), rules: TrialRules, hit: HitTest) -> Self {
        TrialSession {
            target_uv,
            rules,
            hit,
            start_ms: None,
            attempts: Vec::new(),
            outcome: None,
        }
    }

    pub fn outcome(&self) -> Option<Outcome> {
        self.outcome.map(|(o, _)| o)
    }

    pub fn attempts(&self) -> &[Attempt] {
        &self.attempts
    }

    pub fn remaining_attempts(&self) -> usize {
        self.rules.max_attempts.saturating_sub(self.attempts.len())
    }

    pub fn elapsed_s(&self, now_ms: f64) -> f64 {
        self.start_ms.map_or(0.0, |s| (now_ms - s) / 1000.0)
    }

    /// Advances the trial clock; returns `true` exactly once, when the time limit passes.
    pub fn tick(&mut self, now_ms: f64) -> bool {
        let start = *self.start_ms.get_or_insert(now_ms);
        if self.outcome.is_none() && now_ms - start > self.rules.time_limit_s * 1000.0 {
            self.outcome = Some((Outcome::Timeout, self.rules.time_limit_s));
            return true;
        }
        false
    }

    pub fn attempt(&mut self, now_ms: f64, cursor_uv: (f64, f64)) -> AttemptResult {
        if self.tick(now_ms) {
            return AttemptResult::Timeout;
        }
        if let Some((o, _)) = self.outcome {
            return AttemptResult::Finished(o);
        }
        let start = self.start_ms.unwrap_or(now_ms);
        let correct = self.hit.hits(cursor_uv, self.target_uv);
        self.attempts.push(Attempt {
            timestamp_ms: now_ms,
            cursor_uv,
            correct,
        });
        let elapsed = (now_ms - start) / 1000.0;
        if correct {
            self.outcome = Some((Outcome::Success, elapsed));
            AttemptResult::Correct
        } else {
            if self.attempts.len() >= self.rules.max_attempts {
                self.outcome = Some((Outcome::FailedAttempts, elapsed));
            }
            AttemptResult::Wrong {
                remaining: self.remaining_attempts(),
            }
        }
    }
}

/// One replayable trial: the pose trace plus what happened in it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub participant: String,
    pub trace: PoseTrace,
    pub trace_path: Option<PathBuf>,
    pub mode: Mode,
    pub image_id: String,
    pub targets: BTreeMap<String, (f64, f64)>,
    pub attempts: Vec<Attempt>,
    pub outcome: Outcome,
    pub duration_seconds: f64,
    pub image_user_grade: Option<u8>,
}

impl TrialRecord {
    pub fn validate(&self) -> Result<(), TrialError> {
        let bad = |m: &str| Err(TrialError::Invalid(m.to_string()));
        if self.attempts.len() > MAX_ATTEMPTS {
            return bad("more than 3 attempts");
        }
        if !(0.0..=TIME_LIMIT_S).contains(&self.duration_seconds) {
            return bad("duration outside [0, 120] s");
        }
        match self.outcome {
            Outcome::Success if !self.attempts.last().is_some_and(|a| a.correct) => {
                return bad("success requires a correct final attempt")
            }
            Outcome::Timeout if self.duration_seconds != TIME_LIMIT_S => {
                return bad("timeout requires a 120 s duration")
            }
            Outcome::FailedAttempts if self.attempts.len() != MAX_ATTEMPTS || self.attempts.iter().any(|a| a.correct) => {
                return bad("failed trials need 3 wrong attempts")
            }
            _ => {}
        }
        if let Some(g) = self.image_user_grade {
            if !(1..=7).contains(&g) {
                return bad("image grade must be 1..=7");
            }
        }
        Ok(())
    }

    /// Builds a record from attempts, deriving outcome and duration from the rules.
    pub fn from_attempts(
        participant: impl Into<String>,
        trace: PoseTrace,
        mode: Mode,
        image_id: impl Into<String>,
        targets: BTreeMap<String, (f64, f64)>,
        attempts: Vec<Attempt>,
    ) -> Self {
        let start = trace.samples.first().map_or(0.0, |s| s.timestamp_ms);
        let (outcome, duration_seconds, used) = classify(&attempts, start, &TrialRules::default());
        let attempts = attempts.into_iter().take(used).collect();
        TrialRecord {
            participant: participant.into(),
            trace,
            trace_path: None,
            mode,
            image_id: image_id.into(),
            targets,
            attempts,
            outcome,
            duration_seconds,
            image_user_grade: None,
        }
    }

    /// Sidecar TOML; the trace is referenced by path, not embedded.
    pub fn to_sidecar(&self, trace_path: &Path) -> Result<String, TrialError> {
        let sidecar = Sidecar {
            participant: self.participant.clone(),
            trace: trace_path.display().to_string(),
            mode: self.mode,
            image_id: self.image_id.clone(),
            outcome: self.outcome,
            duration_seconds: self.duration_seconds,
            image_user_grade: self.image_user_grade,
            targets: self
                .targets
                .iter()
                .map(|(k, &(u, v))| (k.clone(), [u, v]))
                .collect(),
            attempts: self
                .attempts
                .iter()
                .map(|a| SidecarAttempt {
                    timestamp_ms: a.timestamp_ms,
                    u: a.cursor_uv.0,
                    v: a.cursor_uv.1,
                    correct: a.correct,
                })
                .collect(),
        };
        toml::to_string(&sidecar).map_err(|e| TrialError::Parse(e.to_string()))
    }

    /// Loads a sidecar; a relative trace path resolves against the sidecar's directory.
    pub fn load(path: &Path) -> Result<Self, TrialError> {
        let text = std::fs::read_to_string(path).map_err(|source| TrialError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let sidecar: Sidecar = toml::from_str(&text).map_err(|e| TrialError::Parse(e.to_string()))?;
        let mut trace_path = PathBuf::from(&sidecar.trace);
        if trace_path.is_relative() {
            if let Some(dir) = path.parent() {
                trace_path = dir.join(trace_path);
            }
        }
        let trace = read_trace(&trace_path)?;
        let record = TrialRecord {
            participant: sidecar.participant,
            trace,
            trace_path: Some(trace_path),
            mode: sidecar.mode,
            image_id: sidecar.image_id,
            targets: sidecar
                .targets
                .into_iter()
                .map(|(k, [u, v])| (k, (u, v)))
                .collect(),
            attempts: sidecar
                .attempts
                .into_iter()
                .map(|a| Attempt {
                    timestamp_ms: a.timestamp_ms,
                    cursor_uv: (a.u, a.v),
                    correct: a.correct,
                })
                .collect(),
            outcome: sidecar.outcome,
            duration_seconds: sidecar.duration_seconds,
            image_user_grade: sidecar.image_user_grade,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn save(&self, path: &Path, trace_path: &Path) -> Result<(), TrialError> {
        let text = self.to_sidecar(trace_path)?;
        std::fs::write(path, text).map_err(|source| TrialError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    #[serde(default = "default_participant")]
    participant: String,
    trace: String,
    mode: Mode,
    image_id: String,
    outcome: Outcome,
    duration_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    image_user_grade: Option<u8>,
    #[serde(default)]
    targets: BTreeMap<String, [f64; 2]>,
    #[serde(default)]
    attempts: Vec<SidecarAttempt>,
}

fn default_participant() -> String {
    "p0".to_string()
}

#[derive(Debug, Serialize, Deserialize)]
struct SidecarAttempt {
    timestamp_ms: f64,
    u: f64,
    v: f64,
    correct: bool,
}
