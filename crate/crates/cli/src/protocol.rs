//! Line protocol spoken by the live stream endpoint, and the per-session
//! state machine that drives the engine from it.
//!
//! Inbound:
//!
//! ```text
//! POSE t px py pz yaw pitch roll
//! MODE static|parallel|tilt
//! CALIB nx ny nz forward backward [yaw]
//! ATTEMPT u v
//! TARGET u v
//! ```
//!
//! Outbound:
//!
//! ```text
//! VIEW t mode zoom panU panV leanX planeYaw planePitch planeRoll cursorU cursorV
//! RESULT correct|wrong|timeout remainingAttempts
//! ERROR message
//! ```
//!
//! Numbers use Rust's shortest round-trip formatting, so a parsed VIEW line
//! reproduces the engine's `f64` values exactly.

use std::fmt;

use headzoom::trial::{AttemptResult, HitTest, Outcome, TrialRules, TrialSession};
use headzoom::{CalibrationProfile, Engine, EngineConfig, EngineError, HeadPose, Mode, Orientation, Vec3, ViewState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Inbound {
    Pose(HeadPose),
    Mode(Mode),
    Calib {
        neutral: Vec3,
        forward: f64,
        backward: f64,
        yaw: f64,
    },
    Attempt(f64, f64),
    Target(f64, f64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolError(pub String);

impl fmt::Display for ProtocolError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ProtocolError {}

fn numbers<const N: usize>(verb: &str, args: &[&str]) -> Result<[f64; N], ProtocolError> {
    if args.len() != N {
        return Err(ProtocolError(format!("{verb} expects {N} numbers, got {}", args.len())));
    }
    let mut out = [0.0; N];
    for (slot, a) in out.iter_mut().zip(args) {
        *slot = a
            .parse()
            .map_err(|_| ProtocolError(format!("{verb}: bad number `{a}`")))?;
    }
    Ok(out)
}

pub fn parse_inbound(line: &str) -> Result<Inbound, ProtocolError> {
    let mut tokens = line.split_whitespace();
    let verb = tokens.next().ok_or_else(|| ProtocolError("empty message".into()))?;
    let args: Vec<&str> = tokens.collect();
    match verb {
        "POSE" => {
            let [t, px, py, pz, yaw, pitch, roll] = numbers::<7>(verb, &args)?;
            Ok(Inbound::Pose(HeadPose::new(
                t,
                Vec3::new(px, py, pz),
                Orientation::new(yaw, pitch, roll),
            )))
        }
        "MODE" => match args.as_slice() {
            [m] => m
                .parse()
                .map(Inbound::Mode)
                .map_err(|e| ProtocolError(format!("MODE: {e}"))),
            _ => Err(ProtocolError("MODE expects one of static|parallel|tilt".into())),
        },
        "CALIB" => {
            let (fixed, yaw) = match args.len() {
                5 => (numbers::<5>(verb, &args)?, 0.0),
                6 => (numbers::<5>(verb, &args[..5])?, numbers::<1>(verb, &args[5..])?[0]),
                n => return Err(ProtocolError(format!("CALIB expects 5 or 6 numbers, got {n}"))),
            };
            let [nx, ny, nz, forward, backward] = fixed;
            Ok(Inbound::Calib {
                neutral: Vec3::new(nx, ny, nz),
                forward,
                backward,
                yaw,
            })
        }
        "ATTEMPT" => {
            let [u, v] = numbers::<2>(verb, &args)?;
            Ok(Inbound::Attempt(u, v))
        }
        "TARGET" => {
            let [u, v] = numbers::<2>(verb, &args)?;
            if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&v) {
                return Err(ProtocolError("TARGET coordinates must lie in [0, 1]".into()));
            }
            Ok(Inbound::Target(u, v))
        }
        other => Err(ProtocolError(format!("unknown message `{other}`"))),
    }
}

pub fn view_frame(v: &ViewState) -> String {
    let o = v.plane.orientation;
    format!(
        "VIEW {} {} {} {} {} {} {} {} {} {} {}",
        v.timestamp_ms,
        v.mode,
        v.zoom,
        v.pan_uv.0,
        v.pan_uv.1,
        v.lean_x,
        o.yaw,
        o.pitch,
        o.roll,
        v.cursor_uv.0,
        v.cursor_uv.1
    )
}

/// The fields carried by a VIEW line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewFrame {
    pub timestamp_ms: f64,
    pub mode: Mode,
    pub zoom: f64,
    pub pan_uv: (f64, f64),
    pub lean_x: f64,
    pub plane_orientation: Orientation,
    pub cursor_uv: (f64, f64),
}

impl ViewFrame {
    pub fn of(v: &ViewState) -> Self {
        ViewFrame {
            timestamp_ms: v.timestamp_ms,
            mode: v.mode,
            zoom: v.zoom,
            pan_uv: v.pan_uv,
            lean_x: v.lean_x,
            plane_orientation: v.plane.orientation,
            cursor_uv: v.cursor_uv,
        }
    }

    pub fn parse(line: &str) -> Result<Self, ProtocolError> {
        let mut tokens = line.split_whitespace();
        if tokens.next() != Some("VIEW") {
            return Err(ProtocolError("not a VIEW frame".into()));
        }
        let args: Vec<&str> = tokens.collect();
        if args.len() != 11 {
            return Err(ProtocolError(format!("VIEW has 11 fields, got {}", args.len())));
        }
        let mode: Mode = args[1].parse().map_err(|e| ProtocolError(format!("{e}")))?;
        let mut rest = args.clone();
        rest.remove(1);
        let n = numbers::<10>("VIEW", &rest)?;
        Ok(ViewFrame {
            timestamp_ms: n[0],
            mode,
            zoom: n[1],
            pan_uv: (n[2], n[3]),
            lean_x: n[4],
            plane_orientation: Orientation::new(n[5], n[6], n[7]),
            cursor_uv: (n[8], n[9]),
        })
    }

    /// Equality on everything except the timestamp.
    pub fn same_view(&self, other: &ViewFrame) -> bool {
        ViewFrame {
            timestamp_ms: other.timestamp_ms,
            ..*self
        } == *other
    }
}

pub fn result_frame(kind: &str, remaining: usize) -> String {
    format!("RESULT {kind} {remaining}")
}

pub fn error_frame(message: &str) -> String {
    // keep the frame on one line
    format!("ERROR {}", message.replace(['\n', '\r'], " "))
}

fn outcome_word(o: Outcome) -> &'static str {
    match o {
        Outcome::Success => "correct",
        Outcome::FailedAttempts => "wrong",
        Outcome::Timeout => "timeout",
    }
}

/// Where a reply goes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reply {
    /// Every connected client.
    All(String),
    /// Only the client whose message caused it.
    Sender(String),
}

/// One user's engine plus the current target-finding trial.
#[derive(Debug, Clone)]
pub struct Session {
    engine: Engine,
    trial: TrialSession,
    target: (f64, f64),
    now_ms: Option<f64>,
}

impl Session {
    pub fn new(config: EngineConfig, profile: Option<CalibrationProfile>) -> Result<Self, EngineError> {
        let target = (0.5, 0.5);
        Ok(Session {
            engine: Engine::new(config, profile)?,
            trial: TrialSession::new(target, TrialRules::default(), HitTest::default()),
            target,
            now_ms: None,
        })
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn trial(&self) -> &TrialSession {
        &self.trial
    }

    fn reset_trial(&mut self) {
        self.trial = TrialSession::new(self.target, TrialRules::default(), HitTest::default());
    }

    pub fn handle(&mut self, msg: Inbound) -> Vec<Reply> {
        match msg {
            Inbound::Pose(pose) => {
                let mut out = Vec::new();
                match self.engine.step(&pose) {
                    Ok(Some(view)) => out.push(Reply::All(view_frame(&view))),
                    Ok(None) => {}
                    Err(e) => return vec![Reply::Sender(error_frame(&e.to_string()))],
                }
                if pose.timestamp_ms.is_finite() {
                    self.now_ms = Some(pose.timestamp_ms);
                    if self.trial.tick(pose.timestamp_ms) {
                        out.push(Reply::All(result_frame("timeout", self.trial.remaining_attempts())));
                    }
                }
                out
            }
            Inbound::Mode(mode) => match self.engine.set_mode(mode) {
                Ok(()) => {
                    self.reset_trial();
                    Vec::new()
                }
                Err(e) => vec![Reply::Sender(error_frame(&e.to_string()))],
            },
            Inbound::Calib {
                neutral,
                forward,
                backward,
                yaw,
            } => match CalibrationProfile::with_heading(neutral, yaw, forward, backward) {
                Ok(profile) => {
                    self.engine.set_profile(profile);
                    Vec::new()
                }
                Err(e) => vec![Reply::Sender(error_frame(&e.to_string()))],
            },
            Inbound::Target(u, v) => {
                self.target = (u, v);
                self.reset_trial();
                Vec::new()
            }
            Inbound::Attempt(u, v) => {
                let now = self.now_ms.unwrap_or(0.0);
                let frame = match self.trial.attempt(now, (u, v)) {
                    AttemptResult::Correct => result_frame("correct", self.trial.remaining_attempts()),
                    AttemptResult::Wrong { remaining } => result_frame("wrong", remaining),
                    AttemptResult::Timeout => result_frame("timeout", self.trial.remaining_attempts()),
                    AttemptResult::Finished(o) => result_frame(outcome_word(o), self.trial.remaining_attempts()),
                };
                vec![Reply::All(frame)]
            }
        }
    }
}
