//! Deterministic pose traces from a small motion script.
//!
//! One directive per line, `#` starts a comment:
//!
//! ```text
//! rate 72                  # samples per second (default 72)
//! seed 7                   # noise seed (default 0)
//! origin 0 1.6 0           # neutral head position in meters
//! heading 0                # neutral yaw in degrees; also the lean axis
//! limits 0.3 0.25          # forward / backward lean limits in meters
//! noise 0.002 0.001        # position sigma (m) and optional angle sigma (rad)
//! hold 1                   # keep the current pose for 1 s
//! lean 1.0 2               # ramp lean coordinate to 1.0 over 2 s
//! yaw 10 0.5               # ramp yaw offset to 10 degrees over 0.5 s
//! pitch -5 0.5
//! roll 15 0.5
//! move 0.5 0 0 1           # ramp lateral offset (m, world axes) over 1 s
//! ramp 2 lean=0.8 yaw=5    # several targets at once
//! nan                      # one sample with a non-finite position
//! gap 0.6                  # advance time without emitting samples
//! ```
//!
//! A timed segment of `d` seconds emits `ceil(d · rate)` samples; sample `j`
//! of `n` sits at fraction `j/n` of the ramp, so segments join without
//! duplicated timestamps. Timestamps are `index · 1000 / rate` ms, counted
//! over emitted samples and gaps alike.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::calibration::CalibrationProfile;
use crate::geometry::{wrap_angle, HeadPose, Orientation, Vec3};
use crate::trace::{PoseTrace, DEFAULT_RATE_HZ};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("BadScript at line {line}: {message}")]
pub struct ScriptError {
    pub line: usize,
    pub message: String,
}

/// Target values a ramp segment moves towards. `None` keeps the current value.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RampTargets {
    pub lean: Option<f64>,
    pub yaw_deg: Option<f64>,
    pub pitch_deg: Option<f64>,
    pub roll_deg: Option<f64>,
    pub offset: Option<Vec3>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Directive {
    Rate(f64),
    Seed(u64),
    Origin(Vec3),
    Heading(f64),
    Limits { forward: f64, backward: f64 },
    Noise { position: f64, angle: f64 },
    Hold(f64),
    Ramp { seconds: f64, targets: RampTargets },
    Nan,
    Gap(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionScript {
    pub directives: Vec<Directive>,
}

#[derive(Debug, Clone, Copy)]
struct State {
    lean: f64,
    yaw: f64,
    pitch: f64,
    roll: f64,
    offset: Vec3,
}

impl MotionScript {
    pub fn parse(text: &str) -> Result<Self, ScriptError> {
        let mut directives = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |message: String| ScriptError { line, message };
            let mut tokens = content.split_whitespace();
            let verb = tokens.next().unwrap_or_default();
            let args: Vec<&str> = tokens.collect();
            let num = |s: &str| -> Result<f64, ScriptError> {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(format!("bad number `{s}`")))
            };
            let nums = || args.iter().map(|a| num(a)).collect::<Result<Vec<f64>, _>>();
            let arity = |lo: usize, hi: usize| -> Result<(), ScriptError> {
                if (lo..=hi).contains(&args.len()) {
                    Ok(())
                } else {
                    Err(err(format!("`{verb}` takes {lo}..={hi} arguments, got {}", args.len())))
                }
            };
            let duration = |v: f64| -> Result<f64, ScriptError> {
                if v > 0.0 {
                    Ok(v)
                } else {
                    Err(err(format!("duration must be positive, got {v}")))
                }
            };
            let d = match verb {
                "rate" => {
                    arity(1, 1)?;
                    let r = num(args[0])?;
                    if !(r > 0.0) {
                        return Err(err("rate must be positive".into()));
                    }
                    Directive::Rate(r)
                }
                "seed" => {
                    arity(1, 1)?;
                    Directive::Seed(args[0].parse().map_err(|_| err(format!("bad seed `{}`", args[0])))?)
                }
                "origin" => {
                    arity(3, 3)?;
                    let v = nums()?;
                    Directive::Origin(Vec3::new(v[0], v[1], v[2]))
                }
                "heading" => {
                    arity(1, 1)?;
                    Directive::Heading(num(args[0])?)
                }
                "limits" => {
                    arity(2, 2)?;
                    let v = nums()?;
                    if v[0] <= 0.0 || v[1] <= 0.0 {
                        return Err(err("limits must be positive".into()));
                    }
                    Directive::Limits {
                        forward: v[0],
                        backward: v[1],
                    }
                }
                "noise" => {
                    arity(1, 2)?;
                    let v = nums()?;
                    if v.iter().any(|s| *s < 0.0) {
                        return Err(err("noise sigma must be non-negative".into()));
                    }
                    Directive::Noise {
                        position: v[0],
                        angle: v.get(1).copied().unwrap_or(0.0),
                    }
                }
                "hold" => {
                    arity(1, 1)?;
                    Directive::Hold(duration(num(args[0])?)?)
                }
                "gap" => {
                    arity(1, 1)?;
                    Directive::Gap(duration(num(args[0])?)?)
                }
                "nan" => {
                    arity(0, 0)?;
                    Directive::Nan
                }
                "lean" | "yaw" | "pitch" | "roll" => {
                    arity(2, 2)?;
                    let target = num(args[0])?;
                    let seconds = duration(num(args[1])?)?;
                    let mut targets = RampTargets::default();
                    match verb {
                        "lean" => targets.lean = Some(check_lean(target).map_err(err)?),
                        "yaw" => targets.yaw_deg = Some(target),
                        "pitch" => targets.pitch_deg = Some(target),
                        _ => targets.roll_deg = Some(target),
                    }
                    Directive::Ramp { seconds, targets }
                }
                "move" => {
                    arity(4, 4)?;
                    let v = nums()?;
                    Directive::Ramp {
                        seconds: duration(v[3])?,
                        targets: RampTargets {
                            offset: Some(Vec3::new(v[0], v[1], v[2])),
                            ..RampTargets::default()
                        },
                    }
                }
                "ramp" => {
                    if args.is_empty() {
                        return Err(err("`ramp` needs a duration".into()));
                    }
                    let seconds = duration(num(args[0])?)?;
                    let mut targets = RampTargets::default();
                    let mut offset = None::<Vec3>;
                    for kv in &args[1..] {
                        let (k, v) = kv
                            .split_once('=')
                            .ok_or_else(|| err(format!("expected key=value, got `{kv}`")))?;
                        let v = num(v)?;
                        match k {
                            "lean" => targets.lean = Some(check_lean(v).map_err(err)?),
                            "yaw" => targets.yaw_deg = Some(v),
                            "pitch" => targets.pitch_deg = Some(v),
                            "roll" => targets.roll_deg = Some(v),
                            "x" | "y" | "z" => {
                                let o = offset.get_or_insert(Vec3::ZERO);
                                match k {
                                    "x" => o.x = v,
                                    "y" => o.y = v,
                                    _ => o.z = v,
                                }
                            }
                            _ => return Err(err(format!("unknown ramp key `{k}`"))),
                        }
                    }
                    targets.offset = offset;
                    Directive::Ramp { seconds, targets }
                }
                other => return Err(err(format!("unknown directive `{other}`"))),
            };
            directives.push(d);
        }
        if !directives
            .iter()
            .any(|d| matches!(d, Directive::Hold(_) | Directive::Ramp { .. } | Directive::Nan))
        {
            return Err(ScriptError {
                line: text.lines().count().max(1),
                message: "script emits no samples".into(),
            });
        }
        Ok(MotionScript { directives })
    }

    /// Calibration matching the script's origin, heading and limits.
    pub fn profile(&self) -> CalibrationProfile {
        let s = Settings::from_script(self);
        CalibrationProfile::with_heading(s.origin, s.heading.to_radians(), s.forward, s.backward)
            .expect("script limits validated at parse time")
    }

    pub fn synthesize(&self) -> PoseTrace {
        synthesize_trace(self)
    }
}

fn check_lean(x: f64) -> Result<f64, String> {
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(format!("lean target {x} outside [0, 1]"))
    }
}

struct Settings {
    origin: Vec3,
    heading: f64,
    forward: f64,
    backward: f64,
}

impl Settings {
    /// Last value of each global setting wins.
    fn from_script(script: &MotionScript) -> Self {
        let mut s = Settings {
            origin: Vec3::new(0.0, 1.6, 0.0),
            heading: 0.0,
            forward: 0.3,
            backward: 0.25,
        };
        for d in &script.directives {
            match *d {
                Directive::Origin(o) => s.origin = o,
                Directive::Heading(h) => s.heading = h,
                Directive::Limits { forward, backward } => {
                    s.forward = forward;
                    s.backward = backward;
                }
                _ => {}
            }
        }
        s
    }
}

fn lean_displacement(lean: f64, forward: f64, backward: f64) -> f64 {
    if lean >= 0.5 {
        (lean - 0.5) * 2.0 * forward
    } else {
        -(0.5 - lean) * 2.0 * backward
    }
}

fn lerp(a: f64, b: f64, f: f64) -> f64 {
    a + (b - a) * f
}

/// Runs the script. Rate, seed, origin, heading and limits apply to the whole
/// trace; noise settings apply from their line onwards.
pub fn synthesize_trace(script: &MotionScript) -> PoseTrace {
    let settings = Settings::from_script(script);
    let mut rate = DEFAULT_RATE_HZ;
    let mut seed = 0u64;
    for d in &script.directives {
        match *d {
            Directive::Rate(r) => rate = r,
            Directive::Seed(s) => seed = s,
            _ => {}
        }
    }
    let heading = settings.heading.to_radians();
    let axis = Vec3::new(heading.sin(), 0.0, heading.cos());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos_sigma = 0.0;
    let mut ang_sigma = 0.0;
    let mut index: u64 = 0;
    let mut samples = Vec::new();
    let mut state = State {
        lean: 0.5,
        yaw: 0.0,
        pitch: 0.0,
        roll: 0.0,
        offset: Vec3::ZERO,
    };

    let emit = |state: &State, index: &mut u64, rng: &mut ChaCha8Rng, pos_sigma: f64, ang_sigma: f64| {
        let mut noise = |sigma: f64| -> f64 {
            if sigma > 0.0 {
                Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
            } else {
                0.0
            }
        };
        let position = settings.origin
            + axis * lean_displacement(state.lean, settings.forward, settings.backward)
            + state.offset;
        let position = Vec3::new(
            position.x + noise(pos_sigma),
            position.y + noise(pos_sigma),
            position.z + noise(pos_sigma),
        );
        let orientation = Orientation::new(
            wrap_angle(heading + state.yaw.to_radians() + noise(ang_sigma)),
            (state.pitch.to_radians() + noise(ang_sigma)).clamp(-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2),
            wrap_angle(state.roll.to_radians() + noise(ang_sigma)),
        );
        let t = *index as f64 * 1000.0 / rate;
        *index += 1;
        HeadPose::new(t, position, orientation)
    };

    for d in &script.directives {
        match *d {
            Directive::Noise { position, angle } => {
                pos_sigma = position;
                ang_sigma = angle;
            }
            Directive::Hold(seconds) => {
                let n = segment_len(seconds, rate);
                for _ in 0..n {
                    samples.push(emit(&state, &mut index, &mut rng, pos_sigma, ang_sigma));
                }
            }
            Directive::Ramp { seconds, targets } => {
                let start = state;
                let n = segment_len(seconds, rate);
                for j in 1..=n {
                    let f = j as f64 / n as f64;
                    let mut s = start;
                    if let Some(l) = targets.lean {
                        s.lean = lerp(start.lean, l, f);
                    }
                    if let Some(y) = targets.yaw_deg {
                        s.yaw = lerp(start.yaw, y, f);
                    }
                    if let Some(p) = targets.pitch_deg {
                        s.pitch = lerp(start.pitch, p, f);
                    }
                    if let Some(r) = targets.roll_deg {
                        s.roll = lerp(start.roll, r, f);
                    }
                    if let Some(o) = targets.offset {
                        s.offset = start.offset + (o - start.offset) * f;
                    }
                    samples.push(emit(&s, &mut index, &mut rng, pos_sigma, ang_sigma));
                    state = s;
                }
            }
            Directive::Nan => {
                let mut p = emit(&state, &mut index, &mut rng, pos_sigma, ang_sigma);
                p.position.x = f64::NAN;
                samples.push(p);
            }
            Directive::Gap(seconds) => {
                index += segment_len(seconds, rate) as u64;
            }
            _ => {}
        }
    }
    PoseTrace::new("synthetic", rate, samples)
}

/// `ceil(seconds · rate)`, tolerant of representation error in the product.
fn segment_len(seconds: f64, rate: f64) -> usize {
    let raw = seconds * rate;
    let rounded = raw.round();
    if (raw - rounded).abs() < 1e-9 {
        rounded as usize
    } else {
        raw.ceil() as usize
    }
}
