//! Tab-separated pose traces and view-state streams.
//!
//! Pose trace layout (angles in radians, positions in meters):
//!
//! ```text
//! # headzoom pose trace source=<name> rate_hz=<hz> units: ms, m, rad
//! timestamp_ms	pos_x	pos_y	pos_z	yaw_rad	pitch_rad	roll_rad
//! 0	0	1.6	0	0	0	0
//! ```
//!
//! Lines starting with `#` are comments. Numbers are written in the shortest
//! form that parses back to the same `f64`.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::geometry::{HeadPose, ImagePlane, Orientation, Vec3, PLANE_HEIGHT, PLANE_WIDTH};
use crate::modes::ViewState;
use crate::Mode;

pub const TRACE_COLUMNS: [&str; 7] = [
    "timestamp_ms",
    "pos_x",
    "pos_y",
    "pos_z",
    "yaw_rad",
    "pitch_rad",
    "roll_rad",
];

pub const VIEW_COLUMNS: [&str; 14] = [
    "timestamp_ms",
    "mode",
    "zoom",
    "pan_u",
    "pan_v",
    "lean_x",
    "plane_yaw",
    "plane_pitch",
    "plane_roll",
    "cursor_u",
    "cursor_v",
    "plane_x",
    "plane_y",
    "plane_z",
];

pub const DEFAULT_RATE_HZ: f64 = 72.0;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("ParseError at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("MonotonicityError at line {line}: timestamp {timestamp} does not increase")]
    Monotonicity { line: usize, timestamp: f64 },
    #[error("non-finite value in sample {index}; traces must be finite to be written")]
    NonFinite { index: usize },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl TraceError {
    pub fn line(&self) -> Option<usize> {
        match self {
            TraceError::Parse { line, .. } | TraceError::Monotonicity { line, .. } => Some(*line),
            _ => None,
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> TraceError {
    TraceError::Parse {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseTrace {
    pub source: String,
    pub rate_hz: f64,
    pub samples: Vec<HeadPose>,
}

impl PoseTrace {
    pub fn new(source: impl Into<String>, rate_hz: f64, samples: Vec<HeadPose>) -> Self {
        PoseTrace {
            source: source.into(),
            rate_hz,
            samples,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => (b.timestamp_ms - a.timestamp_ms) / 1000.0,
            _ => 0.0,
        }
    }

    /// Renders the canonical text form. Rejects non-finite values.
    pub fn to_text(&self) -> Result<String, TraceError> {
        let mut s = String::with_capacity(64 * (self.samples.len() + 2));
        let _ = writeln!(
            s,
            "# headzoom pose trace source={} rate_hz={} units: ms, m, rad",
            self.source.replace(char::is_whitespace, "_"),
            self.rate_hz
        );
        s.push_str(&TRACE_COLUMNS.join("\t"));
        s.push('\n');
        for (index, p) in self.samples.iter().enumerate() {
            if !p.is_finite() {
                return Err(TraceError::NonFinite { index });
            }
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                p.timestamp_ms,
                p.position.x,
                p.position.y,
                p.position.z,
                p.orientation.yaw,
                p.orientation.pitch,
                p.orientation.roll
            );
        }
        Ok(s)
    }

    /// Parses the canonical text form. Non-finite sample values are allowed
    /// (recorded tracking loss); timestamps must be finite and strictly increasing.
    pub fn parse(text: &str) -> Result<Self, TraceError> {
        let mut source = String::from("unknown");
        let mut rate_hz = DEFAULT_RATE_HZ;
        let mut header_seen = false;
        let mut samples: Vec<HeadPose> = Vec::new();
        let mut last_line = 0;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            last_line = line;
            let trimmed = raw.trim_end_matches('\r');
            if trimmed.trim().is_empty() {
                continue;
            }
            if let Some(comment) = trimmed.strip_prefix('#') {
                for token in comment.split_whitespace() {
                    if let Some(v) = token.strip_prefix("source=") {
                        source = v.to_string();
                    } else if let Some(v) = token.strip_prefix("rate_hz=") {
                        rate_hz = v
                            .parse()
                            .map_err(|_| parse_err(line, format!("bad rate_hz `{v}`")))?;
                    }
                }
                continue;
            }
            if !header_seen {
                let cols: Vec<&str> = trimmed.split('\t').map(str::trim).collect();
                if cols != TRACE_COLUMNS {
                    return Err(parse_err(
                        line,
                        format!("expected header `{}`", TRACE_COLUMNS.join("\\t")),
                    ));
                }
                header_seen = true;
                continue;
            }
            let fields: Vec<&str> = trimmed.split('\t').collect();
            if fields.len() != TRACE_COLUMNS.len() {
                return Err(parse_err(
                    line,
                    format!("expected {} columns, found {}", TRACE_COLUMNS.len(), fields.len()),
                ));
            }
            let mut v = [0.0f64; 7];
            for (slot, (field, name)) in v.iter_mut().zip(fields.iter().zip(TRACE_COLUMNS)) {
                *slot = field
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(line, format!("bad {name} value `{}`", field.trim())))?;
            }
            if !v[0].is_finite() {
                return Err(parse_err(line, "timestamp must be finite"));
            }
            if let Some(prev) = samples.last() {
                if !(v[0] > prev.timestamp_ms) {
                    return Err(TraceError::Monotonicity { line, timestamp: v[0] });
                }
            }
            samples.push(HeadPose::new(
                v[0],
                Vec3::new(v[1], v[2], v[3]),
                Orientation::new(v[4], v[5], v[6]),
            ));
        }
        if !header_seen {
            return Err(parse_err(last_line.max(1), "missing header row"));
        }
        if samples.len() < 2 {
            return Err(parse_err(
                last_line.max(1),
                format!("trace needs at least 2 samples, found {}", samples.len()),
            ));
        }
        Ok(PoseTrace {
            source,
            rate_hz,
            samples,
        })
    }
}

pub fn read_trace(path: &Path) -> Result<PoseTrace, TraceError> {
    let text = read_file(path)?;
    PoseTrace::parse(&text)
}

pub fn write_trace(path: &Path, trace: &PoseTrace) -> Result<(), TraceError> {
    let text = trace.to_text()?;
    write_file(path, &text)
}

pub(crate) fn read_file(path: &Path) -> Result<String, TraceError> {
    std::fs::read_to_string(path).map_err(|source| TraceError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<(), TraceError> {
    std::fs::write(path, text).map_err(|source| TraceError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// One tab-separated record per view, columns as in [`VIEW_COLUMNS`].
pub fn format_view(v: &ViewState) -> String {
    let o = v.plane.orientation;
    let c = v.plane.center;
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
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
        v.cursor_uv.1,
        c.x,
        c.y,
        c.z
    )
}

pub fn views_to_text(views: &[ViewState]) -> String {
    let mut s = String::from("# headzoom view stream units: ms, zoom factor, uv, rad, m\n");
    s.push_str(&VIEW_COLUMNS.join("\t"));
    s.push('\n');
    for v in views {
        s.push_str(&format_view(v));
        s.push('\n');
    }
    s
}

pub fn parse_views(text: &str) -> Result<Vec<ViewState>, TraceError> {
    let mut header_seen = false;
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim_end_matches('\r');
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').map(str::trim).collect();
        if !header_seen {
            if fields != VIEW_COLUMNS {
                return Err(parse_err(line, "expected view stream header"));
            }
            header_seen = true;
            continue;
        }
        if fields.len() != VIEW_COLUMNS.len() {
            return Err(parse_err(
                line,
                format!("expected {} columns, found {}", VIEW_COLUMNS.len(), fields.len()),
            ));
        }
        let mode: Mode = fields[1].parse().map_err(|e| parse_err(line, format!("{e}")))?;
        let mut n = [0.0f64; 14];
        for (i, f) in fields.iter().enumerate() {
            if i == 1 {
                continue;
            }
            n[i] = f
                .parse()
                .map_err(|_| parse_err(line, format!("bad {} value `{f}`", VIEW_COLUMNS[i])))?;
        }
        out.push(ViewState {
            timestamp_ms: n[0],
            mode,
            zoom: n[2],
            pan_uv: (n[3], n[4]),
            lean_x: n[5],
            cursor_uv: (n[9], n[10]),
            plane: ImagePlane {
                center: Vec3::new(n[11], n[12], n[13]),
                orientation: Orientation::new(n[6], n[7], n[8]),
                width: PLANE_WIDTH,
                height: PLANE_HEIGHT,
            },
        });
    }
    if !header_seen {
        return Err(parse_err(1, "empty view stream"));
    }
    Ok(out)
}

pub fn read_views(path: &Path) -> Result<Vec<ViewState>, TraceError> {
    parse_views(&read_file(path)?)
}

pub fn write_views(path: &Path, views: &[ViewState]) -> Result<(), TraceError> {
    write_file(path, &views_to_text(views))
}
