//! Per-trial interaction metrics and the tab-separated results table.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::geometry::{HeadPose, Vec3};
use crate::modes::{ViewState, ZoomRange};
use crate::trial::{HitTest, TrialRecord};

/// Fraction of the zoom range a monotone excursion must cover to count as a zoom change.
pub const DEFAULT_ZOOM_EPSILON_FRACTION: f64 = 0.02;

/// Characters with a dedicated hover column in the results table.
pub const HOVER_CHARACTERS: [&str; 4] = ["wally", "wenda", "wizard", "odlaw"];

pub const RESULT_COLUMNS: [&str; 20] = [
    "participant",
    "mode",
    "image_id",
    "success",
    "completion_time_s",
    "false_positives",
    "total_head_movement_m",
    "total_head_rotation_rad",
    "avg_head_movement_m",
    "avg_head_rotation_rad",
    "max_lean_m",
    "hover_wally_s",
    "hover_wenda_s",
    "hover_wizard_s",
    "hover_odlaw_s",
    "zoom_change_count",
    "total_zoom_distance",
    "avg_zoom",
    "max_zoom",
    "image_user_grade",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("need at least {required} {what}, found {found}")]
    TooShort {
        what: &'static str,
        required: usize,
        found: usize,
    },
}

/// Σ |p_{i+1} − p_i| over consecutive samples.
pub fn total_head_movement(samples: &[HeadPose]) -> f64 {
    samples
        .windows(2)
        .map(|w| w[1].position.distance(w[0].position))
        .sum()
}

fn angle_between(a: Vec3, b: Vec3) -> f64 {
    // atan2 stays accurate for the tiny per-frame angles where acos does not
    a.cross(b).norm().atan2(a.dot(b))
}

/// Σ angle between consecutive forward vectors.
pub fn total_head_rotation(samples: &[HeadPose]) -> f64 {
    total_rotation_of(samples.iter().map(HeadPose::forward))
}

/// Σ angle between consecutive direction vectors.
pub fn total_rotation_of(forwards: impl IntoIterator<Item = Vec3>) -> f64 {
    let mut it = forwards.into_iter();
    let Some(mut prev) = it.next() else {
        return 0.0;
    };
    let mut sum = 0.0;
    for f in it {
        sum += angle_between(prev, f);
        prev = f;
    }
    sum
}

/// Largest |displacement along `axis`| from the first sample.
pub fn max_lean(samples: &[HeadPose], axis: Vec3) -> f64 {
    let Some(first) = samples.first() else {
        return 0.0;
    };
    let origin = first.position.dot(axis);
    samples
        .iter()
        .map(|s| (s.position.dot(axis) - origin).abs())
        .fold(0.0, f64::max)
}

/// Seconds the cursor ring spent over each target. Frame `i` lasts until
/// frame `i + 1`; the final frame contributes nothing.
pub fn hover_time(
    views: &[ViewState],
    targets: &BTreeMap<String, (f64, f64)>,
    hit: &HitTest,
) -> BTreeMap<String, f64> {
    targets
        .iter()
        .map(|(name, &target)| {
            let seconds = views
                .windows(2)
                .filter(|w| hit.hits(w[0].cursor_uv, target))
                .map(|w| (w[1].timestamp_ms - w[0].timestamp_ms) / 1000.0)
                .sum();
            (name.clone(), seconds)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoomMetrics {
    pub change_count: usize,
    pub total_distance: f64,
    pub avg_zoom: f64,
    pub max_zoom: f64,
}

/// Zoom usage. A zoom change is a monotone excursion of at least `epsilon`;
/// the direction only reverses once the zoom has moved back by `epsilon`
/// from the running extreme, so sub-`epsilon` jitter is ignored.
pub fn zoom_metrics(views: &[ViewState], epsilon: f64) -> ZoomMetrics {
    let zooms: Vec<f64> = views.iter().map(|v| v.zoom).collect();
    zoom_metrics_of(&zooms, epsilon)
}

pub fn zoom_metrics_of(zooms: &[f64], epsilon: f64) -> ZoomMetrics {
    if zooms.is_empty() {
        return ZoomMetrics {
            change_count: 0,
            total_distance: 0.0,
            avg_zoom: 0.0,
            max_zoom: 0.0,
        };
    }
    let total_distance = zooms.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let avg_zoom = zooms.iter().sum::<f64>() / zooms.len() as f64;
    let max_zoom = zooms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ZoomMetrics {
        change_count: count_zoom_changes(zooms, epsilon),
        total_distance,
        avg_zoom,
        max_zoom,
    }
}

fn count_zoom_changes(zooms: &[f64], epsilon: f64) -> usize {
    #[derive(Clone, Copy)]
    enum Dir {
        Unknown { lo: f64, hi: f64 },
        Up { anchor: f64, extreme: f64 },
        Down { anchor: f64, extreme: f64 },
    }
    let mut count = 0;
    let mut dir = Dir::Unknown {
        lo: zooms[0],
        hi: zooms[0],
    };
    for &z in &zooms[1..] {
        dir = match dir {
            Dir::Unknown { lo, hi } => {
                if z - lo >= epsilon {
                    Dir::Up { anchor: lo, extreme: z }
                } else if hi - z >= epsilon {
                    Dir::Down { anchor: hi, extreme: z }
                } else {
                    Dir::Unknown {
                        lo: lo.min(z),
                        hi: hi.max(z),
                    }
                }
            }
            Dir::Up { anchor, extreme } => {
                if z > extreme {
                    Dir::Up { anchor, extreme: z }
                } else if extreme - z >= epsilon {
                    count += 1;
                    Dir::Down { anchor: extreme, extreme: z }
                } else {
                    Dir::Up { anchor, extreme }
                }
            }
            Dir::Down { anchor, extreme } => {
                if z < extreme {
                    Dir::Down { anchor, extreme: z }
                } else if z - extreme >= epsilon {
                    count += 1;
                    Dir::Up { anchor: extreme, extreme: z }
                } else {
                    Dir::Down { anchor, extreme }
                }
            }
        };
    }
    if let Dir::Up { anchor, extreme } | Dir::Down { anchor, extreme } = dir {
        if (extreme - anchor).abs() >= epsilon {
            count += 1;
        }
    }
    count
}

/// (false positives, success).
pub fn error_metrics(trial: &TrialRecord) -> (usize, bool) {
    let false_positives = trial.attempts.iter().filter(|a| !a.correct).count();
    (false_positives, trial.outcome == crate::trial::Outcome::Success)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub participant: String,
    pub mode: crate::Mode,
    pub image_id: String,
    pub completion_time_seconds: f64,
    pub total_head_movement: f64,
    pub total_head_rotation: f64,
    pub avg_head_movement: f64,
    pub avg_head_rotation: f64,
    pub max_lean: f64,
    pub hover_time_seconds: BTreeMap<String, f64>,
    pub zoom_change_count: usize,
    pub total_zoom_distance: f64,
    pub avg_zoom: f64,
    pub max_zoom: f64,
    pub false_positives: usize,
    pub success: bool,
    pub image_user_grade: Option<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsOptions {
    pub hit: HitTest,
    /// Absolute zoom-change threshold.
    pub zoom_epsilon: f64,
    /// Lean axis; defaults to the horizontal facing of the first sample.
    pub lean_axis: Option<Vec3>,
}

impl MetricsOptions {
    pub fn for_zoom_range(zr: &ZoomRange) -> Self {
        MetricsOptions {
            hit: HitTest::default(),
            zoom_epsilon: DEFAULT_ZOOM_EPSILON_FRACTION * zr.span(),
            lean_axis: None,
        }
    }
}

impl Default for MetricsOptions {
    fn default() -> Self {
        Self::for_zoom_range(&ZoomRange::default())
    }
}

impl MetricsReport {
    /// Computes every metric for one trial. Non-finite (tracking-loss)
    /// samples are skipped for the head metrics.
    pub fn compute(trial: &TrialRecord, views: &[ViewState], opts: &MetricsOptions) -> Result<Self, MetricsError> {
        let samples: Vec<HeadPose> = trial.trace.samples.iter().copied().filter(HeadPose::is_finite).collect();
        if samples.len() < 2 {
            return Err(MetricsError::TooShort {
                what: "finite pose samples",
                required: 2,
                found: samples.len(),
            });
        }
        if views.len() < 2 {
            return Err(MetricsError::TooShort {
                what: "view states",
                required: 2,
                found: views.len(),
            });
        }
        let axis = opts.lean_axis.unwrap_or_else(|| {
            let yaw = samples[0].orientation.yaw;
            Vec3::new(yaw.sin(), 0.0, yaw.cos())
        });
        let transitions = (samples.len() - 1) as f64;
        let movement = total_head_movement(&samples);
        let rotation = total_head_rotation(&samples);
        let zoom = zoom_metrics(views, opts.zoom_epsilon);
        let (false_positives, success) = error_metrics(trial);
        Ok(MetricsReport {
            participant: trial.participant.clone(),
            mode: trial.mode,
            image_id: trial.image_id.clone(),
            completion_time_seconds: trial.duration_seconds,
            total_head_movement: movement,
            total_head_rotation: rotation,
            avg_head_movement: movement / transitions,
            avg_head_rotation: rotation / transitions,
            max_lean: max_lean(&samples, axis),
            hover_time_seconds: hover_time(views, &trial.targets, &opts.hit),
            zoom_change_count: zoom.change_count,
            total_zoom_distance: zoom.total_distance,
            avg_zoom: zoom.avg_zoom,
            max_zoom: zoom.max_zoom,
            false_positives,
            success,
            image_user_grade: trial.image_user_grade,
        })
    }

    fn hover_for(&self, name: &str) -> f64 {
        self.hover_time_seconds
            .iter()
            .filter(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| *v)
            .sum()
    }

    /// One results-table row in [`RESULT_COLUMNS`] order.
    pub fn to_row(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.participant,
            self.mode,
            self.image_id,
            u8::from(self.success),
            self.completion_time_seconds,
            self.false_positives,
            self.total_head_movement,
            self.total_head_rotation,
            self.avg_head_movement,
            self.avg_head_rotation,
            self.max_lean
        );
        for c in HOVER_CHARACTERS {
            let _ = write!(s, "\t{}", self.hover_for(c));
        }
        let _ = write!(
            s,
            "\t{}\t{}\t{}\t{}\t{}",
            self.zoom_change_count,
            self.total_zoom_distance,
            self.avg_zoom,
            self.max_zoom,
            self.image_user_grade.map_or("NA".to_string(), |g| g.to_string())
        );
        s
    }
}

pub fn results_header() -> String {
    RESULT_COLUMNS.join("\t")
}

pub fn results_table(reports: &[MetricsReport]) -> String {
    let mut s = results_header();
    s.push('\n');
    for r in reports {
        s.push_str(&r.to_row());
        s.push('\n');
    }
    s
}
