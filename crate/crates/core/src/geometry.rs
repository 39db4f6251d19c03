//! Vector and orientation primitives, image-plane placement and ray casting.
//!
//! World axes are Y-up with +Z forward at yaw 0 and +X to the viewer's right.
//! Orientations compose yaw (about the vertical axis), then pitch, then roll.
//! Positive pitch looks up; positive yaw turns from +Z towards +X.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Width of the virtual image plane in meters.
pub const PLANE_WIDTH: f64 = 2.0;
/// Height of the virtual image plane in meters.
pub const PLANE_HEIGHT: f64 = 1.0;
/// Distance from the initial head position to the plane center in meters.
pub const PLANE_DISTANCE: f64 = 2.0;

const PARALLEL_EPS: f64 = 1e-12;
const DEGENERATE_HORIZONTAL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate pose: forward vector has no horizontal component")]
    DegeneratePose,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const UP: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const FORWARD: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    /// Returns `None` for (near) zero vectors.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        if n > 0.0 && n.is_finite() {
            Some(self * (1.0 / n))
        } else {
            None
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Wraps an angle into (-π, π].
pub fn wrap_angle(a: f64) -> f64 {
    if !a.is_finite() {
        return a;
    }
    let mut w = a % (2.0 * PI);
    if w <= -PI {
        w += 2.0 * PI;
    } else if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Yaw, pitch and roll in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Orientation {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl Orientation {
    pub const fn new(yaw: f64, pitch: f64, roll: f64) -> Self {
        Orientation { yaw, pitch, roll }
    }

    /// Wraps yaw and roll into (-π, π] and clamps pitch to [-π/2, π/2].
    pub fn canonical(self) -> Self {
        Orientation {
            yaw: wrap_angle(self.yaw),
            pitch: self.pitch.clamp(-PI / 2.0, PI / 2.0),
            roll: wrap_angle(self.roll),
        }
    }

    pub fn is_finite(self) -> bool {
        self.yaw.is_finite() && self.pitch.is_finite() && self.roll.is_finite()
    }

    /// Unit view direction. Roll does not affect it.
    pub fn forward(self) -> Vec3 {
        forward_vector(self)
    }

    /// Unit right axis after roll.
    pub fn right(self) -> Vec3 {
        self.basis().0
    }

    /// Unit up axis after roll.
    pub fn up(self) -> Vec3 {
        self.basis().1
    }

    /// (right, up, forward) orthonormal frame.
    pub fn basis(self) -> (Vec3, Vec3, Vec3) {
        let (sy, cy) = self.yaw.sin_cos();
        let (sp, cp) = self.pitch.sin_cos();
        let (sr, cr) = self.roll.sin_cos();
        let forward = Vec3::new(sy * cp, sp, cy * cp);
        let right0 = Vec3::new(cy, 0.0, -sy);
        let up0 = Vec3::new(-sy * sp, cp, -cy * sp);
        let right = right0 * cr + up0 * sr;
        let up = up0 * cr - right0 * sr;
        (right, up, forward)
    }
}

/// Direction the head is facing; yaw 0, pitch 0 is +Z.
pub fn forward_vector(o: Orientation) -> Vec3 {
    let (sy, cy) = o.yaw.sin_cos();
    let (sp, cp) = o.pitch.sin_cos();
    Vec3::new(sy * cp, sp, cy * cp)
}

/// A single timestamped head sample. Timestamps are milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HeadPose {
    pub timestamp_ms: f64,
    pub position: Vec3,
    pub orientation: Orientation,
}

impl HeadPose {
    pub const fn new(timestamp_ms: f64, position: Vec3, orientation: Orientation) -> Self {
        HeadPose {
            timestamp_ms,
            position,
            orientation,
        }
    }

    pub fn forward(&self) -> Vec3 {
        forward_vector(self.orientation)
    }

    pub fn is_finite(&self) -> bool {
        self.timestamp_ms.is_finite() && self.position.is_finite() && self.orientation.is_finite()
    }
}

/// The 2 m × 1 m virtual image. `orientation` is the direction a viewer
/// looks when facing the image, so the visible face points along `-forward`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImagePlane {
    pub center: Vec3,
    pub orientation: Orientation,
    pub width: f64,
    pub height: f64,
}

impl ImagePlane {
    pub fn new(center: Vec3, orientation: Orientation) -> Self {
        ImagePlane {
            center,
            orientation,
            width: PLANE_WIDTH,
            height: PLANE_HEIGHT,
        }
    }

    /// Unit normal of the visible face, pointing back towards the viewer.
    pub fn normal(&self) -> Vec3 {
        -self.orientation.forward()
    }

    /// Signed distance of `p` from the plane along the facing normal.
    pub fn signed_distance(&self, p: Vec3) -> f64 {
        (p - self.center).dot(self.normal())
    }

    /// World point for normalized image coordinates. `v` grows downwards.
    pub fn point_at(&self, uv: (f64, f64)) -> Vec3 {
        let (right, up, _) = self.orientation.basis();
        self.center + right * ((uv.0 - 0.5) * self.width) + up * ((0.5 - uv.1) * self.height)
    }

    /// Unclamped normalized coordinates of a world point projected onto the plane.
    pub fn uv_of(&self, p: Vec3) -> (f64, f64) {
        let (right, up, _) = self.orientation.basis();
        let local = p - self.center;
        (
            0.5 + local.dot(right) / self.width,
            0.5 - local.dot(up) / self.height,
        )
    }
}

/// Places the image 2 m ahead along the horizontalized initial forward
/// vector, at eye height, upright and facing the user.
pub fn place_plane(initial: &HeadPose) -> Result<ImagePlane, GeometryError> {
    let o = initial.orientation;
    // |(fx, 0, fz)| = cos(pitch)
    if !(o.pitch.cos().abs() > DEGENERATE_HORIZONTAL) || !o.yaw.is_finite() {
        return Err(GeometryError::DegeneratePose);
    }
    let (sy, cy) = o.yaw.sin_cos();
    let horizontal = Vec3::new(sy, 0.0, cy);
    let center = initial.position + horizontal * PLANE_DISTANCE;
    Ok(ImagePlane::new(
        center,
        Orientation::new(wrap_angle(o.yaw), 0.0, 0.0),
    ))
}

/// Result of casting a ray onto the image plane's carrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneHit {
    /// Geometric intersection with the infinite plane.
    pub point: Vec3,
    /// Normalized image coordinates clamped to [0,1]².
    pub uv: (f64, f64),
    /// Normalized image coordinates before clamping.
    pub raw_uv: (f64, f64),
}

impl PlaneHit {
    pub fn inside(&self) -> bool {
        (0.0..=1.0).contains(&self.raw_uv.0) && (0.0..=1.0).contains(&self.raw_uv.1)
    }
}

/// Intersects the ray `origin + t·dir` (t ≥ 0) with the plane.
///
/// Hits outside the rectangle are clamped onto its edge and still returned.
/// `None` means the ray is parallel to the plane or points away from it.
pub fn raycast_plane(origin: Vec3, dir: Vec3, plane: &ImagePlane) -> Option<PlaneHit> {
    let normal = plane.normal();
    let denom = dir.dot(normal);
    if !denom.is_finite() || denom.abs() < PARALLEL_EPS {
        return None;
    }
    let t = (plane.center - origin).dot(normal) / denom;
    if !(t >= 0.0) || !t.is_finite() {
        return None;
    }
    let point = origin + dir * t;
    let raw_uv = plane.uv_of(point);
    let uv = (raw_uv.0.clamp(0.0, 1.0), raw_uv.1.clamp(0.0, 1.0));
    Some(PlaneHit { point, uv, raw_uv })
}
