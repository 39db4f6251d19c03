//! Independent reference implementations shared by the integration tests and
//! the acceptance suite. Nothing here calls into the code it checks, apart
//! from plain data types.
#![allow(dead_code)]

use std::collections::BTreeMap;

pub type V3 = [f64; 3];

pub fn add(a: V3, b: V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(a: V3, s: f64) -> V3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: V3) -> f64 {
    dot(a, a).sqrt()
}

type M3 = [[f64; 3]; 3];

fn mul(a: M3, b: M3) -> M3 {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    m
}

fn apply(m: M3, v: V3) -> V3 {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

/// Head rotation as a matrix product: heading about +Y, then elevation
/// (positive turns +Z towards +Y), then roll (positive turns +X towards +Y).
pub fn rotation(yaw: f64, pitch: f64, roll: f64) -> M3 {
    let (sy, cy) = yaw.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let (sr, cr) = roll.sin_cos();
    let ry = [[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]];
    let rx = [[1.0, 0.0, 0.0], [0.0, cp, sp], [0.0, -sp, cp]];
    let rz = [[cr, -sr, 0.0], [sr, cr, 0.0], [0.0, 0.0, 1.0]];
    mul(ry, mul(rx, rz))
}

/// (right, up, forward) columns of [`rotation`].
pub fn frame(yaw: f64, pitch: f64, roll: f64) -> (V3, V3, V3) {
    let m = rotation(yaw, pitch, roll);
    (
        apply(m, [1.0, 0.0, 0.0]),
        apply(m, [0.0, 1.0, 0.0]),
        apply(m, [0.0, 0.0, 1.0]),
    )
}

/// Ray/plane hit by marching in 1 cm steps until the signed distance changes
/// sign, then bisecting the bracket to machine precision.
pub fn march_bisect(origin: V3, dir: V3, center: V3, normal: V3, max_t: f64) -> Option<V3> {
    let f = |t: f64| dot(sub(add(origin, scale(dir, t)), center), normal);
    let step = 0.01;
    let f0 = f(0.0);
    if f0 == 0.0 {
        return Some(origin);
    }
    let mut lo = 0.0;
    let mut hi = step;
    while hi <= max_t + step {
        if f(hi).signum() != f0.signum() || f(hi) == 0.0 {
            break;
        }
        lo = hi;
        hi += step;
    }
    if hi > max_t + step {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if f(mid).signum() == f0.signum() && f(mid) != 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(add(origin, scale(dir, 0.5 * (lo + hi))))
}

/// Normalized image coordinates of `p` on a 2 × 1 m plane, `v` downwards.
pub fn plane_uv(p: V3, center: V3, right: V3, up: V3) -> (f64, f64) {
    let local = sub(p, center);
    (0.5 + dot(local, right) / 2.0, 0.5 - dot(local, up) / 1.0)
}

/// Lean coordinate from first principles: signed displacement along the
/// horizontal facing of `neutral_yaw`, scaled per side.
pub fn lean(p: V3, neutral: V3, neutral_yaw: f64, forward: f64, backward: f64) -> f64 {
    let axis = [neutral_yaw.sin(), 0.0, neutral_yaw.cos()];
    let d = dot(sub(p, neutral), axis);
    let x = if d > 0.0 {
        0.5 + d / (2.0 * forward)
    } else {
        0.5 + d / (2.0 * backward)
    };
    x.clamp(0.0, 1.0)
}

pub fn path_length(points: &[V3]) -> f64 {
    let mut total = 0.0;
    for i in 1..points.len() {
        let d = sub(points[i], points[i - 1]);
        total += (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    }
    total
}

/// Sum of angles between consecutive unit view directions, each angle via
/// the chord length: θ = 2·asin(|a − b| / 2).
pub fn angular_path(orientations: &[(f64, f64)]) -> f64 {
    let dirs: Vec<V3> = orientations.iter().map(|&(yaw, pitch)| frame(yaw, pitch, 0.0).2).collect();
    let mut total = 0.0;
    for i in 1..dirs.len() {
        let chord = norm(sub(dirs[i], dirs[i - 1]));
        total += 2.0 * (chord / 2.0).min(1.0).asin();
    }
    total
}

/// Largest absolute displacement from the first point along the first
/// sample's horizontal facing.
pub fn max_abs_lean(points: &[V3], first_yaw: f64) -> f64 {
    let axis = [first_yaw.sin(), 0.0, first_yaw.cos()];
    let mut best: f64 = 0.0;
    for p in points {
        best = best.max(dot(sub(*p, points[0]), axis).abs());
    }
    best
}

/// Hover seconds per target by integrating a zero-order-held cursor on a
/// fine time grid (0.1 ms). Within one frame interval of the exact value.
pub fn hover_grid(
    times_ms: &[f64],
    cursors: &[(f64, f64)],
    targets: &BTreeMap<String, (f64, f64)>,
) -> BTreeMap<String, f64> {
    let inside = |c: (f64, f64), t: (f64, f64)| {
        let du = (c.0 - t.0) * 2800.0;
        let dv = (c.1 - t.1) * 1749.0;
        (du * du + dv * dv).sqrt() < 105.0
    };
    let step = 0.1;
    let mut out = BTreeMap::new();
    for (name, &target) in targets {
        let mut ms = 0.0;
        let mut frame = 0;
        let mut t = times_ms[0] + step / 2.0;
        let end = *times_ms.last().unwrap();
        while t < end {
            while frame + 1 < times_ms.len() && times_ms[frame + 1] <= t {
                frame += 1;
            }
            if inside(cursors[frame], target) {
                ms += step;
            }
            t += step;
        }
        out.insert(name.clone(), ms / 1000.0);
    }
    out
}

/// Number of alternating monotone legs of height at least `eps`, found as
/// the longest alternating subsequence by dynamic programming.
pub fn zoom_legs(z: &[f64], eps: f64) -> usize {
    let n = z.len();
    // best[i].0: most legs ending at i with an upward leg; .1 downward
    let mut best = vec![(0usize, 0usize); n];
    let mut overall = 0;
    for j in 0..n {
        for i in 0..j {
            if z[j] - z[i] >= eps {
                best[j].0 = best[j].0.max(best[i].1 + 1);
            }
            if z[i] - z[j] >= eps {
                best[j].1 = best[j].1.max(best[i].0 + 1);
            }
        }
        overall = overall.max(best[j].0).max(best[j].1);
    }
    overall
}

/// Sums of squares for a subjects × conditions table from the total
/// decomposition: SS_error = SS_total − SS_subjects − SS_conditions.
pub struct SumsOfSquares {
    pub total: f64,
    pub subjects: f64,
    pub conditions: f64,
    pub error: f64,
}

pub fn sums_of_squares(data: &[Vec<f64>]) -> SumsOfSquares {
    let n = data.len() as f64;
    let k = data[0].len() as f64;
    let all: Vec<f64> = data.iter().flatten().copied().collect();
    let grand = all.iter().sum::<f64>() / (n * k);
    let total: f64 = all.iter().map(|x| (x - grand) * (x - grand)).sum();
    let mut subjects = 0.0;
    for row in data {
        let m = row.iter().sum::<f64>() / k;
        subjects += k * (m - grand) * (m - grand);
    }
    let mut conditions = 0.0;
    for j in 0..data[0].len() {
        let m = data.iter().map(|r| r[j]).sum::<f64>() / n;
        conditions += n * (m - grand) * (m - grand);
    }
    SumsOfSquares {
        total,
        subjects,
        conditions,
        error: total - subjects - conditions,
    }
}

/// Two-sided sign-flip permutation p-value of the mean paired difference,
/// drawing `rounds` random sign vectors from a xorshift generator.
pub fn sign_flip_p(diffs: &[f64], rounds: usize, seed: u64) -> f64 {
    let observed = diffs.iter().sum::<f64>().abs();
    let mut state = seed.max(1);
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    let mut extreme = 0usize;
    for _ in 0..rounds {
        let mut bits = 0u64;
        let mut left = 0;
        let mut s = 0.0;
        for d in diffs {
            if left == 0 {
                bits = next();
                left = 64;
            }
            s += if bits & 1 == 1 { *d } else { -*d };
            bits >>= 1;
            left -= 1;
        }
        if s.abs() >= observed - 1e-12 {
            extreme += 1;
        }
    }
    extreme as f64 / rounds as f64
}
