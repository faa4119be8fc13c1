//! Independent reference implementations and random input generators shared
//! by the integration tests. Oracles work on plain arrays so they share no
//! arithmetic helpers with the library.

#![allow(dead_code, clippy::assign_op_pattern)]

use omniteleop::geometry::{Pose, UnitQuat, Vec3};
use omniteleop::interaction::OperatorFrame;
use rand::Rng;

pub type V = [f64; 3];

pub fn v(p: Vec3) -> V {
    p.to_array()
}

fn sub(a: V, b: V) -> V {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(a: V) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// Spherical update, step by step: polar direction, radius nudge on leaving
/// the neutral band, clamp, project.
pub fn spherical_oracle(
    r: f64,
    hand: V,
    shoulder: V,
    (r_min, r_max, d_min, d_max, delta_r): (f64, f64, f64, f64, f64),
) -> (V, f64) {
    let h = sub(hand, shoulder);
    let len = norm(h);
    let d_pol = [h[0] / len, h[1] / len, h[2] / len];
    let mut r = r;
    if len < d_min {
        r = r - delta_r;
    } else if len > d_max {
        r = r + delta_r;
    }
    r = f64::max(f64::min(r, r_max), r_min);
    let p = [shoulder[0] + r * d_pol[0], shoulder[1] + r * d_pol[1], shoulder[2] + r * d_pol[2]];
    (p, r)
}

/// Cartesian update: joystick origin from the live shoulder, fixed step
/// toward the hand outside the stop zone.
pub fn cartesian_oracle(robot: V, hand: V, shoulder: V, (offset, d_threshold, delta_d): (V, f64, f64)) -> V {
    let p_j = [shoulder[0] + offset[0], shoulder[1] + offset[1], shoulder[2] + offset[2]];
    let d = sub(hand, p_j);
    let len = norm(d);
    if len > d_threshold {
        let u = [d[0] / len, d[1] / len, d[2] / len];
        [robot[0] + delta_d * u[0], robot[1] + delta_d * u[1], robot[2] + delta_d * u[2]]
    } else {
        robot
    }
}

/// Rotation angle between two unit quaternions (scalar first), via the
/// relative rotation conj(a) * b.
pub fn angle_between(a: [f64; 4], b: [f64; 4]) -> f64 {
    let [aw, ax, ay, az] = [a[0], -a[1], -a[2], -a[3]];
    let [bw, bx, by, bz] = b;
    let w = aw * bw - ax * bx - ay * by - az * bz;
    let x = aw * bx + ax * bw + ay * bz - az * by;
    let y = aw * by - ax * bz + ay * bw + az * bx;
    let z = aw * bz + ax * by - ay * bx + az * bw;
    2.0 * (x * x + y * y + z * z).sqrt().atan2(w.abs())
}

/// Distance from a point to a polyline in the plane.
pub fn distance_to_polyline(p: [f64; 2], line: &[[f64; 2]]) -> f64 {
    line.windows(2)
        .map(|s| {
            let (a, b) = (s[0], s[1]);
            let ab = [b[0] - a[0], b[1] - a[1]];
            let ap = [p[0] - a[0], p[1] - a[1]];
            let len2 = ab[0] * ab[0] + ab[1] * ab[1];
            let t = if len2 == 0.0 { 0.0 } else { ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0) };
            let q = [a[0] + t * ab[0] - p[0], a[1] + t * ab[1] - p[1]];
            (q[0] * q[0] + q[1] * q[1]).sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn random_vec<R: Rng>(rng: &mut R, scale: f64) -> Vec3 {
    Vec3::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale), rng.gen_range(-scale..scale))
}

pub fn random_quat<R: Rng>(rng: &mut R) -> UnitQuat {
    loop {
        let q =
            [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        if q.iter().map(|c| c * c).sum::<f64>() > 0.01 {
            return UnitQuat::from_array(q).expect("nonzero");
        }
    }
}

pub fn random_pose<R: Rng>(rng: &mut R, scale: f64) -> Pose {
    Pose::new(random_vec(rng, scale), random_quat(rng))
}

/// Hand at a random distance in `reach` from a random shoulder.
pub fn random_frame<R: Rng>(rng: &mut R, t: f64, reach: std::ops::Range<f64>) -> OperatorFrame {
    let shoulder = random_vec(rng, 2.0);
    let dir = loop {
        if let Ok(d) = random_vec(rng, 1.0).normalize() {
            break d;
        }
    };
    let hand = shoulder + rng.gen_range(reach) * dir;
    OperatorFrame {
        t,
        hand: Pose::new(hand, random_quat(rng)),
        shoulder,
        knuckles: (0..5).map(|_| rng.gen_range(0.0..1.0)).collect(),
    }
}
