//! Three-vectors and unit quaternions.
//!
//! Quaternions are stored scalar-first (`[w, x, y, z]`) everywhere, including
//! on the wire. Hemisphere canonicalization (`w >= 0`) is not applied by the
//! math operations here; callers that serialize for display use
//! [`UnitQuat::canonical`].

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Directions shorter than this are treated as undefined.
pub const DIRECTION_EPSILON: f64 = 1e-6;

/// Below this 4D angle slerp falls back to normalized lerp.
const SLERP_SMALL_ANGLE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeometryError {
    #[error("direction is degenerate (norm {norm:e} <= {DIRECTION_EPSILON:e})")]
    DegenerateDirection { norm: f64 },
    #[error("quaternion [{0}, {1}, {2}, {3}] cannot be normalized")]
    InvalidQuaternion(f64, f64, f64, f64),
    #[error("vector has non-finite components")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
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
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Elementwise product.
    pub fn hadamard(self, other: Vec3) -> Vec3 {
        Vec3::new(self.x * other.x, self.y * other.y, self.z * other.z)
    }

    /// Unit vector in the direction of `self`.
    ///
    /// Fails with [`GeometryError::DegenerateDirection`] when the norm is at or
    /// below [`DIRECTION_EPSILON`].
    pub fn normalize(self) -> Result<Vec3, GeometryError> {
        let n = self.norm();
        if !(n > DIRECTION_EPSILON) {
            return Err(GeometryError::DegenerateDirection { norm: n });
        }
        Ok(Vec3::new(self.x / n, self.y / n, self.z / n))
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }
}

impl TryFrom<[f64; 3]> for Vec3 {
    type Error = GeometryError;

    fn try_from(v: [f64; 3]) -> Result<Self, Self::Error> {
        let out = Vec3::new(v[0], v[1], v[2]);
        if out.is_finite() {
            Ok(out)
        } else {
            Err(GeometryError::NonFinite)
        }
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}, {}]", self.x, self.y, self.z)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        Vec3::new(self * v.x, self * v.y, self * v.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// A rotation as a unit quaternion, scalar first.
///
/// Every constructor and every operation returning a `UnitQuat` normalizes, so
/// `|‖q‖ − 1|` stays below 1e-12.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct UnitQuat {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl Default for UnitQuat {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl UnitQuat {
    pub const IDENTITY: UnitQuat = UnitQuat { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    /// Normalizes `[w, x, y, z]`. Zero-length or non-finite input is rejected.
    /// Input already unit to within 1e-12 is stored unchanged.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !n.is_finite() || n <= 1e-12 {
            return Err(GeometryError::InvalidQuaternion(w, x, y, z));
        }
        if (n - 1.0).abs() <= 1e-12 {
            return Ok(Self { w, x, y, z });
        }
        Ok(Self { w: w / n, x: x / n, y: y / n, z: z / n })
    }

    pub fn from_array(q: [f64; 4]) -> Result<Self, GeometryError> {
        Self::new(q[0], q[1], q[2], q[3])
    }

    /// Rotation of `angle` radians about `axis` (need not be unit length).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Result<Self, GeometryError> {
        let a = axis.normalize()?;
        let (s, c) = (angle / 2.0).sin_cos();
        Self::new(c, a.x * s, a.y * s, a.z * s)
    }

    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    fn renormalized(w: f64, x: f64, y: f64, z: f64) -> Self {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        Self { w: w / n, x: x / n, y: y / n, z: z / n }
    }

    /// 4D inner product.
    pub fn dot(&self, other: &UnitQuat) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// Hamilton product `self ∘ rhs`.
    pub fn mul(&self, rhs: &UnitQuat) -> UnitQuat {
        let (a, b) = (self, rhs);
        Self::renormalized(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }

    pub fn conj(&self) -> UnitQuat {
        UnitQuat { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    /// Same rotation, opposite sign.
    pub fn negated(&self) -> UnitQuat {
        UnitQuat { w: -self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    /// Representative with `w >= 0`.
    pub fn canonical(&self) -> UnitQuat {
        if self.w < 0.0 {
            self.negated()
        } else {
            *self
        }
    }

    /// Rotation angle of `self* ∘ other`, in `[0, π]`, insensitive to the sign
    /// of either argument.
    ///
    /// Equal to `2·acos(min(1, |a·b|))`, evaluated through `atan2` so it stays
    /// accurate for small angles.
    pub fn error_angle(&self, other: &UnitQuat) -> f64 {
        let (a, b) = (self, other);
        let w = a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
        let x = a.w * b.x - a.x * b.w - a.y * b.z + a.z * b.y;
        let y = a.w * b.y + a.x * b.z - a.y * b.w - a.z * b.x;
        let z = a.w * b.z - a.x * b.y + a.y * b.x - a.z * b.w;
        let v = (x * x + y * y + z * z).sqrt();
        2.0 * v.atan2(w.abs())
    }

    /// Shortest-arc spherical interpolation; `t` is clamped to `[0, 1]`.
    pub fn slerp(&self, other: &UnitQuat, t: f64) -> UnitQuat {
        let t = t.clamp(0.0, 1.0);
        let a = *self;
        let b = if a.dot(other) < 0.0 { other.negated() } else { *other };
        if a == b {
            return a;
        }
        let diff = [a.w - b.w, a.x - b.x, a.y - b.y, a.z - b.z];
        let sum = [a.w + b.w, a.x + b.x, a.y + b.y, a.z + b.z];
        let len = |v: [f64; 4]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + v[3] * v[3]).sqrt();
        // angle between a and b as 4-vectors
        let theta = 2.0 * len(diff).atan2(len(sum));
        let (sa, sb) = if theta < SLERP_SMALL_ANGLE {
            (1.0 - t, t)
        } else {
            let s = theta.sin();
            (((1.0 - t) * theta).sin() / s, (t * theta).sin() / s)
        };
        Self::renormalized(sa * a.w + sb * b.w, sa * a.x + sb * b.x, sa * a.y + sb * b.y, sa * a.z + sb * b.z)
    }

    /// Rotates `v` by this quaternion.
    pub fn rotate(&self, v: Vec3) -> Vec3 {
        let u = Vec3::new(self.x, self.y, self.z);
        let t = 2.0 * u.cross(v);
        v + self.w * t + u.cross(t)
    }
}

impl Mul for UnitQuat {
    type Output = UnitQuat;
    fn mul(self, rhs: UnitQuat) -> UnitQuat {
        UnitQuat::mul(&self, &rhs)
    }
}

impl TryFrom<[f64; 4]> for UnitQuat {
    type Error = GeometryError;
    fn try_from(q: [f64; 4]) -> Result<Self, Self::Error> {
        UnitQuat::from_array(q)
    }
}

impl From<UnitQuat> for [f64; 4] {
    fn from(q: UnitQuat) -> Self {
        q.to_array()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: UnitQuat,
}

impl Pose {
    pub fn new(position: Vec3, orientation: UnitQuat) -> Self {
        Self { position, orientation }
    }
}

pub fn quat_mul(a: &UnitQuat, b: &UnitQuat) -> UnitQuat {
    a.mul(b)
}

pub fn quat_conj(q: &UnitQuat) -> UnitQuat {
    q.conj()
}

pub fn quat_error_angle(a: &UnitQuat, b: &UnitQuat) -> f64 {
    a.error_angle(b)
}

pub fn slerp(a: &UnitQuat, b: &UnitQuat, t: f64) -> UnitQuat {
    a.slerp(b, t)
}

pub fn normalize(v: Vec3) -> Result<Vec3, GeometryError> {
    v.normalize()
}
