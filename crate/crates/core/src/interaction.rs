//! Mapping from operator input to robot pose commands.
//!
//! Each mode has an `enter` that captures whatever it needs at the moment the
//! mode becomes active, and an `update` that runs once per tick.
//!
//! * Operation: relative position mapping scaled per axis, direct attitude.
//! * Locking: hold the pose captured on entry.
//! * Spherical: the robot sits on the shoulder→hand ray at radius `r`; arm
//!   extension grows or shrinks `r` one increment per tick.
//! * Cartesian: a joystick in the air; outside the stop zone around a point in
//!   front of the shoulder the target is stepped a fixed distance toward the hand.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, Pose, UnitQuat, Vec3, DIRECTION_EPSILON};
use crate::plant::PoseCommand;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InteractionError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("scaling factor {0} outside [0, 1] on some axis")]
    InvalidScale(Vec3),
    #[error("invalid spherical parameters: {0}")]
    InvalidSpherical(String),
    #[error("invalid cartesian parameters: {0}")]
    InvalidCartesian(String),
}

/// One timestamped operator sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorFrame {
    /// Seconds on the operator's monotonic clock.
    pub t: f64,
    pub hand: Pose,
    pub shoulder: Vec3,
    /// Raw glove stretch channels; higher means more flexed.
    pub knuckles: Vec<f64>,
}

/// Per-axis scaling for Operation mode, each component in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec3", into = "Vec3")]
pub struct ScaleVector(Vec3);

impl ScaleVector {
    pub const UNIT: ScaleVector = ScaleVector(Vec3::new(1.0, 1.0, 1.0));

    pub fn new(k: Vec3) -> Result<Self, InteractionError> {
        let ok = |v: f64| (0.0..=1.0).contains(&v);
        if ok(k.x) && ok(k.y) && ok(k.z) {
            Ok(Self(k))
        } else {
            Err(InteractionError::InvalidScale(k))
        }
    }

    pub fn get(&self) -> Vec3 {
        self.0
    }
}

impl Default for ScaleVector {
    fn default() -> Self {
        Self::UNIT
    }
}

impl TryFrom<Vec3> for ScaleVector {
    type Error = InteractionError;
    fn try_from(v: Vec3) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<ScaleVector> for Vec3 {
    fn from(k: ScaleVector) -> Self {
        k.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperationState {
    pub robot_anchor: Pose,
    pub hand_anchor_pos: Vec3,
    pub k: ScaleVector,
}

impl OperationState {
    pub fn enter(robot: &Pose, frame: &OperatorFrame, k: ScaleVector) -> Self {
        Self { robot_anchor: *robot, hand_anchor_pos: frame.hand.position, k }
    }

    pub fn update(&self, frame: &OperatorFrame) -> PoseCommand {
        let displacement = frame.hand.position - self.hand_anchor_pos;
        PoseCommand::new(self.robot_anchor.position + self.k.get().hadamard(displacement), frame.hand.orientation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LockState {
    pub locked: Pose,
}

impl LockState {
    pub fn enter(robot: &Pose) -> Self {
        Self { locked: *robot }
    }

    pub fn update(&self) -> PoseCommand {
        PoseCommand::hold(&self.locked)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SphericalParams {
    pub r_min: f64,
    pub r_max: f64,
    pub d_min: f64,
    pub d_max: f64,
    /// Radius change per tick, meters.
    pub delta_r: f64,
}

impl Default for SphericalParams {
    fn default() -> Self {
        Self { r_min: 0.5, r_max: 5.0, d_min: 0.25, d_max: 0.45, delta_r: 0.01 }
    }
}

impl SphericalParams {
    pub fn validate(&self) -> Result<(), InteractionError> {
        let fail = |m: &str| Err(InteractionError::InvalidSpherical(m.to_owned()));
        let all = [self.r_min, self.r_max, self.d_min, self.d_max, self.delta_r];
        if all.iter().any(|v| !v.is_finite()) {
            return fail("non-finite value");
        }
        if !(self.r_min > 0.0 && self.r_min <= self.r_max) {
            return fail("need 0 < r_min <= r_max");
        }
        if !(self.d_min > 0.0 && self.d_min < self.d_max) {
            return fail("need 0 < d_min < d_max");
        }
        if !(self.delta_r > 0.0) {
            return fail("need delta_r > 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalState {
    /// Commanded shoulder-to-robot distance.
    pub r: f64,
    pub params: SphericalParams,
}

impl SphericalState {
    /// Starts at the robot's current distance from the shoulder (clamped), so
    /// entering the mode does not move the target radially.
    pub fn enter(robot: &Pose, frame: &OperatorFrame, params: SphericalParams) -> Self {
        let r = robot.position.distance(frame.shoulder).clamp(params.r_min, params.r_max);
        Self { r, params }
    }

    pub fn update(&self, frame: &OperatorFrame) -> Result<(PoseCommand, SphericalState), InteractionError> {
        let p = &self.params;
        let shoulder_to_hand = frame.hand.position - frame.shoulder;
        let polar = shoulder_to_hand.normalize()?;
        let reach = shoulder_to_hand.norm();
        let mut r = self.r;
        if reach < p.d_min {
            r -= p.delta_r;
        } else if reach > p.d_max {
            r += p.delta_r;
        }
        r = r.min(p.r_max).max(p.r_min);
        let cmd = PoseCommand::new(frame.shoulder + r * polar, frame.hand.orientation);
        Ok((cmd, SphericalState { r, params: *p }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CartesianParams {
    /// Joystick origin relative to the shoulder, world frame.
    pub origin_offset: Vec3,
    /// Stop-zone radius around the origin, meters.
    pub d_threshold: f64,
    /// Target step per tick outside the stop zone, meters.
    pub delta_d: f64,
}

impl Default for CartesianParams {
    fn default() -> Self {
        Self { origin_offset: Vec3::new(0.3, 0.0, 0.0), d_threshold: 0.15, delta_d: 0.02 }
    }
}

impl CartesianParams {
    pub fn validate(&self) -> Result<(), InteractionError> {
        let fail = |m: &str| Err(InteractionError::InvalidCartesian(m.to_owned()));
        if !self.origin_offset.is_finite() || !self.d_threshold.is_finite() || !self.delta_d.is_finite() {
            return fail("non-finite value");
        }
        if !(self.d_threshold > DIRECTION_EPSILON) {
            return fail("d_threshold must exceed the direction epsilon");
        }
        if !(self.delta_d > 0.0) {
            return fail("need delta_d > 0");
        }
        Ok(())
    }
}

/// Cartesian mode carries no evolving state; the origin follows the live
/// shoulder every tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianState {
    pub params: CartesianParams,
}

impl CartesianState {
    pub fn enter(params: CartesianParams) -> Self {
        Self { params }
    }

    pub fn origin(&self, shoulder: Vec3) -> Vec3 {
        shoulder + self.params.origin_offset
    }

    pub fn update(&self, robot_pos: Vec3, frame: &OperatorFrame) -> PoseCommand {
        let offset = frame.hand.position - self.origin(frame.shoulder);
        let position = if offset.norm() > self.params.d_threshold {
            match offset.normalize() {
                Ok(unit) => robot_pos + self.params.delta_d * unit,
                Err(_) => robot_pos,
            }
        } else {
            robot_pos
        };
        PoseCommand::new(position, frame.hand.orientation)
    }
}

/// Replaces the commanded altitude with the hand's altitude.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeightOverride {
    pub enabled: bool,
    pub z_offset: f64,
}

impl HeightOverride {
    pub fn apply(&self, cmd: PoseCommand, frame: &OperatorFrame) -> PoseCommand {
        if !self.enabled {
            return cmd;
        }
        let mut out = cmd;
        out.position.z = frame.hand.position.z + self.z_offset;
        out
    }
}

pub fn operation_enter(robot: &Pose, frame: &OperatorFrame, k: ScaleVector) -> OperationState {
    OperationState::enter(robot, frame, k)
}

pub fn operation_update(s: &OperationState, frame: &OperatorFrame) -> PoseCommand {
    s.update(frame)
}

pub fn lock_enter(robot: &Pose) -> LockState {
    LockState::enter(robot)
}

pub fn lock_update(s: &LockState) -> PoseCommand {
    s.update()
}

pub fn spherical_enter(robot: &Pose, frame: &OperatorFrame, params: SphericalParams) -> SphericalState {
    SphericalState::enter(robot, frame, params)
}

pub fn spherical_update(
    s: &SphericalState,
    frame: &OperatorFrame,
) -> Result<(PoseCommand, SphericalState), InteractionError> {
    s.update(frame)
}

pub fn cartesian_update(s: &CartesianState, robot_pos: Vec3, frame: &OperatorFrame) -> PoseCommand {
    s.update(robot_pos, frame)
}

pub fn apply_height_override(cmd: PoseCommand, frame: &OperatorFrame, h: &HeightOverride) -> PoseCommand {
    h.apply(cmd, frame)
}

/// A frame with the given hand position and orientation; knuckles empty.
pub fn frame_at(t: f64, hand_pos: Vec3, hand_q: UnitQuat, shoulder: Vec3) -> OperatorFrame {
    OperatorFrame { t, hand: Pose::new(hand_pos, hand_q), shoulder, knuckles: Vec::new() }
}
