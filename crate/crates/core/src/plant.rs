//! First-order closed-loop model of the aerial robot.
//!
//! The flight controller is abstracted as exponential convergence of the pose
//! toward the commanded pose: position per axis with time constants `t_p`, and
//! attitude along the geodesic with time constant `t_q`. Both are integrated in
//! closed form, so a step is exact and stable for any `dt > 0`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Pose, UnitQuat, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum PlantError {
    #[error("time step must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error("time constants must be positive (t_p = {t_p}, t_q = {t_q})")]
    InvalidTimeConstant { t_p: Vec3, t_q: f64 },
}

/// Target pose handed to the flight controller.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseCommand {
    pub position: Vec3,
    pub orientation: UnitQuat,
}

impl PoseCommand {
    pub fn new(position: Vec3, orientation: UnitQuat) -> Self {
        Self { position, orientation }
    }

    pub fn hold(pose: &Pose) -> Self {
        Self::new(pose.position, pose.orientation)
    }

    pub fn as_pose(&self) -> Pose {
        Pose::new(self.position, self.orientation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantParams {
    /// Per-axis position time constants, seconds.
    pub t_p: Vec3,
    /// Attitude time constant, seconds.
    pub t_q: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self { t_p: Vec3::new(0.8, 0.8, 0.8), t_q: 0.8 }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<(), PlantError> {
        let ok = self.t_p.x > 0.0
            && self.t_p.y > 0.0
            && self.t_p.z > 0.0
            && self.t_q > 0.0
            && self.t_p.is_finite()
            && self.t_q.is_finite();
        if ok {
            Ok(())
        } else {
            Err(PlantError::InvalidTimeConstant { t_p: self.t_p, t_q: self.t_q })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub pose: Pose,
    params: PlantParams,
}

impl RobotState {
    pub fn new(pose: Pose, params: PlantParams) -> Result<Self, PlantError> {
        params.validate()?;
        Ok(Self { pose, params })
    }

    pub fn params(&self) -> &PlantParams {
        &self.params
    }

    /// Advances the robot by `dt` seconds toward `cmd`.
    pub fn step(&self, cmd: &PoseCommand, dt: f64) -> Result<RobotState, PlantError> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(PlantError::NonPositiveDt(dt));
        }
        let t_p = self.params.t_p;
        let decay = Vec3::new((-dt / t_p.x).exp(), (-dt / t_p.y).exp(), (-dt / t_p.z).exp());
        let p = self.pose.position;
        let c = cmd.position;
        let position = Vec3::new(c.x + (p.x - c.x) * decay.x, c.y + (p.y - c.y) * decay.y, c.z + (p.z - c.z) * decay.z);
        let alpha = -(-dt / self.params.t_q).exp_m1();
        let orientation = self.pose.orientation.slerp(&cmd.orientation, alpha);
        Ok(RobotState { pose: Pose::new(position, orientation), params: self.params })
    }
}

pub fn step_plant(state: &RobotState, cmd: &PoseCommand, dt: f64) -> Result<RobotState, PlantError> {
    state.step(cmd, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn unit_params() -> PlantParams {
        PlantParams { t_p: Vec3::new(1.0, 1.0, 1.0), t_q: 0.5 }
    }

    #[test]
    fn fixed_point_is_unchanged() {
        let pose = Pose::new(Vec3::new(1.0, -2.0, 3.0), UnitQuat::new(0.3, 0.1, 0.9, -0.2).unwrap());
        let s = RobotState::new(pose, PlantParams::default()).unwrap();
        let next = s.step(&PoseCommand::hold(&pose), 0.01).unwrap();
        assert_eq!(next.pose, pose);
    }

    #[test]
    fn position_follows_closed_form() {
        // p(t) = p_c + (p0 - p_c) e^{-t/t_p}
        let s = RobotState::new(Pose::default(), unit_params()).unwrap();
        let cmd = PoseCommand::new(Vec3::X, UnitQuat::IDENTITY);
        let next = s.step(&cmd, 1.0).unwrap();
        assert_abs_diff_eq!(next.pose.position.x, 1.0 - (-1.0f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(next.pose.position.x, 0.63212, epsilon = 1e-5);
        assert_eq!(next.pose.position.y, 0.0);
    }

    #[test]
    fn attitude_decays_along_geodesic() {
        let s = RobotState::new(Pose::default(), unit_params()).unwrap();
        let target = UnitQuat::from_axis_angle(Vec3::Z, FRAC_PI_2).unwrap();
        let next = s.step(&PoseCommand::new(Vec3::ZERO, target), 0.5).unwrap();
        let expected_angle = FRAC_PI_2 * (1.0 - (-1.0f64).exp());
        let expected = UnitQuat::from_axis_angle(Vec3::Z, expected_angle).unwrap();
        assert!(next.pose.orientation.error_angle(&expected) < 1e-12);
        assert_abs_diff_eq!(expected_angle.to_degrees(), 56.891, epsilon = 1e-3);
    }

    #[test]
    fn rejects_bad_dt_and_params() {
        let s = RobotState::new(Pose::default(), unit_params()).unwrap();
        let cmd = PoseCommand::default();
        assert_eq!(s.step(&cmd, 0.0), Err(PlantError::NonPositiveDt(0.0)));
        assert!(s.step(&cmd, -0.1).is_err());
        assert!(s.step(&cmd, f64::NAN).is_err());
        let bad = PlantParams { t_p: Vec3::new(1.0, 0.0, 1.0), t_q: 1.0 };
        assert!(RobotState::new(Pose::default(), bad).is_err());
        let bad = PlantParams { t_p: Vec3::new(1.0, 1.0, 1.0), t_q: -1.0 };
        assert!(RobotState::new(Pose::default(), bad).is_err());
    }

    fn arb_vec(r: f64) -> impl Strategy<Value = Vec3> {
        (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    fn arb_quat() -> impl Strategy<Value = UnitQuat> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("non-degenerate", |(w, x, y, z)| w * w + x * x + y * y + z * z > 1e-3)
            .prop_map(|(w, x, y, z)| UnitQuat::new(w, x, y, z).unwrap())
    }

    proptest! {
        #[test]
        fn never_overshoots(p in arb_vec(5.0), c in arb_vec(5.0), dt in 1e-4..50.0f64) {
            let s = RobotState::new(Pose::new(p, UnitQuat::IDENTITY), PlantParams::default()).unwrap();
            let next = s.step(&PoseCommand::new(c, UnitQuat::IDENTITY), dt).unwrap();
            for (before, after, target) in [
                (p.x, next.pose.position.x, c.x),
                (p.y, next.pose.position.y, c.y),
                (p.z, next.pose.position.z, c.z),
            ] {
                prop_assert!((after - target).abs() <= (before - target).abs());
                prop_assert!((after - target) * (before - target) >= 0.0);
            }
        }

        #[test]
        fn output_quaternion_is_unit(q in arb_quat(), qc in arb_quat(), dt in 1e-4..5.0f64) {
            let s = RobotState::new(Pose::new(Vec3::ZERO, q), PlantParams::default()).unwrap();
            let next = s.step(&PoseCommand::new(Vec3::ZERO, qc), dt).unwrap();
            prop_assert!((next.pose.orientation.norm() - 1.0).abs() <= 1e-9);
        }
    }
}
