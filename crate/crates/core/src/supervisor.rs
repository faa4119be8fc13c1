//! Mode-switching state machine and operator feedback.
//!
//! The machine starts in Operation mode. Any recognized and held gesture that
//! is bound to a mode other than the active one switches to it, capturing the
//! new mode's anchors at that tick. A gesture bound to the active mode does
//! nothing.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Pose;
use crate::gestures::{GestureId, ModeSwitchEvent};
use crate::interaction::{
    CartesianParams, CartesianState, HeightOverride, InteractionError, LockState, OperationState, OperatorFrame,
    ScaleVector, SphericalParams, SphericalState,
};
use crate::plant::PoseCommand;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SupervisorError {
    #[error(transparent)]
    Interaction(#[from] InteractionError),
    #[error("modes {0} and {1} share the feedback color {2:?}")]
    DuplicateColor(ModeId, ModeId, Rgb),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModeId {
    Operation,
    Locking,
    Spherical,
    Cartesian,
}

impl ModeId {
    pub const ALL: [ModeId; 4] = [ModeId::Operation, ModeId::Locking, ModeId::Spherical, ModeId::Cartesian];

    pub fn name(self) -> &'static str {
        match self {
            ModeId::Operation => "Operation",
            ModeId::Locking => "Locking",
            ModeId::Spherical => "Spherical",
            ModeId::Cartesian => "Cartesian",
        }
    }
}

impl fmt::Display for ModeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rgb(pub [u8; 3]);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Palette {
    pub operation: Rgb,
    pub locking: Rgb,
    pub spherical: Rgb,
    pub cartesian: Rgb,
}

impl Default for Palette {
    fn default() -> Self {
        Self {
            operation: Rgb([0, 170, 0]),
            locking: Rgb([200, 0, 0]),
            spherical: Rgb([0, 90, 220]),
            cartesian: Rgb([255, 140, 0]),
        }
    }
}

impl Palette {
    pub fn color(&self, mode: ModeId) -> Rgb {
        match mode {
            ModeId::Operation => self.operation,
            ModeId::Locking => self.locking,
            ModeId::Spherical => self.spherical,
            ModeId::Cartesian => self.cartesian,
        }
    }

    pub fn validate(&self) -> Result<(), SupervisorError> {
        for (i, a) in ModeId::ALL.iter().enumerate() {
            for b in &ModeId::ALL[i + 1..] {
                if self.color(*a) == self.color(*b) {
                    return Err(SupervisorError::DuplicateColor(*a, *b, self.color(*a)));
                }
            }
        }
        Ok(())
    }
}

/// What the operator's display shows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackState {
    pub mode_name: String,
    pub color: Rgb,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupervisorConfig {
    pub k: ScaleVector,
    pub spherical: SphericalParams,
    pub cartesian: CartesianParams,
    pub height: HeightOverride,
    /// Gesture to mode. Gestures without a binding are ignored.
    pub bindings: BTreeMap<GestureId, ModeId>,
    pub palette: Palette,
}

pub fn default_bindings() -> BTreeMap<GestureId, ModeId> {
    [("fist", ModeId::Locking), ("open", ModeId::Operation), ("point", ModeId::Spherical), ("two", ModeId::Cartesian)]
        .into_iter()
        .map(|(g, m)| (GestureId::new(g), m))
        .collect()
}

impl Default for SupervisorConfig {
    fn default() -> Self {
        Self {
            k: ScaleVector::UNIT,
            spherical: SphericalParams::default(),
            cartesian: CartesianParams::default(),
            height: HeightOverride::default(),
            bindings: default_bindings(),
            palette: Palette::default(),
        }
    }
}

impl SupervisorConfig {
    pub fn validate(&self) -> Result<(), SupervisorError> {
        self.spherical.validate()?;
        self.cartesian.validate()?;
        self.palette.validate()
    }
}

/// The active mode together with its persistent state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActiveMode {
    Operation(OperationState),
    Locking(LockState),
    Spherical(SphericalState),
    Cartesian(CartesianState),
}

impl ActiveMode {
    pub fn id(&self) -> ModeId {
        match self {
            ActiveMode::Operation(_) => ModeId::Operation,
            ActiveMode::Locking(_) => ModeId::Locking,
            ActiveMode::Spherical(_) => ModeId::Spherical,
            ActiveMode::Cartesian(_) => ModeId::Cartesian,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeState {
    pub active: ActiveMode,
    pub last_command: PoseCommand,
}

impl ModeState {
    pub fn mode(&self) -> ModeId {
        self.active.id()
    }

    pub fn spherical_radius(&self) -> Option<f64> {
        match &self.active {
            ActiveMode::Spherical(s) => Some(s.r),
            _ => None,
        }
    }
}

fn enter(cfg: &SupervisorConfig, mode: ModeId, robot: &Pose, frame: &OperatorFrame) -> ActiveMode {
    match mode {
        ModeId::Operation => ActiveMode::Operation(OperationState::enter(robot, frame, cfg.k)),
        ModeId::Locking => ActiveMode::Locking(LockState::enter(robot)),
        ModeId::Spherical => ActiveMode::Spherical(SphericalState::enter(robot, frame, cfg.spherical)),
        ModeId::Cartesian => ActiveMode::Cartesian(CartesianState::enter(cfg.cartesian)),
    }
}

pub fn supervisor_init(cfg: &SupervisorConfig, robot: &Pose, frame: &OperatorFrame) -> ModeState {
    ModeState { active: enter(cfg, ModeId::Operation, robot, frame), last_command: PoseCommand::hold(robot) }
}

/// One supervisor tick: apply a pending switch, then run the active mode.
pub fn supervisor_step(
    cfg: &SupervisorConfig,
    ms: &ModeState,
    ev: Option<&ModeSwitchEvent>,
    robot: &Pose,
    frame: &OperatorFrame,
) -> (ModeState, PoseCommand) {
    let mut active = ms.active;
    if let Some(target) = ev.and_then(|e| cfg.bindings.get(&e.gesture)) {
        if *target != active.id() {
            active = enter(cfg, *target, robot, frame);
        }
    }
    let cmd = match &mut active {
        ActiveMode::Operation(s) => s.update(frame),
        ActiveMode::Locking(s) => s.update(),
        ActiveMode::Spherical(s) => match s.update(frame) {
            Ok((cmd, next)) => {
                *s = next;
                cmd
            }
            // hand on the shoulder: keep the previous target
            Err(_) => ms.last_command,
        },
        ActiveMode::Cartesian(s) => s.update(robot.position, frame),
    };
    let cmd = match active {
        // a locked pose is never altered
        ActiveMode::Locking(_) => cmd,
        _ => cfg.height.apply(cmd, frame),
    };
    (ModeState { active, last_command: cmd }, cmd)
}

pub fn feedback_of(palette: &Palette, ms: &ModeState) -> FeedbackState {
    let mode = ms.mode();
    FeedbackState { mode_name: mode.name().to_owned(), color: palette.color(mode) }
}

/// Owns a [`ModeState`] and its configuration.
#[derive(Debug, Clone)]
pub struct Supervisor {
    cfg: SupervisorConfig,
    state: ModeState,
    switches: u64,
}

impl Supervisor {
    pub fn new(cfg: SupervisorConfig, robot: &Pose, frame: &OperatorFrame) -> Self {
        let state = supervisor_init(&cfg, robot, frame);
        Self { cfg, state, switches: 0 }
    }

    pub fn step(&mut self, ev: Option<&ModeSwitchEvent>, robot: &Pose, frame: &OperatorFrame) -> PoseCommand {
        let before = self.state.mode();
        let (state, cmd) = supervisor_step(&self.cfg, &self.state, ev, robot, frame);
        if state.mode() != before {
            self.switches += 1;
        }
        self.state = state;
        cmd
    }

    pub fn state(&self) -> &ModeState {
        &self.state
    }

    pub fn mode(&self) -> ModeId {
        self.state.mode()
    }

    pub fn config(&self) -> &SupervisorConfig {
        &self.cfg
    }

    pub fn last_command(&self) -> PoseCommand {
        self.state.last_command
    }

    pub fn switches(&self) -> u64 {
        self.switches
    }

    pub fn feedback(&self) -> FeedbackState {
        feedback_of(&self.cfg.palette, &self.state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{UnitQuat, Vec3};
    use crate::interaction::frame_at;

    fn ev(name: &str) -> ModeSwitchEvent {
        ModeSwitchEvent { gesture: GestureId::new(name), at: 0.0 }
    }

    fn robot() -> Pose {
        Pose::new(Vec3::new(1.0, 0.5, 1.5), UnitQuat::new(0.9, 0.1, 0.2, 0.0).unwrap())
    }

    fn hand_frame(t: f64, p: Vec3) -> OperatorFrame {
        frame_at(t, p, UnitQuat::new(0.8, 0.0, 0.3, 0.1).unwrap(), Vec3::new(0.0, 0.0, 1.4))
    }

    #[test]
    fn init_is_operation_with_anchors() {
        let cfg = SupervisorConfig::default();
        let f = hand_frame(0.0, Vec3::new(0.3, 0.0, 1.3));
        let ms = supervisor_init(&cfg, &robot(), &f);
        assert_eq!(ms.mode(), ModeId::Operation);
        match ms.active {
            ActiveMode::Operation(s) => {
                assert_eq!(s.robot_anchor, robot());
                assert_eq!(s.hand_anchor_pos, f.hand.position);
            }
            other => panic!("unexpected {other:?}"),
        }
        let (_, cmd) = supervisor_step(&cfg, &ms, None, &robot(), &f);
        assert_eq!(cmd.position, robot().position);
    }

    #[test]
    fn fist_locks_the_pose() {
        let cfg = SupervisorConfig::default();
        let mut sup = Supervisor::new(cfg, &robot(), &hand_frame(0.0, Vec3::new(0.3, 0.0, 1.3)));
        let first = sup.step(Some(&ev("fist")), &robot(), &hand_frame(0.01, Vec3::new(0.4, 0.0, 1.3)));
        assert_eq!(sup.mode(), ModeId::Locking);
        assert_eq!(first.as_pose(), robot());
        for i in 0..100 {
            let f = hand_frame(0.02 + i as f64 * 0.01, Vec3::new(i as f64, -1.0, 0.2));
            assert_eq!(sup.step(None, &robot(), &f), first);
        }
        assert_eq!(sup.switches(), 1);
    }

    #[test]
    fn self_transition_keeps_anchors() {
        let cfg = SupervisorConfig::default();
        let f0 = hand_frame(0.0, Vec3::new(0.3, 0.0, 1.3));
        let ms = supervisor_init(&cfg, &robot(), &f0);
        let moved = Pose::new(Vec3::new(9.0, 9.0, 9.0), UnitQuat::IDENTITY);
        let (next, _) = supervisor_step(&cfg, &ms, Some(&ev("open")), &moved, &f0);
        assert_eq!(next.active, ms.active);
    }

    #[test]
    fn no_event_keeps_mode() {
        let cfg = SupervisorConfig::default();
        let mut ms = supervisor_init(&cfg, &robot(), &hand_frame(0.0, Vec3::new(0.3, 0.0, 1.3)));
        for i in 0..50 {
            let f = hand_frame(i as f64 * 0.01, Vec3::new(0.3 + i as f64 * 0.01, 0.0, 1.3));
            ms = supervisor_step(&cfg, &ms, None, &robot(), &f).0;
            assert_eq!(ms.mode(), ModeId::Operation);
        }
    }

    #[test]
    fn unknown_or_unbound_gesture_is_ignored() {
        let cfg = SupervisorConfig::default();
        let f = hand_frame(0.0, Vec3::new(0.3, 0.0, 1.3));
        let ms = supervisor_init(&cfg, &robot(), &f);
        for name in ["three", "nonsense"] {
            let (next, _) = supervisor_step(&cfg, &ms, Some(&ev(name)), &robot(), &f);
            assert_eq!(next.mode(), ModeId::Operation);
        }
    }

    #[test]
    fn every_mode_reaches_every_other() {
        let cfg = SupervisorConfig::default();
        let gesture_for = |m: ModeId| cfg.bindings.iter().find(|(_, v)| **v == m).map(|(g, _)| g.clone()).unwrap();
        let f = hand_frame(0.0, Vec3::new(0.3, 0.0, 1.3));
        for from in ModeId::ALL {
            for to in ModeId::ALL {
                let ms = supervisor_init(&cfg, &robot(), &f);
                let e = ModeSwitchEvent { gesture: gesture_for(from), at: 0.0 };
                let (ms, _) = supervisor_step(&cfg, &ms, Some(&e), &robot(), &f);
                assert_eq!(ms.mode(), from);
                let e = ModeSwitchEvent { gesture: gesture_for(to), at: 0.0 };
                let (ms, _) = supervisor_step(&cfg, &ms, Some(&e), &robot(), &f);
                assert_eq!(ms.mode(), to);
            }
        }
    }

    #[test]
    fn spherical_degenerate_holds_last_command() {
        let cfg = SupervisorConfig::default();
        let f = hand_frame(0.0, Vec3::new(0.35, 0.0, 1.4));
        let ms = supervisor_init(&cfg, &robot(), &f);
        let (ms, cmd) = supervisor_step(&cfg, &ms, Some(&ev("point")), &robot(), &f);
        assert_eq!(ms.mode(), ModeId::Spherical);
        let degenerate = hand_frame(0.01, f.shoulder);
        let (ms2, cmd2) = supervisor_step(&cfg, &ms, None, &robot(), &degenerate);
        assert_eq!(cmd2, cmd);
        assert_eq!(ms2.spherical_radius(), ms.spherical_radius());
    }

    #[test]
    fn height_override_applies_outside_locking() {
        let cfg =
            SupervisorConfig { height: HeightOverride { enabled: true, z_offset: 0.1 }, ..SupervisorConfig::default() };
        let f = hand_frame(0.0, Vec3::new(0.3, 0.0, 1.3));
        let ms = supervisor_init(&cfg, &robot(), &f);
        let (ms, cmd) = supervisor_step(&cfg, &ms, None, &robot(), &f);
        assert!((cmd.position.z - 1.4).abs() < 1e-12);
        let (_, locked) = supervisor_step(&cfg, &ms, Some(&ev("fist")), &robot(), &f);
        assert_eq!(locked.as_pose(), robot());
    }

    #[test]
    fn feedback_is_a_table_lookup() {
        let cfg = SupervisorConfig::default();
        let f = hand_frame(0.0, Vec3::new(0.3, 0.0, 1.3));
        let ms = supervisor_init(&cfg, &robot(), &f);
        let fb = feedback_of(&cfg.palette, &ms);
        assert_eq!(fb.mode_name, "Operation");
        assert_eq!(fb.color, cfg.palette.operation);
        let (ms2, _) = supervisor_step(&cfg, &ms, None, &robot(), &f);
        assert_eq!(feedback_of(&cfg.palette, &ms2), fb);

        let colors: std::collections::HashSet<_> = ModeId::ALL.iter().map(|m| cfg.palette.color(*m)).collect();
        assert_eq!(colors.len(), 4);
    }

    #[test]
    fn palette_must_be_injective() {
        let p = Palette { locking: Rgb([0, 170, 0]), ..Palette::default() };
        assert!(matches!(p.validate(), Err(SupervisorError::DuplicateColor(..))));
    }
}
