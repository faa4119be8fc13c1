//! Scripted operator recordings.
//!
//! [`valve_mission`] reproduces a valve-turning sortie: fly around an obstacle
//! in Spherical mode, align the end effector with a vertically mounted valve
//! in Operation mode, lock the robot while the operator walks to a better
//! viewpoint, turn the valve, back off, and leave through an L-shaped corridor
//! in Cartesian mode. The script is open loop; it relies only on the
//! configured parameters to know how far each per-tick increment goes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::FRAC_PI_2;
use thiserror::Error;

use crate::config::Config;
use crate::geometry::{GeometryError, Pose, UnitQuat, Vec3};
use crate::gestures::{FingerState, GestureId, FINGERS};
use crate::interaction::OperatorFrame;
use crate::supervisor::ModeId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("no gesture is bound to {0} mode")]
    MissingBinding(ModeId),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle {
    pub min: Vec3,
    pub max: Vec3,
}

impl Obstacle {
    pub fn contains(&self, p: Vec3) -> bool {
        (self.min.x..=self.max.x).contains(&p.x)
            && (self.min.y..=self.max.y).contains(&p.y)
            && (self.min.z..=self.max.z).contains(&p.z)
    }
}

/// A target the robot should reach while the frames in `window` are in use.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub name: String,
    pub target: Pose,
    /// Frame-time interval, seconds.
    pub window: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phase {
    pub name: &'static str,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone)]
pub struct Mission {
    pub frames: Vec<OperatorFrame>,
    /// Spherical-mode waypoints around the obstacle.
    pub waypoints: Vec<Checkpoint>,
    /// End-effector alignment with the valve.
    pub alignment: Checkpoint,
    pub valve_center: Vec3,
    pub obstacle: Obstacle,
    /// Corridor centerline (x, y); the corridor is `corridor_width` wide.
    pub corridor: Vec<[f64; 2]>,
    pub corridor_width: f64,
    pub phases: Vec<Phase>,
}

impl Mission {
    pub fn phase(&self, name: &str) -> Option<&Phase> {
        self.phases.iter().find(|p| p.name == name)
    }
}

struct Script<'a> {
    cfg: &'a Config,
    rate: f64,
    index: u64,
    frames: Vec<OperatorFrame>,
    shoulder: Vec3,
    hand: Pose,
    knuckles: Vec<f64>,
    phases: Vec<Phase>,
}

impl<'a> Script<'a> {
    fn new(cfg: &'a Config, shoulder: Vec3, hand: Pose) -> Self {
        let mut s = Self {
            cfg,
            rate: cfg.session.tick_rate,
            index: 0,
            frames: Vec::new(),
            shoulder,
            hand,
            knuckles: Vec::new(),
            phases: Vec::new(),
        };
        s.knuckles = s.neutral_knuckles();
        s
    }

    fn now(&self) -> f64 {
        self.index as f64 / self.rate
    }

    fn ticks(&self, secs: f64) -> u64 {
        (secs * self.rate).round() as u64
    }

    fn emit(&mut self) {
        self.frames.push(OperatorFrame {
            t: self.now(),
            hand: self.hand,
            shoulder: self.shoulder,
            knuckles: self.knuckles.clone(),
        });
        self.index += 1;
    }

    fn hold(&mut self, secs: f64) {
        for _ in 0..self.ticks(secs) {
            self.emit();
        }
    }

    fn phase(&mut self, name: &'static str, f: impl FnOnce(&mut Self)) -> (f64, f64) {
        let start = self.now();
        f(self);
        let end = self.now();
        self.phases.push(Phase { name, start, end });
        (start, end)
    }

    fn select(&mut self, name: &'static str, mode: ModeId) -> Result<(), ScenarioError> {
        let start = self.now();
        self.switch_to(mode)?;
        let end = self.now();
        self.phases.push(Phase { name, start, end });
        Ok(())
    }

    fn channel_count(&self) -> usize {
        self.cfg.gestures.channels.iter().flatten().max().map_or(0, |m| m + 1)
    }

    fn knuckles_for(&self, finger_value: impl Fn(usize) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.channel_count()];
        for (finger, group) in self.cfg.gestures.channels.iter().enumerate() {
            for &ch in group {
                out[ch] = finger_value(finger);
            }
        }
        out
    }

    fn neutral_knuckles(&self) -> Vec<f64> {
        let g = &self.cfg.gestures;
        self.knuckles_for(|i| 0.5 * (g.contract_thresh[i] + g.extend_thresh[i]))
    }

    fn pattern_knuckles(&self, pattern: &[FingerState; FINGERS]) -> Vec<f64> {
        let g = &self.cfg.gestures;
        self.knuckles_for(|i| match pattern[i] {
            FingerState::Contracted => g.contract_thresh[i] + 0.1,
            FingerState::Extended => g.extend_thresh[i] - 0.1,
            FingerState::Indeterminate => 0.5 * (g.contract_thresh[i] + g.extend_thresh[i]),
        })
    }

    /// Holds the gesture bound to `mode` long enough to switch, then relaxes.
    fn switch_to(&mut self, mode: ModeId) -> Result<(), ScenarioError> {
        let gesture: GestureId = self
            .cfg
            .bindings
            .iter()
            .find(|(g, m)| **m == mode && self.cfg.gestures.patterns.contains_key(*g))
            .map(|(g, _)| g.clone())
            .ok_or(ScenarioError::MissingBinding(mode))?;
        self.knuckles = self.pattern_knuckles(&self.cfg.gestures.patterns[&gesture]);
        self.hold(self.cfg.gestures.hold_duration + 0.3);
        self.knuckles = self.neutral_knuckles();
        Ok(())
    }

    /// Moves the hand (and optionally the shoulder) linearly over `secs`,
    /// ending exactly at the targets.
    fn glide(&mut self, hand: Pose, shoulder: Vec3, secs: f64, wiggle: Option<&mut ChaCha8Rng>) {
        let n = self.ticks(secs).max(1);
        let (h0, s0) = (self.hand, self.shoulder);
        let mut wiggle = wiggle;
        for i in 1..=n {
            let a = i as f64 / n as f64;
            let mut pos = h0.position + a * (hand.position - h0.position);
            let mut q = h0.orientation.slerp(&hand.orientation, a);
            if let Some(rng) = wiggle.as_deref_mut() {
                if i < n {
                    let amp = (std::f64::consts::PI * a).sin();
                    pos = pos
                        + amp * Vec3::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2));
                    let axis = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    if let Ok(r) = UnitQuat::from_axis_angle(axis, amp * rng.gen_range(0.0..1.0)) {
                        q = r * q;
                    }
                }
            }
            self.hand = Pose::new(pos, q);
            self.shoulder = s0 + a * (shoulder - s0);
            self.emit();
        }
    }

    fn with_hand_at(&self, position: Vec3) -> Pose {
        Pose::new(position, self.hand.orientation)
    }
}

/// Builds the valve-turning mission for the given configuration. Frames are
/// sampled at the configured tick rate starting at `t = 0`.
pub fn valve_mission(cfg: &Config) -> Result<Mission, ScenarioError> {
    let sph = cfg.spherical;
    let cart = cfg.cartesian;
    let start = cfg.session.initial_pose;
    let shoulder = Vec3::new(0.0, 0.0, 1.4);
    let neutral_reach = 0.5 * (sph.d_min + sph.d_max);
    let reach_out = sph.d_max + 0.05;
    let reach_in = 0.5 * sph.d_min;

    let obstacle = Obstacle { min: Vec3::new(2.1, -0.4, 0.0), max: Vec3::new(2.9, 0.4, 3.0) };
    let valve_center = Vec3::new(4.0, 0.0, 1.6);
    // effector on top of the body: pitch the body so its z axis faces the valve
    let aligned = Pose::new(valve_center - Vec3::new(0.3, 0.0, 0.0), UnitQuat::from_axis_angle(Vec3::Y, FRAC_PI_2)?);
    let standoff = aligned.position - Vec3::new(0.3, 0.0, 0.0);
    let targets = [
        ("left of start", Vec3::new(1.0, 1.2, 1.4)),
        ("past obstacle", Vec3::new(3.2, 1.2, 1.4)),
        ("valve standoff", standoff),
    ];

    let first_dir = (start.position - shoulder).normalize()?;
    let hand0 = Pose::new(shoulder + neutral_reach * first_dir, start.orientation);
    let mut s = Script::new(cfg, shoulder, hand0);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.session.seed);

    s.phase("idle", |s| s.hold(1.0));
    s.select("select spherical", ModeId::Spherical)?;
    let mut r = start.position.distance(shoulder).clamp(sph.r_min, sph.r_max);
    let mut dir = first_dir;
    let mut reached = start.position;
    let mut waypoints = Vec::new();
    for (name, target) in targets {
        let to = target - shoulder;
        let new_dir = to.normalize()?;
        // sweep along the neutral shell so the radius is left alone
        s.phase("spherical turn", |s| {
            let n = s.ticks(1.5);
            for i in 1..=n {
                let a = i as f64 / n as f64;
                let d = (dir + a * (new_dir - dir)).normalize().unwrap_or(new_dir);
                s.hand = s.with_hand_at(shoulder + neutral_reach * d);
                s.emit();
            }
        });
        dir = new_dir;
        let steps = ((to.norm() - r) / sph.delta_r).round() as i64;
        s.phase("spherical reach", |s| {
            let reach = if steps > 0 { reach_out } else { reach_in };
            s.hand = s.with_hand_at(shoulder + reach * dir);
            for _ in 0..steps.unsigned_abs() {
                s.emit();
            }
            s.hand = s.with_hand_at(shoulder + neutral_reach * dir);
        });
        for _ in 0..steps.unsigned_abs() {
            r = if steps > 0 { r + sph.delta_r } else { r - sph.delta_r }.min(sph.r_max).max(sph.r_min);
        }
        reached = shoulder + r * dir;
        let window = s.phase("spherical settle", |s| s.hold(4.0));
        waypoints.push(Checkpoint { name: name.to_owned(), target: Pose::new(target, start.orientation), window });
    }
    s.select("select operation", ModeId::Operation)?;
    let (_, align_end) = s.phase("align", |s| {
        let h = Pose::new(s.hand.position + (aligned.position - reached), aligned.orientation);
        s.glide(h, shoulder, 3.0, None);
        s.hold(5.0);
    });
    let alignment =
        Checkpoint { name: "valve alignment".into(), target: aligned, window: (align_end - 1.0, align_end) };

    s.select("select locking", ModeId::Locking)?;
    let new_shoulder = shoulder + Vec3::new(0.6, -1.2, 0.0);
    let cart_origin = new_shoulder + cart.origin_offset;
    let pull_back = Vec3::new(0.3, 0.0, 0.0);
    s.phase("relocate", |s| {
        let h = Pose::new(cart_origin + pull_back, aligned.orientation);
        s.glide(h, new_shoulder, 3.0, Some(&mut rng));
        s.hold(1.0);
    });

    s.select("select operation again", ModeId::Operation)?;
    s.phase("turn valve", |s| {
        let turned = UnitQuat::from_axis_angle(Vec3::X, FRAC_PI_2).expect("unit axis") * aligned.orientation;
        let h = Pose::new(s.hand.position, turned);
        s.glide(h, new_shoulder, 2.0, None);
        s.hold(2.0);
    });
    s.phase("back off", |s| {
        let h = s.with_hand_at(s.hand.position - pull_back);
        s.glide(h, new_shoulder, 2.0, None);
        s.hold(3.0);
    });

    s.select("select cartesian", ModeId::Cartesian)?;
    let push = cart.d_threshold + 0.1;
    let per_tick = |t_p: f64| cart.delta_d * -(-cfg.session.dt() / t_p).exp_m1();
    let legs = [(Vec3::Y, 1.2, cfg.plant.t_p.y), (-Vec3::X, 1.5, cfg.plant.t_p.x)];
    let corridor_start = aligned.position - pull_back;
    let mut corridor = vec![[corridor_start.x, corridor_start.y]];
    let mut corner = corridor_start;
    for (dir, length, t_p) in legs {
        let n = (length / per_tick(t_p)).round() as u64;
        s.phase("corridor leg", |s| {
            s.hand = s.with_hand_at(cart_origin + push * dir);
            for _ in 0..n {
                s.emit();
            }
        });
        corner = corner + length * dir;
        corridor.push([corner.x, corner.y]);
    }
    s.phase("stop", |s| {
        s.hand = s.with_hand_at(cart_origin);
        s.hold(1.0);
    });

    Ok(Mission {
        frames: s.frames,
        waypoints,
        alignment,
        valve_center,
        obstacle,
        corridor,
        corridor_width: 1.0,
        phases: s.phases,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_are_uniformly_timestamped() {
        let m = valve_mission(&Config::default()).unwrap();
        assert!(m.frames.len() > 1000);
        for (i, f) in m.frames.iter().enumerate() {
            assert_eq!(f.t, i as f64 / 100.0);
        }
    }

    #[test]
    fn same_seed_same_frames() {
        let cfg = Config::default();
        assert_eq!(valve_mission(&cfg).unwrap().frames, valve_mission(&cfg).unwrap().frames);
        let mut other = cfg.clone();
        other.session.seed = 7;
        assert_ne!(valve_mission(&cfg).unwrap().frames, valve_mission(&other).unwrap().frames);
    }

    #[test]
    fn missing_binding_is_reported() {
        let mut cfg = Config::default();
        cfg.bindings.retain(|_, m| *m != ModeId::Cartesian);
        assert_eq!(valve_mission(&cfg).unwrap_err(), ScenarioError::MissingBinding(ModeId::Cartesian));
    }

    #[test]
    fn gesture_knuckles_follow_channel_map() {
        let mut cfg = Config::default();
        cfg.gestures.channels = [vec![0, 5], vec![1, 6], vec![2, 7], vec![3, 8], vec![4, 9]];
        let m = valve_mission(&cfg).unwrap();
        assert!(m.frames.iter().all(|f| f.knuckles.len() == 10));
        let recognized: Vec<_> = m.frames.iter().filter_map(|f| cfg.gestures.recognize_raw(&f.knuckles)).collect();
        assert!(recognized.contains(&GestureId::new("fist")));
    }
}
