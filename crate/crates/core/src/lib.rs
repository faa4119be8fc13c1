//! Hand-based teleoperation engine for omnidirectional aerial robots.
//!
//! The operator's hand pose, shoulder position and glove flexion drive one of
//! four interaction modes (Operation, Locking, Spherical, Cartesian); held
//! finger gestures switch between them. A first-order plant stands in for the
//! flying robot so sessions can run live through the [`gateway`] or offline by
//! replaying recorded frames.
//!
//! ```
//! use omniteleop::config::Config;
//! use omniteleop::geometry::{UnitQuat, Vec3};
//! use omniteleop::interaction::frame_at;
//! use omniteleop::session::run_session;
//!
//! let cfg = Config::default();
//! let shoulder = Vec3::new(0.0, 0.0, 1.4);
//! let frames = (0..100).map(|i| {
//!     let t = i as f64 / 100.0;
//!     frame_at(t, Vec3::new(0.3 + 0.1 * t, 0.0, 1.4), UnitQuat::IDENTITY, shoulder)
//! });
//! let mut log = Vec::new();
//! let summary = run_session(&cfg, frames, &mut log).unwrap();
//! assert_eq!(summary.records, log.len() as u64);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod gateway;
pub mod geometry;
pub mod gestures;
pub mod interaction;
pub mod metrics;
pub mod plant;
pub mod scenario;
pub mod session;
pub mod supervisor;
