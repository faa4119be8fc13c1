//! JSON wire schema shared by the datagram input, the cockpit stream and
//! frame recordings.
//!
//! Input frame, one JSON object, fields in this order:
//!
//! ```text
//! {"schema_version":1,"t":12.5,"hand_pos":[x,y,z],"hand_quat":[w,x,y,z],
//!  "shoulder_pos":[x,y,z],"knuckles":[...]}
//! ```
//!
//! Quaternions are scalar first and are renormalized and moved to the `w >= 0`
//! hemisphere on receipt.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Config;
use crate::geometry::{Pose, UnitQuat, Vec3};
use crate::interaction::OperatorFrame;
use crate::plant::PoseCommand;
use crate::session::Snapshot;
use crate::supervisor::Rgb;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WireError {
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
    #[error("schema version {got} not supported (expected {SCHEMA_VERSION})")]
    VersionMismatch { got: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputFrameMsg {
    pub schema_version: u32,
    pub t: f64,
    pub hand_pos: [f64; 3],
    pub hand_quat: [f64; 4],
    pub shoulder_pos: [f64; 3],
    pub knuckles: Vec<f64>,
}

#[derive(Deserialize)]
struct Header {
    schema_version: Option<u64>,
}

impl InputFrameMsg {
    pub fn from_frame(f: &OperatorFrame) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            t: f.t,
            hand_pos: f.hand.position.to_array(),
            hand_quat: f.hand.orientation.canonical().to_array(),
            shoulder_pos: f.shoulder.to_array(),
            knuckles: f.knuckles.clone(),
        }
    }

    pub fn to_frame(&self) -> Result<OperatorFrame, WireError> {
        let bad = |what: &str| WireError::MalformedFrame(what.to_owned());
        if !self.t.is_finite() {
            return Err(bad("non-finite timestamp"));
        }
        let hand = Vec3::try_from(self.hand_pos).map_err(|_| bad("non-finite hand_pos"))?;
        let shoulder = Vec3::try_from(self.shoulder_pos).map_err(|_| bad("non-finite shoulder_pos"))?;
        let q = UnitQuat::from_array(self.hand_quat).map_err(|e| bad(&e.to_string()))?;
        Ok(OperatorFrame { t: self.t, hand: Pose::new(hand, q.canonical()), shoulder, knuckles: self.knuckles.clone() })
    }
}

/// Parses and validates one input frame. The returned message carries the
/// renormalized quaternion.
pub fn decode_input(bytes: &[u8]) -> Result<InputFrameMsg, WireError> {
    let header: Header = serde_json::from_slice(bytes).map_err(|e| WireError::MalformedFrame(e.to_string()))?;
    match header.schema_version {
        None => return Err(WireError::MalformedFrame("missing schema_version".into())),
        Some(v) if v != SCHEMA_VERSION as u64 => return Err(WireError::VersionMismatch { got: v }),
        Some(_) => {}
    }
    let msg: InputFrameMsg = serde_json::from_slice(bytes).map_err(|e| WireError::MalformedFrame(e.to_string()))?;
    let frame = msg.to_frame()?;
    Ok(InputFrameMsg::from_frame(&frame))
}

pub fn decode_frame(bytes: &[u8]) -> Result<OperatorFrame, WireError> {
    decode_input(bytes)?.to_frame()
}

pub fn encode_input(msg: &InputFrameMsg) -> Vec<u8> {
    serde_json::to_vec(msg).expect("frame is always serializable")
}

pub fn encode_frame(frame: &OperatorFrame) -> Vec<u8> {
    encode_input(&InputFrameMsg::from_frame(frame))
}

/// Parses a frame recording (one input frame per line; blank lines skipped).
pub fn read_frames(text: &str) -> Result<Vec<OperatorFrame>, (usize, WireError)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| decode_frame(l.as_bytes()).map_err(|e| (i + 1, e)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseMsg {
    pub position: [f64; 3],
    pub orientation: [f64; 4],
}

impl PoseMsg {
    pub fn of(pose: &Pose) -> Self {
        Self { position: pose.position.to_array(), orientation: pose.orientation.canonical().to_array() }
    }

    pub fn of_command(cmd: &PoseCommand) -> Self {
        Self::of(&cmd.as_pose())
    }
}

/// Zone geometry for rendering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneMsg {
    /// Current spherical radius; only while Spherical mode is active.
    pub r: Option<f64>,
    pub r_min: f64,
    pub r_max: f64,
    pub d_min: f64,
    pub d_max: f64,
    /// Cartesian joystick origin for the current shoulder position.
    pub p_j: [f64; 3],
    pub d_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateMsg {
    pub schema_version: u32,
    pub tick: u64,
    pub t: f64,
    pub robot: PoseMsg,
    pub command: PoseMsg,
    pub hand: PoseMsg,
    pub shoulder: [f64; 3],
    pub mode_name: String,
    pub color: Rgb,
    pub zones: ZoneMsg,
}

impl StateMsg {
    pub fn from_snapshot(snap: &Snapshot, cfg: &Config) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tick: snap.tick,
            t: snap.time,
            robot: PoseMsg::of(&snap.robot),
            command: PoseMsg::of_command(&snap.command),
            hand: PoseMsg::of(&snap.frame.hand),
            shoulder: snap.frame.shoulder.to_array(),
            mode_name: snap.feedback.mode_name.clone(),
            color: snap.feedback.color,
            zones: ZoneMsg {
                r: snap.spherical_radius,
                r_min: cfg.spherical.r_min,
                r_max: cfg.spherical.r_max,
                d_min: cfg.spherical.d_min,
                d_max: cfg.spherical.d_max,
                p_j: (snap.frame.shoulder + cfg.cartesian.origin_offset).to_array(),
                d_threshold: cfg.cartesian.d_threshold,
            },
        }
    }

    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("state is always serializable");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SAMPLE: &str = r#"{"schema_version":1,"t":12.5,"hand_pos":[0.4,-0.1,1.3],"hand_quat":[0.5,0.5,0.5,0.5],"shoulder_pos":[0.0,0.0,1.4],"knuckles":[0.1,0.9,0.2,0.3,0.4]}"#;

    #[test]
    fn decodes_documented_schema() {
        let m = decode_input(SAMPLE.as_bytes()).unwrap();
        assert_eq!(m.t, 12.5);
        assert_eq!(m.hand_pos, [0.4, -0.1, 1.3]);
        assert_eq!(m.knuckles.len(), 5);
        assert_eq!(String::from_utf8(encode_input(&m)).unwrap(), SAMPLE);
    }

    #[test]
    fn truncated_payload_is_malformed() {
        let cut = &SAMPLE.as_bytes()[..SAMPLE.len() - 10];
        assert!(matches!(decode_input(cut), Err(WireError::MalformedFrame(_))));
        assert!(matches!(decode_input(b""), Err(WireError::MalformedFrame(_))));
        assert!(matches!(decode_input(b"\xff\xfe"), Err(WireError::MalformedFrame(_))));
    }

    #[test]
    fn missing_or_extra_fields_are_malformed() {
        let no_t = SAMPLE.replace(r#""t":12.5,"#, "");
        assert!(matches!(decode_input(no_t.as_bytes()), Err(WireError::MalformedFrame(_))));
        let extra = SAMPLE.replace(r#""t":12.5,"#, r#""t":12.5,"x":1,"#);
        assert!(matches!(decode_input(extra.as_bytes()), Err(WireError::MalformedFrame(_))));
        let no_version = SAMPLE.replace(r#""schema_version":1,"#, "");
        assert!(matches!(decode_input(no_version.as_bytes()), Err(WireError::MalformedFrame(_))));
    }

    #[test]
    fn version_mismatch() {
        let v2 = SAMPLE.replace(r#""schema_version":1"#, r#""schema_version":2"#);
        assert_eq!(decode_input(v2.as_bytes()), Err(WireError::VersionMismatch { got: 2 }));
    }

    #[test]
    fn quaternion_is_renormalized() {
        let s = SAMPLE.replace("[0.5,0.5,0.5,0.5]", "[2,0,0,0]");
        assert_eq!(decode_input(s.as_bytes()).unwrap().hand_quat, [1.0, 0.0, 0.0, 0.0]);
        let s = SAMPLE.replace("[0.5,0.5,0.5,0.5]", "[-1,0,0,0]");
        assert_eq!(decode_input(s.as_bytes()).unwrap().hand_quat, [1.0, 0.0, 0.0, 0.0]);
        let s = SAMPLE.replace("[0.5,0.5,0.5,0.5]", "[0,0,0,0]");
        assert!(matches!(decode_input(s.as_bytes()), Err(WireError::MalformedFrame(_))));
    }

    #[test]
    fn recording_reports_line_numbers() {
        let text = format!("{SAMPLE}\n\n{SAMPLE}\nnot json\n");
        assert_eq!(read_frames(&text).unwrap_err().0, 4);
        assert_eq!(read_frames(&format!("{SAMPLE}\n{SAMPLE}\n")).unwrap().len(), 2);
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(
            t in -1e6..1e6f64,
            hand in proptest::array::uniform3(-10.0..10.0f64),
            shoulder in proptest::array::uniform3(-10.0..10.0f64),
            q in proptest::array::uniform4(-1.0..1.0f64),
            knuckles in proptest::collection::vec(0.0..1.0f64, 0..20),
        ) {
            prop_assume!(q.iter().map(|v| v * v).sum::<f64>() > 1e-3);
            let first = InputFrameMsg { schema_version: 1, t, hand_pos: hand, hand_quat: q, shoulder_pos: shoulder, knuckles };
            // the first decode renormalizes; after that the message is a fixed point
            let m = decode_input(&encode_input(&first)).unwrap();
            let again = decode_input(&encode_input(&m)).unwrap();
            prop_assert_eq!(&again, &m);
            prop_assert_eq!(m.t, t);
            prop_assert_eq!(m.hand_pos, hand);
            prop_assert_eq!(m.shoulder_pos, shoulder);
        }
    }
}
