//! Glove gesture recognition and hold debouncing.
//!
//! Each finger's flexion is classified against two thresholds. A gesture is
//! recognized only when all five fingers are determinate and the resulting
//! pattern matches a row of the table. A gesture must then be held without
//! interruption for `hold_duration` before a switch event is emitted.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FINGERS: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GestureError {
    #[error("finger {finger}: extension threshold {extend} must be below contraction threshold {contract}")]
    InvalidThresholds { finger: usize, contract: f64, extend: f64 },
    #[error("hold duration must be positive, got {0}")]
    InvalidHoldDuration(f64),
    #[error("gesture `{0}` uses an indeterminate finger state")]
    IndeterminateInPattern(GestureId),
    #[error("gestures `{0}` and `{1}` share the same finger pattern")]
    DuplicatePattern(GestureId, GestureId),
    #[error("finger {0} has no glove channels assigned")]
    EmptyChannelGroup(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FingerState {
    Contracted,
    Extended,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GestureId(pub String);

impl GestureId {
    pub fn new(name: impl Into<String>) -> Self {
        Self(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for GestureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub type FingerPattern = [FingerState; FINGERS];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSwitchEvent {
    pub gesture: GestureId,
    /// Stream time at which the hold completed.
    pub at: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GestureConfig {
    /// Per finger (thumb to little): above this the finger is contracted.
    pub contract_thresh: [f64; FINGERS],
    /// Per finger: below this the finger is extended.
    pub extend_thresh: [f64; FINGERS],
    pub patterns: BTreeMap<GestureId, FingerPattern>,
    /// Seconds a gesture must persist before it fires.
    pub hold_duration: f64,
    /// Glove channel indices averaged into each finger's flexion value.
    pub channels: [Vec<usize>; FINGERS],
}

impl Default for GestureConfig {
    fn default() -> Self {
        use FingerState::{Contracted as C, Extended as E};
        let patterns = [
            ("fist", [C, C, C, C, C]),
            ("open", [E, E, E, E, E]),
            ("point", [C, E, C, C, C]),
            ("two", [C, E, E, C, C]),
            ("three", [C, E, E, E, C]),
        ]
        .into_iter()
        .map(|(name, p)| (GestureId::new(name), p))
        .collect();
        Self {
            contract_thresh: [0.7; FINGERS],
            extend_thresh: [0.3; FINGERS],
            patterns,
            hold_duration: 1.0,
            channels: [vec![0], vec![1], vec![2], vec![3], vec![4]],
        }
    }
}

impl GestureConfig {
    pub fn validate(&self) -> Result<(), GestureError> {
        for finger in 0..FINGERS {
            let (contract, extend) = (self.contract_thresh[finger], self.extend_thresh[finger]);
            if !(extend < contract) || !contract.is_finite() || !extend.is_finite() {
                return Err(GestureError::InvalidThresholds { finger, contract, extend });
            }
            if self.channels[finger].is_empty() {
                return Err(GestureError::EmptyChannelGroup(finger));
            }
        }
        if !(self.hold_duration > 0.0) || !self.hold_duration.is_finite() {
            return Err(GestureError::InvalidHoldDuration(self.hold_duration));
        }
        let mut seen: Vec<(&FingerPattern, &GestureId)> = Vec::new();
        for (id, pattern) in &self.patterns {
            if pattern.contains(&FingerState::Indeterminate) {
                return Err(GestureError::IndeterminateInPattern(id.clone()));
            }
            if let Some((_, other)) = seen.iter().find(|(p, _)| *p == pattern) {
                return Err(GestureError::DuplicatePattern((*other).clone(), id.clone()));
            }
            seen.push((pattern, id));
        }
        Ok(())
    }

    /// Averages raw glove channels into one value per finger. Returns `None`
    /// when the frame lacks a configured channel.
    pub fn finger_values(&self, knuckles: &[f64]) -> Option<[f64; FINGERS]> {
        let mut out = [0.0; FINGERS];
        for (slot, group) in out.iter_mut().zip(&self.channels) {
            let mut sum = 0.0;
            for &idx in group {
                sum += *knuckles.get(idx)?;
            }
            *slot = sum / group.len() as f64;
        }
        Some(out)
    }

    pub fn classify(&self, fingers: &[f64; FINGERS]) -> FingerPattern {
        std::array::from_fn(|i| classify_finger(fingers[i], self.contract_thresh[i], self.extend_thresh[i]))
    }

    /// Gesture for a raw knuckle vector, if any.
    pub fn recognize_raw(&self, knuckles: &[f64]) -> Option<GestureId> {
        recognize_gesture(&self.finger_values(knuckles)?, self)
    }
}

pub fn classify_finger(stretch: f64, contract_thresh: f64, extend_thresh: f64) -> FingerState {
    if stretch > contract_thresh {
        FingerState::Contracted
    } else if stretch < extend_thresh {
        FingerState::Extended
    } else {
        // also NaN
        FingerState::Indeterminate
    }
}

pub fn recognize_gesture(fingers: &[f64; FINGERS], cfg: &GestureConfig) -> Option<GestureId> {
    let pattern = cfg.classify(fingers);
    if pattern.contains(&FingerState::Indeterminate) {
        return None;
    }
    cfg.patterns.iter().find(|(_, p)| **p == pattern).map(|(id, _)| id.clone())
}

/// Tracks how long the current gesture has been held.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HoldTracker {
    pub candidate: Option<GestureId>,
    pub since: f64,
    fired: bool,
}

impl HoldTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feeds one observation at stream time `now`. Emits an event exactly once
    /// per uninterrupted hold, on the first observation at least `hold`
    /// seconds after the gesture first appeared.
    pub fn update(&mut self, now: f64, gesture: Option<&GestureId>, hold: f64) -> Option<ModeSwitchEvent> {
        if self.candidate.as_ref() != gesture {
            self.candidate = gesture.cloned();
            self.since = now;
            self.fired = false;
        }
        let id = self.candidate.as_ref()?;
        if !self.fired && now - self.since >= hold {
            self.fired = true;
            return Some(ModeSwitchEvent { gesture: id.clone(), at: now });
        }
        None
    }
}

pub fn update_hold(
    tracker: &HoldTracker,
    now: f64,
    gesture: Option<&GestureId>,
    hold: f64,
) -> (HoldTracker, Option<ModeSwitchEvent>) {
    let mut next = tracker.clone();
    let ev = next.update(now, gesture, hold);
    (next, ev)
}
