//! Fixed-timestep loop: operator frames → gestures → supervisor → plant.
//!
//! Session time at tick `n` is `origin + n / tick_rate`, where `origin` is the
//! timestamp of the first frame offered. A frame becomes visible to the
//! pipeline once `t <= now - latency`; when several become visible in one tick
//! only the newest is used. Nothing here reads the wall clock, so a run is a
//! pure function of the frame stream and the configuration.

use std::collections::VecDeque;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Config, ConfigError};
use crate::geometry::Pose;
use crate::gestures::{GestureConfig, HoldTracker};
use crate::interaction::OperatorFrame;
use crate::plant::{PlantError, PoseCommand, RobotState};
use crate::supervisor::{FeedbackState, ModeId, Supervisor, SupervisorConfig};

/// Slack on timestamp comparisons so frames stamped on tick boundaries are
/// not pushed to the next tick by rounding.
pub const TIME_EPSILON: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error("record sink failed: {0}")]
    Sink(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub tick: u64,
    pub frame: OperatorFrame,
    pub mode: ModeId,
    pub command: PoseCommand,
    /// Robot pose at the end of the tick.
    pub robot: Pose,
}

pub trait RecordSink {
    fn record(&mut self, rec: &LogRecord) -> io::Result<()>;

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

impl RecordSink for Vec<LogRecord> {
    fn record(&mut self, rec: &LogRecord) -> io::Result<()> {
        self.push(rec.clone());
        Ok(())
    }
}

/// Discards records.
pub struct NullSink;

impl RecordSink for NullSink {
    fn record(&mut self, _: &LogRecord) -> io::Result<()> {
        Ok(())
    }
}

/// One JSON document per line.
pub struct JsonLinesSink<W: Write> {
    out: W,
}

impl<W: Write> JsonLinesSink<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> RecordSink for JsonLinesSink<W> {
    fn record(&mut self, rec: &LogRecord) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, rec)?;
        self.out.write_all(b"\n")
    }

    fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }
}

pub fn read_log(text: &str) -> Result<Vec<LogRecord>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    SourceExhausted,
    DurationReached,
    Stopped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub ticks: u64,
    pub records: u64,
    pub frames_received: u64,
    pub frames_used: u64,
    /// Frames replaced by a newer one within the same tick.
    pub frames_superseded: u64,
    /// Frames older than one already received.
    pub frames_out_of_order: u64,
    pub gap_ticks: u64,
    pub gap_detected: bool,
    pub mode_switches: u64,
    pub final_mode: Option<ModeId>,
    pub stop: StopReason,
}

/// Read-only view of the loop after a tick, for broadcasting.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub tick: u64,
    pub time: f64,
    pub robot: Pose,
    pub command: PoseCommand,
    pub mode: ModeId,
    pub feedback: FeedbackState,
    pub spherical_radius: Option<f64>,
    pub frame: OperatorFrame,
}

pub struct Session {
    rate: f64,
    dt: f64,
    latency: f64,
    gap_limit: f64,
    gestures: GestureConfig,
    supervisor_cfg: SupervisorConfig,
    robot: RobotState,
    supervisor: Option<Supervisor>,
    hold: HoldTracker,
    pending: VecDeque<OperatorFrame>,
    current: Option<OperatorFrame>,
    newest_t: Option<f64>,
    origin: Option<f64>,
    tick: u64,
    last_snapshot: Option<Snapshot>,
    frames_received: u64,
    frames_used: u64,
    frames_superseded: u64,
    frames_out_of_order: u64,
    gap_ticks: u64,
    records: u64,
}

impl Session {
    pub fn new(cfg: &Config) -> Result<Self, SessionError> {
        cfg.validate()?;
        Ok(Self {
            rate: cfg.session.tick_rate,
            dt: cfg.session.dt(),
            latency: cfg.session.latency,
            gap_limit: cfg.session.gap_limit,
            gestures: cfg.gestures.clone(),
            supervisor_cfg: cfg.supervisor(),
            robot: RobotState::new(cfg.session.initial_pose, cfg.plant)?,
            supervisor: None,
            hold: HoldTracker::new(),
            pending: VecDeque::new(),
            current: None,
            newest_t: None,
            origin: None,
            tick: 0,
            last_snapshot: None,
            frames_received: 0,
            frames_used: 0,
            frames_superseded: 0,
            frames_out_of_order: 0,
            gap_ticks: 0,
            records: 0,
        })
    }

    /// Queues a frame. Frames older than the newest one seen are discarded;
    /// returns whether the frame was kept.
    pub fn offer(&mut self, frame: OperatorFrame) -> bool {
        self.frames_received += 1;
        if !frame.t.is_finite() || self.newest_t.is_some_and(|n| frame.t < n) {
            self.frames_out_of_order += 1;
            return false;
        }
        self.newest_t = Some(frame.t);
        self.origin.get_or_insert(frame.t);
        self.pending.push_back(frame);
        true
    }

    pub fn is_started(&self) -> bool {
        self.origin.is_some()
    }

    pub fn has_pending(&self) -> bool {
        !self.pending.is_empty()
    }

    pub fn tick_index(&self) -> u64 {
        self.tick
    }

    /// Session time of the next tick.
    pub fn now(&self) -> Option<f64> {
        self.origin.map(|o| o + self.tick as f64 / self.rate)
    }

    /// Latest frame timestamp the next tick will accept.
    pub fn horizon(&self) -> Option<f64> {
        self.now().map(|now| now - self.latency + TIME_EPSILON)
    }

    pub fn robot(&self) -> &RobotState {
        &self.robot
    }

    pub fn supervisor(&self) -> Option<&Supervisor> {
        self.supervisor.as_ref()
    }

    pub fn snapshot(&self) -> Option<&Snapshot> {
        self.last_snapshot.as_ref()
    }

    /// Runs one tick. Returns the log record, or `None` if no frame has
    /// reached the pipeline yet. Does nothing before the first frame is offered.
    pub fn tick(&mut self) -> Result<Option<LogRecord>, SessionError> {
        let (Some(now), Some(horizon)) = (self.now(), self.horizon()) else {
            return Ok(None);
        };
        let mut took = false;
        while self.pending.front().is_some_and(|f| f.t <= horizon) {
            let f = self.pending.pop_front().expect("front checked");
            if took {
                self.frames_superseded += 1;
            }
            took = true;
            self.current = Some(f);
        }
        if took {
            self.frames_used += 1;
        }
        let Some(frame) = self.current.as_ref() else {
            self.tick += 1;
            return Ok(None);
        };

        let stale = now - self.latency - frame.t > self.gap_limit;
        let cmd = match (&mut self.supervisor, stale) {
            (Some(sup), true) => {
                self.gap_ticks += 1;
                sup.last_command()
            }
            (sup, _) => {
                let sup =
                    sup.get_or_insert_with(|| Supervisor::new(self.supervisor_cfg.clone(), &self.robot.pose, frame));
                let gesture = self.gestures.recognize_raw(&frame.knuckles);
                let ev = self.hold.update(frame.t, gesture.as_ref(), self.gestures.hold_duration);
                sup.step(ev.as_ref(), &self.robot.pose, frame)
            }
        };
        self.robot = self.robot.step(&cmd, self.dt)?;
        let sup = self.supervisor.as_ref().expect("initialized above");
        let rec =
            LogRecord { tick: self.tick, frame: frame.clone(), mode: sup.mode(), command: cmd, robot: self.robot.pose };
        self.last_snapshot = Some(Snapshot {
            tick: self.tick,
            time: now,
            robot: self.robot.pose,
            command: cmd,
            mode: sup.mode(),
            feedback: sup.feedback(),
            spherical_radius: sup.state().spherical_radius(),
            frame: frame.clone(),
        });
        self.tick += 1;
        self.records += 1;
        Ok(Some(rec))
    }

    pub fn summary(&self, stop: StopReason) -> SessionSummary {
        SessionSummary {
            ticks: self.tick,
            records: self.records,
            frames_received: self.frames_received,
            frames_used: self.frames_used,
            frames_superseded: self.frames_superseded,
            frames_out_of_order: self.frames_out_of_order,
            gap_ticks: self.gap_ticks,
            gap_detected: self.gap_ticks > 0,
            mode_switches: self.supervisor.as_ref().map_or(0, |s| s.switches()),
            final_mode: self.supervisor.as_ref().map(|s| s.mode()),
            stop,
        }
    }
}

/// Runs a session unpaced over a timestamp-ordered frame source until the
/// source is exhausted (or `max_duration` is reached).
pub fn run_session<I, S>(cfg: &Config, source: I, sink: &mut S) -> Result<SessionSummary, SessionError>
where
    I: IntoIterator<Item = OperatorFrame>,
    S: RecordSink + ?Sized,
{
    let mut session = Session::new(cfg)?;
    let mut source = source.into_iter().peekable();
    let Some(first) = source.next() else {
        return Ok(session.summary(StopReason::SourceExhausted));
    };
    session.offer(first);
    let limit = cfg.session.max_duration;
    let start = session.now().expect("started");
    let stop = loop {
        if let Some(limit) = limit {
            if session.now().expect("started") - start > limit + TIME_EPSILON {
                break StopReason::DurationReached;
            }
        }
        let horizon = session.horizon().expect("started");
        while let Some(f) = source.next_if(|f| f.t <= horizon) {
            session.offer(f);
        }
        if let Some(rec) = session.tick()? {
            sink.record(&rec)?;
        }
        if source.peek().is_none() && !session.has_pending() {
            break StopReason::SourceExhausted;
        }
    };
    sink.flush()?;
    Ok(session.summary(stop))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{UnitQuat, Vec3};
    use crate::interaction::frame_at;

    fn frames(n: usize, rate: f64, hand: impl Fn(f64) -> Vec3) -> Vec<OperatorFrame> {
        (0..n)
            .map(|i| {
                let t = i as f64 / rate;
                let mut f = frame_at(t, hand(t), UnitQuat::IDENTITY, Vec3::new(0.0, 0.0, 1.4));
                f.knuckles = vec![0.5; 5];
                f
            })
            .collect()
    }

    #[test]
    fn empty_source_stops_cleanly() {
        let mut log = Vec::new();
        let s = run_session(&Config::default(), Vec::new(), &mut log).unwrap();
        assert!(log.is_empty());
        assert_eq!(s.stop, StopReason::SourceExhausted);
        assert_eq!(s.ticks, 0);
    }

    #[test]
    fn first_record_appears_after_latency() {
        let cfg = Config::default();
        let mut log = Vec::new();
        run_session(&cfg, frames(100, 100.0, |_| Vec3::new(0.3, 0.0, 1.4)), &mut log).unwrap();
        assert_eq!(log.first().unwrap().tick, 40);
        assert_eq!(log.first().unwrap().frame.t, 0.0);
        assert_eq!(log.len(), 100);
        assert!(log.windows(2).all(|w| w[1].tick > w[0].tick));
    }

    #[test]
    fn constant_hand_holds_robot_in_operation() {
        let cfg = Config::default();
        let mut log = Vec::new();
        let s = run_session(&cfg, frames(200, 100.0, |_| Vec3::new(0.3, 0.0, 1.4)), &mut log).unwrap();
        assert_eq!(s.final_mode, Some(ModeId::Operation));
        for rec in &log {
            assert_eq!(rec.command.position, cfg.session.initial_pose.position);
        }
    }

    #[test]
    fn superseded_frames_are_counted() {
        let mut cfg = Config::default();
        cfg.session.latency = 0.0;
        // 400 Hz frames into a 100 Hz loop
        let mut log = Vec::new();
        let s = run_session(&cfg, frames(400, 400.0, |t| Vec3::new(0.3 + t, 0.0, 1.4)), &mut log).unwrap();
        assert_eq!(s.frames_received, 400);
        assert_eq!(s.frames_used, log.len() as u64);
        assert_eq!(s.frames_used + s.frames_superseded, 400);
    }

    #[test]
    fn out_of_order_frames_are_dropped() {
        let mut cfg = Config::default();
        cfg.session.latency = 0.0;
        let mut fs = frames(10, 100.0, |_| Vec3::new(0.3, 0.0, 1.4));
        let mut old = fs[2].clone();
        old.hand.position.x = 99.0;
        fs.insert(5, old);
        let mut log = Vec::new();
        let s = run_session(&cfg, fs, &mut log).unwrap();
        assert_eq!(s.frames_out_of_order, 1);
        assert!(log.iter().all(|r| r.frame.hand.position.x != 99.0));
    }

    #[test]
    fn gap_holds_last_command() {
        let mut cfg = Config::default();
        cfg.session.latency = 0.0;
        let mut fs = frames(50, 100.0, |t| Vec3::new(0.3 + t, 0.0, 1.4));
        // resume 2 s later with the hand far away
        let mut late = fs.last().unwrap().clone();
        late.t += 2.0;
        late.hand.position.x = 5.0;
        fs.push(late);
        let mut log = Vec::new();
        let s = run_session(&cfg, fs, &mut log).unwrap();
        assert!(s.gap_detected);
        // frame 49 is used at tick 49; stale once more than 1 s old
        let held = log[49].command;
        let stale: Vec<_> = log.iter().filter(|r| r.tick > 150 && r.tick < 249).collect();
        assert!(!stale.is_empty());
        assert!(stale.iter().all(|r| r.command == held));
        assert_eq!(log.last().unwrap().frame.hand.position.x, 5.0);
    }

    #[test]
    fn duration_limit() {
        let mut cfg = Config::default();
        cfg.session.max_duration = Some(0.5);
        let mut log = Vec::new();
        let s = run_session(&cfg, frames(500, 100.0, |_| Vec3::new(0.3, 0.0, 1.4)), &mut log).unwrap();
        assert_eq!(s.stop, StopReason::DurationReached);
        assert_eq!(s.ticks, 51);
    }

    #[test]
    fn live_style_ticking() {
        let cfg = Config::default();
        let mut s = Session::new(&cfg).unwrap();
        assert_eq!(s.tick().unwrap(), None);
        assert_eq!(s.tick_index(), 0);
        for f in frames(60, 100.0, |_| Vec3::new(0.3, 0.0, 1.4)) {
            s.offer(f);
        }
        let produced = (0..60).filter_map(|_| s.tick().unwrap()).count();
        assert_eq!(produced, 20);
        let snap = s.snapshot().unwrap();
        assert_eq!(snap.mode, ModeId::Operation);
        assert_eq!(snap.feedback.mode_name, "Operation");
    }

    #[test]
    fn json_lines_sink_writes_one_record_per_line() {
        let mut sink = JsonLinesSink::new(Vec::new());
        run_session(&Config::default(), frames(50, 100.0, |_| Vec3::new(0.3, 0.0, 1.4)), &mut sink).unwrap();
        let text = String::from_utf8(sink.into_inner()).unwrap();
        assert_eq!(text.lines().count(), 50);
        assert!(text.lines().next().unwrap().starts_with(r#"{"tick":40,"frame":"#));
        let back = read_log(&text).unwrap();
        assert_eq!(back.len(), 50);
        assert_eq!(back[0].mode, ModeId::Operation);
    }
}
