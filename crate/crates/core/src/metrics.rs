//! Tracking-error and lag statistics over a session log.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;
use crate::session::LogRecord;
use crate::supervisor::ModeId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("log is empty")]
    EmptyLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub max: f64,
    pub mean: f64,
    pub last: f64,
}

impl ErrorStats {
    fn of(values: &[f64]) -> Self {
        let max = values.iter().copied().fold(0.0, f64::max);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        Self { max, mean, last: *values.last().unwrap_or(&0.0) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub samples: usize,
    /// Distance between robot and commanded position, meters.
    pub position_error: ErrorStats,
    /// Angle between robot attitude and hand attitude, radians.
    pub attitude_error: ErrorStats,
    /// Ticks by which the robot trajectory trails the command trajectory.
    pub lag_ticks: Option<usize>,
    pub mode_switches: usize,
    pub ticks_per_mode: BTreeMap<ModeId, usize>,
}

pub fn compute_metrics(log: &[LogRecord]) -> Result<Metrics, MetricsError> {
    if log.is_empty() {
        return Err(MetricsError::EmptyLog);
    }
    let pos: Vec<f64> = log.iter().map(|r| r.robot.position.distance(r.command.position)).collect();
    let att: Vec<f64> = log.iter().map(|r| r.robot.orientation.error_angle(&r.frame.hand.orientation)).collect();
    let commands: Vec<Vec3> = log.iter().map(|r| r.command.position).collect();
    let robot: Vec<Vec3> = log.iter().map(|r| r.robot.position).collect();
    let max_lag = (log.len() / 2).min(1000);
    let mut ticks_per_mode = BTreeMap::new();
    for r in log {
        *ticks_per_mode.entry(r.mode).or_insert(0) += 1;
    }
    Ok(Metrics {
        samples: log.len(),
        position_error: ErrorStats::of(&pos),
        attitude_error: ErrorStats::of(&att),
        lag_ticks: estimate_lag(&commands, &robot, max_lag),
        mode_switches: log.windows(2).filter(|w| w[0].mode != w[1].mode).count(),
        ticks_per_mode,
    })
}

/// Shift (in samples, `0..=max_lag`) that maximizes the normalized
/// cross-correlation between `reference[i]` and `delayed[i + lag]`.
///
/// Correlation is computed over the overlapping window with per-axis means
/// removed, summed over the three axes. Returns `None` when no shift has a
/// defined correlation (constant signals, or too little overlap).
pub fn estimate_lag(reference: &[Vec3], delayed: &[Vec3], max_lag: usize) -> Option<usize> {
    let n = reference.len().min(delayed.len());
    let mut best: Option<(usize, f64)> = None;
    for lag in 0..=max_lag.min(n.saturating_sub(2)) {
        let a = &reference[..n - lag];
        let b = &delayed[lag..n];
        let Some(c) = correlation(a, b) else { continue };
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((lag, c));
        }
    }
    best.map(|(lag, _)| lag)
}

fn correlation(a: &[Vec3], b: &[Vec3]) -> Option<f64> {
    let len = a.len() as f64;
    let mean = |s: &[Vec3]| s.iter().fold(Vec3::ZERO, |acc, v| acc + *v) * (1.0 / len);
    let (ma, mb) = (mean(a), mean(b));
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (*x - ma, *y - mb);
        cov += dx.dot(dy);
        va += dx.dot(dx);
        vb += dy.dot(dy);
    }
    let denom = (va * vb).sqrt();
    (denom > 1e-15).then(|| cov / denom)
}
