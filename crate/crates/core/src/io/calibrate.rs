//! Threshold calibration from a nominal run.

use serde::Serialize;
use thiserror::Error;

use crate::model::{DetectorConfig, SpeedClass};

use super::log::RunLog;
use super::replay::{replay, ReplayError};

/// Margin applied to the largest smoothed Lat seen on a nominal run.
pub const THRESHOLD_MARGIN: f64 = 1.5;
/// Smallest suggested threshold, for runs with (near) zero divergence.
pub const MIN_THRESHOLD: f64 = 0.05;
/// Smallest suggested speed deadband.
pub const MIN_DEADBAND: f64 = 0.01;

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("no data: the log has no frame with a lateral comparison")]
    NoData,
    #[error(transparent)]
    Replay(#[from] ReplayError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub frames: usize,
    pub max_smoothed_lat: f64,
    pub p99_smoothed_lat: f64,
    pub suggested_lat_threshold: f64,
    /// Largest frame-to-frame change of the modular target speed.
    pub v_jitter: f64,
    pub suggested_v_deadband: f64,
    /// Set when the run does not look nominal.
    pub warning: Option<String>,
}

/// Nearest-rank percentile of a sorted, nonempty slice.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

pub fn calibrate(log: &RunLog, cfg: &DetectorConfig) -> Result<Calibration, CalibrationError> {
    let out = replay(log, cfg)?;
    let mut lats: Vec<f64> = out
        .detection
        .frames
        .iter()
        .filter_map(|f| f.smoothed_lat)
        .collect();
    if lats.is_empty() {
        return Err(CalibrationError::NoData);
    }
    lats.sort_by(f64::total_cmp);
    let max = *lats.last().unwrap();
    let v_jitter = out
        .detection
        .longitudinal_samples()
        .skip(1)
        .map(|s| s.delta_v.abs())
        .fold(0.0, f64::max);

    let worst_class = out
        .detection
        .longitudinal_samples()
        .map(|s| s.sc)
        .min_by_key(|s| s.value())
        .unwrap_or(SpeedClass::OK);
    let mut reasons = Vec::new();
    if worst_class != SpeedClass::OK {
        reasons.push(format!("speed class dropped to {}", worst_class.label()));
    }
    if !out.events().is_empty() {
        reasons.push(format!(
            "{} events under the current config",
            out.events().len()
        ));
    }
    let warning = (!reasons.is_empty()).then(|| {
        format!(
            "run does not look nominal ({}); thresholds calibrated on it will be loose",
            reasons.join(", ")
        )
    });

    Ok(Calibration {
        frames: lats.len(),
        max_smoothed_lat: max,
        p99_smoothed_lat: percentile(&lats, 99.0),
        suggested_lat_threshold: (THRESHOLD_MARGIN * max).max(MIN_THRESHOLD),
        v_jitter,
        suggested_v_deadband: (THRESHOLD_MARGIN * v_jitter).max(MIN_DEADBAND),
        warning,
    })
}
