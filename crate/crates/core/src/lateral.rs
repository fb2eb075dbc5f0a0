//! Lateral divergence between the modular and end-to-end profiles, and
//! run-based lateral corner-case detection over the smoothed score.

use std::collections::VecDeque;

use thiserror::Error;

use crate::model::{
    validate_config, ConfigError, CornerCaseEvent, DetectorConfig, EventKind, LateralProfile,
    LateralScore, ModelError,
};

/// Stations of two compared profiles must agree to within this many meters.
pub const STATION_TOLERANCE: f64 = 1e-6;

/// Stamps closer than this are treated as equal in window arithmetic.
const STAMP_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectError {
    #[error("profile mismatch: {0}")]
    ProfileMismatch(String),
    #[error("input not strictly increasing in stamp at index {index} ({stamp} after {prev})")]
    UnorderedInput { index: usize, stamp: f64, prev: f64 },
    #[error("alignment skew {skew:.3} s at stamp {stamp} exceeds tolerance {tolerance:.3} s")]
    AlignmentSkew {
        stamp: f64,
        skew: f64,
        tolerance: f64,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn check_compatible(a: &LateralProfile, b: &LateralProfile) -> Result<(), DetectError> {
    if a.len() != b.len() {
        return Err(DetectError::ProfileMismatch(format!(
            "{} vs {} points",
            a.len(),
            b.len()
        )));
    }
    for (i, (sa, sb)) in a.arclengths().iter().zip(b.arclengths()).enumerate() {
        if (sa - sb).abs() > STATION_TOLERANCE {
            return Err(DetectError::ProfileMismatch(format!(
                "station {i}: {sa} vs {sb}"
            )));
        }
    }
    Ok(())
}

fn abs_diffs<'a>(a: &'a LateralProfile, b: &'a LateralProfile) -> impl Iterator<Item = f64> + 'a {
    a.offsets()
        .iter()
        .zip(b.offsets())
        .map(|(x, y)| (x - y).abs())
}

/// Largest absolute offset difference over all stations.
pub fn lat_max(modular: &LateralProfile, e2e: &LateralProfile) -> Result<f64, DetectError> {
    check_compatible(modular, e2e)?;
    Ok(abs_diffs(modular, e2e).fold(0.0, f64::max))
}

/// Mean absolute offset difference over all stations.
pub fn lat_avg(modular: &LateralProfile, e2e: &LateralProfile) -> Result<f64, DetectError> {
    check_compatible(modular, e2e)?;
    Ok(abs_diffs(modular, e2e).sum::<f64>() / modular.len() as f64)
}

/// Weighted combination `w_m * lat_m + w_avg * lat_avg`.
pub fn lat_score(
    modular: &LateralProfile,
    e2e: &LateralProfile,
    cfg: &DetectorConfig,
) -> Result<LateralScore, DetectError> {
    let cfg = validate_config(*cfg)?;
    let skew = (modular.stamp() - e2e.stamp()).abs();
    if skew > cfg.align_tolerance {
        return Err(DetectError::AlignmentSkew {
            stamp: modular.stamp(),
            skew,
            tolerance: cfg.align_tolerance,
        });
    }
    let lat_m = lat_max(modular, e2e)?;
    // the rounded mean can land an ulp above the max; the true mean cannot
    let lat_avg = lat_avg(modular, e2e)?.min(lat_m);
    Ok(LateralScore {
        stamp: modular.stamp(),
        lat_m,
        lat_avg,
        lat: cfg.w_m * lat_m + cfg.w_avg * lat_avg,
    })
}

#[derive(Debug, Clone, Copy)]
struct OpenRun {
    start: f64,
    last: f64,
    peak: f64,
}

/// Incremental lateral detector: a trailing moving average of Lat over
/// `smoothing_window` seconds, one event per maximal run at or above
/// `lat_threshold`.
#[derive(Debug, Clone)]
pub struct LateralDetector {
    window: f64,
    threshold: f64,
    recent: VecDeque<(f64, f64)>,
    last_stamp: Option<f64>,
    pushed: usize,
    run: Option<OpenRun>,
}

/// Result of feeding one score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LateralStep {
    pub smoothed: f64,
    pub above: bool,
    /// Event for a run that ended just before this sample.
    pub closed: Option<CornerCaseEvent>,
}

impl LateralDetector {
    pub fn new(cfg: &DetectorConfig) -> Result<Self, DetectError> {
        let cfg = validate_config(*cfg)?;
        Ok(Self {
            window: cfg.smoothing_window,
            threshold: cfg.lat_threshold,
            recent: VecDeque::new(),
            last_stamp: None,
            pushed: 0,
            run: None,
        })
    }

    pub fn push(&mut self, score: &LateralScore) -> Result<LateralStep, DetectError> {
        let t = score.stamp;
        if let Some(prev) = self.last_stamp {
            if !(t > prev) {
                return Err(DetectError::UnorderedInput {
                    index: self.pushed,
                    stamp: t,
                    prev,
                });
            }
        }
        self.last_stamp = Some(t);
        self.pushed += 1;

        self.recent.push_back((t, score.lat));
        while let Some(&(s, _)) = self.recent.front() {
            if t - s >= self.window - STAMP_EPS {
                self.recent.pop_front();
            } else {
                break;
            }
        }
        let smoothed = self.recent.iter().map(|&(_, v)| v).sum::<f64>() / self.recent.len() as f64;
        let above = smoothed >= self.threshold;

        let mut closed = None;
        match (&mut self.run, above) {
            (Some(run), true) => {
                run.last = t;
                run.peak = run.peak.max(smoothed);
            }
            (Some(_), false) => closed = self.close()?,
            (None, true) => {
                self.run = Some(OpenRun {
                    start: t,
                    last: t,
                    peak: smoothed,
                })
            }
            (None, false) => {}
        }
        Ok(LateralStep {
            smoothed,
            above,
            closed,
        })
    }

    pub fn in_run(&self) -> bool {
        self.run.is_some()
    }

    fn close(&mut self) -> Result<Option<CornerCaseEvent>, DetectError> {
        match self.run.take() {
            Some(run) => Ok(Some(CornerCaseEvent::new(
                EventKind::Lateral,
                run.start,
                run.peak,
                (run.start, run.last),
                None,
            )?)),
            None => Ok(None),
        }
    }

    /// Closes a run still open at the end of the stream.
    pub fn finish(&mut self) -> Result<Option<CornerCaseEvent>, DetectError> {
        self.close()
    }
}

/// Batch form of [`LateralDetector`].
pub fn detect_lateral(
    scores: &[LateralScore],
    cfg: &DetectorConfig,
) -> Result<Vec<CornerCaseEvent>, DetectError> {
    let mut det = LateralDetector::new(cfg)?;
    let mut events = Vec::new();
    for s in scores {
        if let Some(e) = det.push(s)?.closed {
            events.push(e);
        }
    }
    events.extend(det.finish()?);
    Ok(events)
}
