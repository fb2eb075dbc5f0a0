//! Longitudinal disagreement: the end-to-end hazard class worsens while the
//! modular target speed does not decrease.
//!
//! Derivatives are one-step backward differences on the aligned sample grid.
//! Only their signs matter, so the sampling rate does not change which steps
//! are flagged.

use crate::lateral::DetectError;
use crate::model::{
    validate_config, CornerCaseEvent, DetectorConfig, EventKind, PlanSample, SpeedClass,
    SpeedClassSample,
};

/// Backward difference of the speed class. Negative means more hazardous.
pub fn delta_sc(curr: SpeedClass, prev: SpeedClass) -> i64 {
    curr.value() - prev.value()
}

/// Backward difference of the target speed with a symmetric deadband.
pub fn delta_v(curr: f64, prev: f64, deadband: f64) -> f64 {
    let raw = curr - prev;
    if raw.abs() <= deadband {
        0.0
    } else {
        raw
    }
}

/// `Long(t)`: true iff the class dropped and the speed did not.
pub fn long_flag(dsc: i64, dv: f64) -> bool {
    dsc < 0 && dv >= 0.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LongitudinalSample {
    pub stamp: f64,
    pub sc: SpeedClass,
    pub v: f64,
    pub delta_sc: i64,
    pub delta_v: f64,
    pub long_flag: bool,
}

#[derive(Debug, Clone, Copy)]
struct FlagRun {
    start: f64,
    last: f64,
    len: usize,
    trigger: Option<(f64, i64, SpeedClass)>,
}

/// Per-stream longitudinal monitor. Holds the previous aligned sample and
/// the current run of flagged steps.
#[derive(Debug, Clone)]
pub struct LongitudinalDetector {
    deadband: f64,
    persistence: usize,
    tolerance: f64,
    prev: Option<(f64, SpeedClass, f64)>,
    steps: usize,
    run: Option<FlagRun>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LongitudinalStep {
    pub sample: LongitudinalSample,
    /// Event for a flagged run that ended just before this sample.
    pub closed: Option<CornerCaseEvent>,
    /// Set on the step where the run reached the persistence count.
    pub triggered: bool,
}

impl LongitudinalDetector {
    pub fn new(cfg: &DetectorConfig) -> Result<Self, DetectError> {
        let cfg = validate_config(*cfg)?;
        Ok(Self {
            deadband: cfg.v_deadband,
            persistence: cfg.long_persistence,
            tolerance: cfg.align_tolerance,
            prev: None,
            steps: 0,
            run: None,
        })
    }

    pub fn step(
        &mut self,
        class: &SpeedClassSample,
        plan: &PlanSample,
    ) -> Result<LongitudinalStep, DetectError> {
        let stamp = plan.stamp;
        let skew = (plan.stamp - class.stamp).abs();
        if skew > self.tolerance {
            return Err(DetectError::AlignmentSkew {
                stamp,
                skew,
                tolerance: self.tolerance,
            });
        }
        let sample = match self.prev {
            Some((prev_stamp, _, _)) if !(stamp > prev_stamp) => {
                return Err(DetectError::UnorderedInput {
                    index: self.steps,
                    stamp,
                    prev: prev_stamp,
                })
            }
            Some((_, prev_sc, prev_v)) => {
                let dsc = delta_sc(class.sc, prev_sc);
                let dv = delta_v(plan.v, prev_v, self.deadband);
                LongitudinalSample {
                    stamp,
                    sc: class.sc,
                    v: plan.v,
                    delta_sc: dsc,
                    delta_v: dv,
                    long_flag: long_flag(dsc, dv),
                }
            }
            None => LongitudinalSample {
                stamp,
                sc: class.sc,
                v: plan.v,
                delta_sc: 0,
                delta_v: 0.0,
                long_flag: false,
            },
        };
        self.prev = Some((stamp, class.sc, plan.v));
        self.steps += 1;

        let mut closed = None;
        let mut triggered = false;
        if sample.long_flag {
            let run = self.run.get_or_insert(FlagRun {
                start: stamp,
                last: stamp,
                len: 0,
                trigger: None,
            });
            run.last = stamp;
            run.len += 1;
            if run.len == self.persistence {
                run.trigger = Some((stamp, sample.delta_sc.abs(), sample.sc));
                triggered = true;
            }
        } else {
            closed = self.close()?;
        }
        Ok(LongitudinalStep {
            sample,
            closed,
            triggered,
        })
    }

    fn close(&mut self) -> Result<Option<CornerCaseEvent>, DetectError> {
        let Some(run) = self.run.take() else {
            return Ok(None);
        };
        match run.trigger {
            Some((stamp, score, sc)) => Ok(Some(CornerCaseEvent::new(
                EventKind::Longitudinal,
                stamp,
                score as f64,
                (run.start, run.last),
                Some(sc),
            )?)),
            None => Ok(None),
        }
    }

    pub fn finish(&mut self) -> Result<Option<CornerCaseEvent>, DetectError> {
        self.close()
    }
}

/// Batch form of [`LongitudinalDetector`] over aligned (class, plan) pairs.
pub fn detect_longitudinal(
    pairs: &[(SpeedClassSample, PlanSample)],
    cfg: &DetectorConfig,
) -> Result<Vec<CornerCaseEvent>, DetectError> {
    let mut det = LongitudinalDetector::new(cfg)?;
    let mut events = Vec::new();
    for (sc, plan) in pairs {
        if let Some(e) = det.step(sc, plan)?.closed {
            events.push(e);
        }
    }
    events.extend(det.finish()?);
    Ok(events)
}
