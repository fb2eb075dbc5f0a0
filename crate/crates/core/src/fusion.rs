//! Stream alignment, the combined detection pipeline and the graded
//! response policy.
//!
//! The end-to-end stream runs slower than the modular one. Each modular
//! sample is paired with the latest end-to-end sample that is not newer than
//! it (zero-order hold), provided the stamps are within `align_tolerance`.
//! Alignment depends only on stamps, never on arrival order.

use crate::geometry::{lateral_profile_from, project_point, GeometryError};
use crate::lateral::{lat_score, DetectError, LateralDetector};
use crate::longitudinal::{LongitudinalDetector, LongitudinalSample};
use crate::model::{
    validate_config, CornerCaseEvent, DetectorConfig, EventKind, LateralScore, PlanSample,
    ReferencePath, ResponseAction, SpeedClass, SpeedClassSample, Trajectory,
};

/// Lateral response: gentle slow-down.
pub const LATERAL_REDUCTION: f64 = 0.7;
/// Single-level hazard increase: stronger slow-down.
pub const LONGITUDINAL_REDUCTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct ModularInput {
    pub trajectory: Trajectory,
    pub plan: PlanSample,
}

impl ModularInput {
    /// Takes `v` from the first point of the modular plan.
    pub fn from_trajectory(trajectory: Trajectory) -> Result<Self, DetectError> {
        let v = trajectory
            .head_speed()
            .ok_or_else(|| DetectError::ProfileMismatch("modular plan without speeds".into()))?;
        let plan = PlanSample::new(trajectory.stamp(), v)?;
        Ok(Self { trajectory, plan })
    }

    pub fn stamp(&self) -> f64 {
        self.trajectory.stamp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndToEndInput {
    pub trajectory: Trajectory,
    pub class: SpeedClassSample,
}

impl EndToEndInput {
    pub fn stamp(&self) -> f64 {
        self.trajectory.stamp().max(self.class.stamp)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AlignedFrame<'a> {
    /// Modular sample time.
    pub stamp: f64,
    pub modular: &'a ModularInput,
    pub e2e: &'a EndToEndInput,
    /// Largest pairwise stamp difference among the frame's sources.
    pub skew: f64,
}

impl<'a> AlignedFrame<'a> {
    /// Pairs two samples, or `None` if their skew exceeds the tolerance or
    /// the end-to-end sample is from the future.
    pub fn pair(modular: &'a ModularInput, e2e: &'a EndToEndInput, tolerance: f64) -> Option<Self> {
        let stamps = [modular.stamp(), e2e.trajectory.stamp(), e2e.class.stamp];
        let hi = stamps.iter().cloned().fold(f64::MIN, f64::max);
        let lo = stamps.iter().cloned().fold(f64::MAX, f64::min);
        let skew = hi - lo;
        if e2e.stamp() > modular.stamp() || skew > tolerance {
            return None;
        }
        Some(Self {
            stamp: modular.stamp(),
            modular,
            e2e,
            skew,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Alignment<'a> {
    pub frames: Vec<AlignedFrame<'a>>,
    /// Modular samples with no eligible partner.
    pub dropped: usize,
    pub total: usize,
}

fn check_increasing(stamps: impl Iterator<Item = f64>) -> Result<(), DetectError> {
    let mut prev: Option<f64> = None;
    for (index, stamp) in stamps.enumerate() {
        if let Some(p) = prev {
            if !(stamp > p) {
                return Err(DetectError::UnorderedInput {
                    index,
                    stamp,
                    prev: p,
                });
            }
        }
        prev = Some(stamp);
    }
    Ok(())
}

pub fn align_streams<'a>(
    modular: &'a [ModularInput],
    e2e: &'a [EndToEndInput],
    cfg: &DetectorConfig,
) -> Result<Alignment<'a>, DetectError> {
    let cfg = validate_config(*cfg)?;
    check_increasing(modular.iter().map(ModularInput::stamp))?;
    check_increasing(e2e.iter().map(EndToEndInput::stamp))?;

    let mut frames = Vec::with_capacity(modular.len());
    let mut dropped = 0;
    let mut next = 0;
    for m in modular {
        while next < e2e.len() && e2e[next].stamp() <= m.stamp() {
            next += 1;
        }
        let frame = next
            .checked_sub(1)
            .and_then(|i| AlignedFrame::pair(m, &e2e[i], cfg.align_tolerance));
        match frame {
            Some(f) => frames.push(f),
            None => dropped += 1,
        }
    }
    Ok(Alignment {
        frames,
        dropped,
        total: modular.len(),
    })
}

/// Maps an event to a graded response.
///
/// | event                                   | response              |
/// |-----------------------------------------|-----------------------|
/// | longitudinal, drop >= 2 or into class 0 | minimal risk maneuver |
/// | longitudinal, drop of 1                 | speed x 0.5           |
/// | lateral                                 | speed x 0.7           |
pub fn response_policy(event: &CornerCaseEvent) -> ResponseAction {
    match event.kind {
        EventKind::Lateral => ResponseAction::SpeedReduction {
            factor: LATERAL_REDUCTION,
        },
        EventKind::Longitudinal => {
            if event.score >= 2.0 || event.speed_class == Some(SpeedClass::BRAKE) {
                ResponseAction::MinimalRiskManeuver
            } else if event.score >= 1.0 {
                ResponseAction::SpeedReduction {
                    factor: LONGITUDINAL_REDUCTION,
                }
            } else {
                ResponseAction::None
            }
        }
    }
}

/// Per-frame output, one per aligned frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameMetrics {
    pub stamp: f64,
    pub skew: f64,
    /// `None` when the frame's plans did not cover the horizon.
    pub lateral: Option<LateralScore>,
    pub smoothed_lat: Option<f64>,
    pub longitudinal: LongitudinalSample,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionOutput {
    pub frames: Vec<FrameMetrics>,
    pub events: Vec<CornerCaseEvent>,
    /// Frames whose lateral comparison was skipped for a too-short path.
    pub skipped_frames: usize,
}

impl DetectionOutput {
    pub fn lateral_scores(&self) -> impl Iterator<Item = &LateralScore> + '_ {
        self.frames.iter().filter_map(|f| f.lateral.as_ref())
    }

    pub fn longitudinal_samples(&self) -> impl Iterator<Item = &LongitudinalSample> + '_ {
        self.frames.iter().map(|f| &f.longitudinal)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Both detectors driven frame by frame. Owns all detector state.
#[derive(Debug, Clone)]
pub struct Pipeline<'r> {
    reference: &'r ReferencePath,
    cfg: DetectorConfig,
    lateral: LateralDetector,
    longitudinal: LongitudinalDetector,
    output: DetectionOutput,
    triggers: Vec<(f64, ResponseAction)>,
}

impl<'r> Pipeline<'r> {
    pub fn new(reference: &'r ReferencePath, cfg: &DetectorConfig) -> Result<Self, DetectError> {
        let cfg = validate_config(*cfg)?;
        Ok(Self {
            reference,
            cfg,
            lateral: LateralDetector::new(&cfg)?,
            longitudinal: LongitudinalDetector::new(&cfg)?,
            output: DetectionOutput::default(),
            triggers: Vec::new(),
        })
    }

    fn lateral_score(
        &self,
        frame: &AlignedFrame<'_>,
    ) -> Result<Option<LateralScore>, PipelineError> {
        let anchor = project_point(self.reference, &frame.modular.trajectory.points()[0].pose).s;
        let profiles =
            lateral_profile_from(self.reference, &frame.modular.trajectory, anchor, &self.cfg)
                .and_then(|m| {
                    lateral_profile_from(self.reference, &frame.e2e.trajectory, anchor, &self.cfg)
                        .map(|e| (m, e))
                });
        match profiles {
            Ok((m, e)) => Ok(Some(lat_score(&m, &e, &self.cfg)?)),
            Err(GeometryError::PathTooShort { .. }) => Ok(None),
            Err(other) => Err(other.into()),
        }
    }

    fn record(&mut self, event: CornerCaseEvent) {
        let response = response_policy(&event);
        self.output.events.push(event.with_response(response));
    }

    pub fn push(&mut self, frame: &AlignedFrame<'_>) -> Result<FrameMetrics, PipelineError> {
        let lateral = self.lateral_score(frame)?;
        let mut smoothed_lat = None;
        match &lateral {
            Some(score) => {
                let was_in_run = self.lateral.in_run();
                let step = self.lateral.push(score)?;
                smoothed_lat = Some(step.smoothed);
                if let Some(e) = step.closed {
                    self.record(e);
                }
                if step.above && !was_in_run {
                    self.triggers.push((
                        frame.stamp,
                        ResponseAction::SpeedReduction {
                            factor: LATERAL_REDUCTION,
                        },
                    ));
                }
            }
            None => self.output.skipped_frames += 1,
        }

        let mut plan = frame.modular.plan;
        plan.stamp = frame.stamp;
        let long = self.longitudinal.step(&frame.e2e.class, &plan)?;
        if let Some(e) = long.closed {
            self.record(e);
        }
        if long.triggered {
            let probe = CornerCaseEvent::new(
                EventKind::Longitudinal,
                frame.stamp,
                long.sample.delta_sc.unsigned_abs() as f64,
                (frame.stamp, frame.stamp),
                Some(long.sample.sc),
            )
            .map_err(DetectError::from)?;
            self.triggers.push((frame.stamp, response_policy(&probe)));
        }

        let metrics = FrameMetrics {
            stamp: frame.stamp,
            skew: frame.skew,
            lateral,
            smoothed_lat,
            longitudinal: long.sample,
        };
        self.output.frames.push(metrics);
        Ok(metrics)
    }

    /// Strongest response triggered within `hold` seconds before `now`.
    pub fn active_response(&self, now: f64, hold: f64) -> ResponseAction {
        self.triggers
            .iter()
            .rev()
            .take_while(|(t, _)| now - t <= hold)
            .map(|&(_, r)| r)
            .max_by(|a, b| a.severity_cmp(b))
            .unwrap_or(ResponseAction::None)
    }

    pub fn finish(mut self) -> Result<DetectionOutput, PipelineError> {
        if let Some(e) = self.lateral.finish()? {
            self.record(e);
        }
        if let Some(e) = self.longitudinal.finish()? {
            self.record(e);
        }
        self.output
            .events
            .sort_by(|a, b| a.stamp.total_cmp(&b.stamp).then(a.kind.cmp(&b.kind)));
        Ok(self.output)
    }
}

/// Runs both detectors over aligned frames and merges their events in stamp
/// order, each annotated with its response.
pub fn run_detection(
    frames: &[AlignedFrame<'_>],
    reference: &ReferencePath,
    cfg: &DetectorConfig,
) -> Result<DetectionOutput, PipelineError> {
    let mut pipeline = Pipeline::new(reference, cfg)?;
    for frame in frames {
        pipeline.push(frame)?;
    }
    pipeline.finish()
}
