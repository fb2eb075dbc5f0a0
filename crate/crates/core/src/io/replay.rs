//! Offline replay of a run log through the detection pipeline.

use std::io::Write;

use thiserror::Error;

use crate::fusion::{
    align_streams, run_detection, DetectionOutput, EndToEndInput, ModularInput, PipelineError,
};
use crate::lateral::DetectError;
use crate::model::{
    validate_config, ConfigError, CornerCaseEvent, DetectorConfig, EventKind, ModelError,
    SpeedClassSample,
};

use super::log::{Record, RunLog};

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("record {index}: {source}")]
    Record { index: usize, source: ModelError },
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The detector-facing streams recovered from a log.
#[derive(Debug, Clone, Default)]
pub struct Streams {
    pub modular: Vec<ModularInput>,
    pub e2e: Vec<EndToEndInput>,
    /// End-to-end plans with no speed class at or before their stamp.
    pub unclassified: usize,
}

/// Splits a log into modular and end-to-end inputs. Each end-to-end plan is
/// paired with the latest speed class not newer than it.
pub fn extract_streams(log: &RunLog) -> Result<Streams, ReplayError> {
    let mut classes: Vec<SpeedClassSample> = Vec::new();
    let mut plans = Vec::new();
    let mut out = Streams::default();
    for (index, r) in log.records.iter().enumerate() {
        let wrap = |source| ReplayError::Record { index, source };
        match r {
            Record::SpeedClass { stamp, sc } => {
                classes.push(SpeedClassSample::new(*stamp, *sc).map_err(wrap)?)
            }
            Record::ModularPlan { .. } => {
                let traj = r.trajectory().expect("plan record").map_err(wrap)?;
                out.modular.push(ModularInput::from_trajectory(traj)?);
            }
            Record::E2ePlan { .. } => {
                plans.push(r.trajectory().expect("plan record").map_err(wrap)?)
            }
            _ => {}
        }
    }
    classes.sort_by(|a, b| a.stamp.total_cmp(&b.stamp));
    let mut next = 0;
    for traj in plans {
        while next < classes.len() && classes[next].stamp <= traj.stamp() {
            next += 1;
        }
        match next.checked_sub(1) {
            Some(i) => out.e2e.push(EndToEndInput {
                trajectory: traj,
                class: classes[i],
            }),
            None => out.unclassified += 1,
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ReplayOutput {
    pub config: DetectorConfig,
    pub detection: DetectionOutput,
    /// Modular samples left without an end-to-end partner.
    pub dropped: usize,
    pub modular_total: usize,
    pub unclassified: usize,
}

impl ReplayOutput {
    pub fn events(&self) -> &[CornerCaseEvent] {
        &self.detection.events
    }
}

pub fn replay(log: &RunLog, cfg: &DetectorConfig) -> Result<ReplayOutput, ReplayError> {
    let cfg = validate_config(*cfg)?;
    let reference = log.header.reference_path()?;
    let streams = extract_streams(log)?;
    let alignment = align_streams(&streams.modular, &streams.e2e, &cfg)?;
    let detection = run_detection(&alignment.frames, &reference, &cfg)?;
    Ok(ReplayOutput {
        config: cfg,
        detection,
        dropped: alignment.dropped,
        modular_total: alignment.total,
        unclassified: streams.unclassified,
    })
}

pub const METRICS_HEADER: [&str; 13] = [
    "stamp",
    "skew",
    "lat_m",
    "lat_avg",
    "lat",
    "lat_smoothed",
    "sc",
    "v",
    "delta_sc",
    "delta_v",
    "long_flag",
    "lat_event",
    "long_event",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One CSV row per aligned frame. Empty lateral cells mark frames whose
/// plans did not cover the horizon. The event columns flag frames inside an
/// event window.
pub fn write_metrics<W: Write>(out: &ReplayOutput, sink: W) -> Result<(), ReplayError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(METRICS_HEADER)?;
    let inside = |kind: EventKind, t: f64| {
        out.detection
            .events
            .iter()
            .any(|e| e.kind == kind && e.window.0 <= t && t <= e.window.1)
    };
    for f in &out.detection.frames {
        let l = &f.longitudinal;
        w.write_record([
            f.stamp.to_string(),
            f.skew.to_string(),
            opt(f.lateral.map(|s| s.lat_m)),
            opt(f.lateral.map(|s| s.lat_avg)),
            opt(f.lateral.map(|s| s.lat)),
            opt(f.smoothed_lat),
            l.sc.value().to_string(),
            l.v.to_string(),
            l.delta_sc.to_string(),
            l.delta_v.to_string(),
            u8::from(l.long_flag).to_string(),
            u8::from(inside(EventKind::Lateral, f.stamp)).to_string(),
            u8::from(inside(EventKind::Longitudinal, f.stamp)).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Events as JSON lines.
pub fn write_events<W: Write>(events: &[CornerCaseEvent], mut sink: W) -> Result<(), ReplayError> {
    for e in events {
        writeln!(
            sink,
            "{}",
            serde_json::to_string(e).expect("events serialize")
        )?;
    }
    sink.flush()?;
    Ok(())
}
