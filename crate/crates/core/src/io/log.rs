//! Run logs: one JSON object per line, header first.
//!
//! ```text
//! {"type":"header","format_version":1,"scenario":"nominal_straight",...}
//! {"type":"e2e_plan","stamp":0.0,"points":[[0.0,0.0,0.0],...]}
//! {"type":"speed_class","stamp":0.0,"sc":3}
//! {"type":"modular_plan","stamp":0.0,"points":[...],"speeds":[...]}
//! ```
//!
//! Plan points are `[x, y, heading]`. Floats are written in shortest
//! round-trip form, so writing a parsed log reproduces it byte for byte.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    CornerCaseEvent, DetectorConfig, ModelError, Pose2D, ReferencePath, SpeedClass, Trajectory,
};
use crate::sim::{SimConfig, WorldState, LOG_EPOCH};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("empty log: missing header")]
    MissingHeader,
    #[error("unsupported log format version {0} (expected {FORMAT_VERSION})")]
    Version(u32),
    #[error("line {line}: stamp {stamp} is earlier than the previous record ({prev})")]
    StampOrder { line: usize, stamp: f64, prev: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeaderTag {
    Header,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogHeader {
    #[serde(rename = "type")]
    pub tag: HeaderTag,
    pub format_version: u32,
    pub scenario: String,
    /// What stamps are measured from.
    pub epoch: String,
    pub config: DetectorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimConfig>,
    /// Reference polyline vertices.
    pub reference: Vec<[f64; 2]>,
}

impl LogHeader {
    pub fn new(
        scenario: &str,
        config: DetectorConfig,
        reference: &ReferencePath,
        sim: Option<SimConfig>,
    ) -> Self {
        Self {
            tag: HeaderTag::Header,
            format_version: FORMAT_VERSION,
            scenario: scenario.to_string(),
            epoch: LOG_EPOCH.to_string(),
            config,
            sim,
            reference: reference.vertices().iter().map(|v| [v.x, v.y]).collect(),
        }
    }

    pub fn reference_path(&self) -> Result<ReferencePath, ModelError> {
        let xy: Vec<(f64, f64)> = self.reference.iter().map(|v| (v[0], v[1])).collect();
        ReferencePath::from_xy(&xy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Record {
    ModularPlan {
        stamp: f64,
        points: Vec<[f64; 3]>,
        speeds: Vec<f64>,
    },
    E2ePlan {
        stamp: f64,
        points: Vec<[f64; 3]>,
    },
    SpeedClass {
        stamp: f64,
        sc: SpeedClass,
    },
    /// Simulator ground truth, ignored by the detectors.
    WorldTruth {
        stamp: f64,
        ego: [f64; 3],
        speed: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pedestrian: Option<[f64; 2]>,
    },
    Intervention {
        stamp: f64,
        start: f64,
        end: f64,
    },
    Event(CornerCaseEvent),
}

fn pose_row(p: Pose2D) -> [f64; 3] {
    [p.x, p.y, p.heading]
}

fn rows_to_poses(rows: &[[f64; 3]]) -> Result<Vec<Pose2D>, ModelError> {
    rows.iter().map(|r| Pose2D::new(r[0], r[1], r[2])).collect()
}

impl Record {
    pub fn modular_plan(traj: &Trajectory) -> Self {
        Record::ModularPlan {
            stamp: traj.stamp(),
            points: traj.poses().map(pose_row).collect(),
            speeds: traj
                .points()
                .iter()
                .map(|p| p.target_speed.unwrap_or(0.0))
                .collect(),
        }
    }

    pub fn e2e_plan(traj: &Trajectory) -> Self {
        Record::E2ePlan {
            stamp: traj.stamp(),
            points: traj.poses().map(pose_row).collect(),
        }
    }

    pub fn world_truth(world: &WorldState) -> Self {
        Record::WorldTruth {
            stamp: world.time,
            ego: pose_row(world.ego),
            speed: world.speed,
            pedestrian: world
                .pedestrian
                .and_then(|p| p.position_at(world.time))
                .map(|(x, y)| [x, y]),
        }
    }

    pub fn stamp(&self) -> f64 {
        match self {
            Record::ModularPlan { stamp, .. }
            | Record::E2ePlan { stamp, .. }
            | Record::SpeedClass { stamp, .. }
            | Record::WorldTruth { stamp, .. }
            | Record::Intervention { stamp, .. } => *stamp,
            Record::Event(e) => e.stamp,
        }
    }

    /// Rebuilds the plan of a `modular_plan` or `e2e_plan` record.
    pub fn trajectory(&self) -> Option<Result<Trajectory, ModelError>> {
        match self {
            Record::ModularPlan {
                stamp,
                points,
                speeds,
            } => Some(rows_to_poses(points).and_then(|p| Trajectory::modular(*stamp, &p, speeds))),
            Record::E2ePlan { stamp, points } => {
                Some(rows_to_poses(points).and_then(|p| Trajectory::end_to_end(*stamp, &p)))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub header: LogHeader,
    pub records: Vec<Record>,
}

impl RunLog {
    pub fn events(&self) -> impl Iterator<Item = &CornerCaseEvent> + '_ {
        self.records.iter().filter_map(|r| match r {
            Record::Event(e) => Some(e),
            _ => None,
        })
    }

    /// Replaces any event records with `events`, each placed after the last
    /// record not newer than it.
    pub fn set_events(&mut self, events: &[CornerCaseEvent]) {
        self.records.retain(|r| !matches!(r, Record::Event(_)));
        let mut merged = Vec::with_capacity(self.records.len() + events.len());
        let mut pending = events.iter().peekable();
        for r in self.records.drain(..) {
            while let Some(e) = pending.next_if(|e| e.stamp < r.stamp()) {
                merged.push(Record::Event(*e));
            }
            merged.push(r);
        }
        merged.extend(pending.map(|e| Record::Event(*e)));
        self.records = merged;
    }
}

fn to_line<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("log records always serialize")
}

pub fn write_log<W: Write>(log: &RunLog, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", to_line(&log.header))?;
    for r in &log.records {
        writeln!(out, "{}", to_line(r))?;
    }
    out.flush()
}

pub fn log_to_string(log: &RunLog) -> String {
    let mut buf = Vec::new();
    write_log(log, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("log is utf-8")
}

/// Parses a log, checking the header, record tags and stamp order. Blank
/// lines are skipped.
pub fn read_log<R: BufRead>(input: R) -> Result<RunLog, LogError> {
    let mut header: Option<LogHeader> = None;
    let mut records = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |e: serde_json::Error| LogError::Parse {
            line: line_no,
            message: e.to_string(),
        };
        if header.is_none() {
            let h: LogHeader = serde_json::from_str(&line).map_err(parse_err)?;
            if h.format_version != FORMAT_VERSION {
                return Err(LogError::Version(h.format_version));
            }
            header = Some(h);
            continue;
        }
        let r: Record = serde_json::from_str(&line).map_err(parse_err)?;
        let stamp = r.stamp();
        if !stamp.is_finite() {
            return Err(LogError::Parse {
                line: line_no,
                message: "non-finite stamp".into(),
            });
        }
        if stamp < prev {
            return Err(LogError::StampOrder {
                line: line_no,
                stamp,
                prev,
            });
        }
        prev = stamp;
        records.push(r);
    }
    Ok(RunLog {
        header: header.ok_or(LogError::MissingHeader)?,
        records,
    })
}

pub fn log_from_str(text: &str) -> Result<RunLog, LogError> {
    read_log(text.as_bytes())
}
