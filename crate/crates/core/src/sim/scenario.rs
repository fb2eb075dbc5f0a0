//! Scenario files (TOML) and the bundled scenario set.
//!
//! ```toml
//! name = "overtake_parked_vehicle"
//! duration = 16.0
//! seed = 7
//!
//! [reference]
//! start = [0.0, 0.0]
//! heading_deg = 0.0
//! segments = [{ kind = "straight", length = 220.0 }]
//!
//! [ego]
//! speed = 8.0
//!
//! [[obstacles]]
//! x = 80.0
//! y = -0.5
//! half_length = 2.3
//! half_width = 0.9
//! ```
//!
//! A reference is either a list of `segments` (straights and constant
//! radius arcs) or an explicit `vertices` polyline.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::model::{wrap_angle, ModelError, Pose2D, ReferencePath};

use super::world::{Obstacle, Pedestrian};
use super::SimConfig;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("unknown scenario `{0}` (see `scenarios list`)")]
    Unknown(String),
}

/// Scripted safety-driver takeover. With `brake` set the ego brakes at full
/// deceleration while the intervention lasts.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Intervention {
    pub start: f64,
    pub end: f64,
    #[serde(default)]
    pub brake: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgoStart {
    pub pose: Pose2D,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub reference: ReferencePath,
    pub ego: EgoStart,
    pub obstacles: Vec<Obstacle>,
    pub pedestrian: Option<Pedestrian>,
    pub intervention: Option<Intervention>,
    pub duration: f64,
    pub seed: u64,
    pub sim: SimConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    duration: f64,
    #[serde(default)]
    seed: u64,
    reference: ReferenceSpec,
    #[serde(default)]
    ego: EgoSpec,
    #[serde(default)]
    obstacles: Vec<ObstacleSpec>,
    pedestrian: Option<PedestrianSpec>,
    intervention: Option<Intervention>,
    #[serde(default)]
    sim: SimConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReferenceSpec {
    #[serde(default)]
    start: [f64; 2],
    #[serde(default)]
    heading_deg: f64,
    #[serde(default)]
    segments: Vec<Segment>,
    vertices: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum Segment {
    Straight {
        length: f64,
    },
    /// Positive `angle_deg` turns left.
    Arc {
        radius: f64,
        angle_deg: f64,
        #[serde(default = "default_arc_step")]
        step: f64,
    },
}

fn default_arc_step() -> f64 {
    1.0
}

/// Ego start in route coordinates; `speed` defaults to the cruise speed.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EgoSpec {
    #[serde(default)]
    s: f64,
    #[serde(default)]
    d: f64,
    speed: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObstacleSpec {
    x: f64,
    y: f64,
    #[serde(default)]
    heading_deg: f64,
    half_length: f64,
    half_width: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PedestrianSpec {
    x: f64,
    y: f64,
    vx: f64,
    vy: f64,
    #[serde(default)]
    spawn_time: f64,
    visibility_range: f64,
}

fn build_reference(spec: &ReferenceSpec) -> Result<ReferencePath, ScenarioError> {
    if let Some(vertices) = &spec.vertices {
        if !spec.segments.is_empty() {
            return Err(ScenarioError::Invalid(
                "reference takes either segments or vertices, not both".into(),
            ));
        }
        let xy: Vec<(f64, f64)> = vertices.iter().map(|v| (v[0], v[1])).collect();
        return Ok(ReferencePath::from_xy(&xy)?);
    }
    let (mut x, mut y) = (spec.start[0], spec.start[1]);
    let mut heading = spec.heading_deg.to_radians();
    let mut xy = vec![(x, y)];
    for seg in &spec.segments {
        match *seg {
            Segment::Straight { length } => {
                if !(length > 0.0) {
                    return Err(ScenarioError::Invalid("straight length must be > 0".into()));
                }
                x += length * heading.cos();
                y += length * heading.sin();
                xy.push((x, y));
            }
            Segment::Arc {
                radius,
                angle_deg,
                step,
            } => {
                if !(radius > 0.0 && step > 0.0 && angle_deg != 0.0) {
                    return Err(ScenarioError::Invalid(
                        "arc needs radius > 0, step > 0 and a nonzero angle".into(),
                    ));
                }
                let sweep = angle_deg.to_radians();
                let side = sweep.signum();
                let (cx, cy) = (
                    x - side * radius * heading.sin(),
                    y + side * radius * heading.cos(),
                );
                let n = ((radius * sweep.abs()) / step).ceil().max(1.0) as usize;
                let h0 = heading;
                for k in 1..=n {
                    let h = h0 + sweep * k as f64 / n as f64;
                    xy.push((cx + side * radius * h.sin(), cy - side * radius * h.cos()));
                }
                heading = h0 + sweep;
                (x, y) = *xy.last().unwrap();
            }
        }
    }
    Ok(ReferencePath::from_xy(&xy)?)
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = toml::from_str(text)?;
        if !(file.duration > 0.0 && file.duration.is_finite()) {
            return Err(ScenarioError::Invalid("duration must be > 0".into()));
        }
        let reference = build_reference(&file.reference)?;
        let speed = file.ego.speed.unwrap_or(file.sim.cruise_speed);
        if !(speed >= 0.0) {
            return Err(ScenarioError::Invalid("ego speed must be >= 0".into()));
        }
        let ego = EgoStart {
            pose: reference.frenet_to_pose(file.ego.s, file.ego.d),
            speed,
        };
        let obstacles = file
            .obstacles
            .iter()
            .map(|o| {
                if !(o.half_length > 0.0 && o.half_width > 0.0) {
                    return Err(ScenarioError::Invalid(
                        "obstacle extents must be > 0".into(),
                    ));
                }
                Ok(Obstacle {
                    center: Pose2D::new(o.x, o.y, wrap_angle(o.heading_deg.to_radians()))?,
                    half_length: o.half_length,
                    half_width: o.half_width,
                })
            })
            .collect::<Result<_, _>>()?;
        let pedestrian = file
            .pedestrian
            .map(|p| -> Result<_, ScenarioError> {
                Ok(Pedestrian {
                    pose: Pose2D::new(p.x, p.y, 0.0)?,
                    velocity: (p.vx, p.vy),
                    spawn_time: p.spawn_time,
                    visibility_range: p.visibility_range,
                })
            })
            .transpose()?;
        if let Some(iv) = &file.intervention {
            if !(iv.start <= iv.end) {
                return Err(ScenarioError::Invalid(
                    "intervention must end after it starts".into(),
                ));
            }
        }
        Ok(Self {
            name: file.name,
            reference,
            ego,
            obstacles,
            pedestrian,
            intervention: file.intervention,
            duration: file.duration,
            seed: file.seed,
            sim: file.sim,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// A bundled scenario by name.
    pub fn bundled(name: &str) -> Result<Self, ScenarioError> {
        BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| Self::from_toml_str(text))
            .unwrap_or_else(|| Err(ScenarioError::Unknown(name.to_string())))
    }

    /// Bundled scenario name, or else a path to a scenario file.
    pub fn resolve(name_or_path: &str) -> Result<Self, ScenarioError> {
        if BUNDLED.iter().any(|(n, _)| *n == name_or_path) {
            return Self::bundled(name_or_path);
        }
        let path = Path::new(name_or_path);
        if path.exists() {
            Self::load(path)
        } else {
            Err(ScenarioError::Unknown(name_or_path.to_string()))
        }
    }
}

pub const BUNDLED: &[(&str, &str)] = &[
    (
        "nominal_straight",
        include_str!("../../scenarios/nominal_straight.toml"),
    ),
    (
        "nominal_curve",
        include_str!("../../scenarios/nominal_curve.toml"),
    ),
    (
        "overtake_parked_vehicle",
        include_str!("../../scenarios/overtake_parked_vehicle.toml"),
    ),
    (
        "pedestrian_crossing",
        include_str!("../../scenarios/pedestrian_crossing.toml"),
    ),
];

pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}
