//! Domain types shared by the detectors, the fusion pipeline and the simulator.
//!
//! Everything here is an immutable value. Constructors validate and reject
//! bad input instead of clamping it. Units are SI throughout: meters,
//! seconds, m/s and radians.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("heading {0} outside (-pi, pi]")]
    HeadingOutOfRange(f64),
    #[error("trajectory needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("points {0} and {1} coincide")]
    CoincidentPoints(usize, usize),
    #[error("negative target speed {0} at point {1}")]
    NegativeSpeed(f64, usize),
    #[error("{plan:?} trajectory speed convention violated at point {index}")]
    SpeedConvention { plan: PlanSource, index: usize },
    #[error("speed class {0} outside 0..=3")]
    SpeedClassRange(i64),
    #[error("profile length mismatch: {offsets} offsets vs {arclengths} arclengths")]
    ProfileLength { offsets: usize, arclengths: usize },
    #[error("empty lateral profile")]
    EmptyProfile,
    #[error("arc-length stations not strictly increasing at index {0}")]
    StationsNotIncreasing(usize),
    #[error("reference path: {0}")]
    Reference(&'static str),
    #[error("speed reduction factor {0} not in (0, 1)")]
    ReductionFactor(f64),
    #[error("event window [{start}, {end}] does not contain stamp {stamp}")]
    EventWindow { start: f64, end: f64, stamp: f64 },
    #[error("negative event score {0}")]
    NegativeScore(f64),
}

/// Names the `DetectorConfig` field that failed validation.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid config field `{field}`: {reason}")]
pub struct ConfigError {
    pub field: &'static str,
    pub reason: String,
}

impl ConfigError {
    fn new(field: &'static str, reason: impl Into<String>) -> Self {
        Self {
            field,
            reason: reason.into(),
        }
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    if w <= -PI {
        w += 2.0 * PI;
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, heading: f64) -> Result<Self, ModelError> {
        if !(x.is_finite() && y.is_finite() && heading.is_finite()) {
            return Err(ModelError::NonFinite("pose"));
        }
        if heading <= -PI || heading > PI {
            return Err(ModelError::HeadingOutOfRange(heading));
        }
        Ok(Self { x, y, heading })
    }

    /// Like [`Pose2D::new`] but wraps the heading into range first.
    pub fn wrapped(x: f64, y: f64, heading: f64) -> Result<Self, ModelError> {
        if !heading.is_finite() {
            return Err(ModelError::NonFinite("pose heading"));
        }
        Self::new(x, y, wrap_angle(heading))
    }

    pub fn distance(&self, other: &Pose2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanSource {
    Modular,
    EndToEnd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub pose: Pose2D,
    pub target_speed: Option<f64>,
}

/// A timestamped plan. Modular plans carry a target speed on every point,
/// end-to-end plans carry none (their longitudinal intent is a speed class).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    stamp: f64,
    points: Vec<TrajectoryPoint>,
    source: PlanSource,
}

impl Trajectory {
    pub fn new(
        stamp: f64,
        points: Vec<TrajectoryPoint>,
        source: PlanSource,
    ) -> Result<Self, ModelError> {
        if !stamp.is_finite() {
            return Err(ModelError::NonFinite("trajectory stamp"));
        }
        if points.len() < 2 {
            return Err(ModelError::TooFewPoints(points.len()));
        }
        for (i, p) in points.iter().enumerate() {
            Pose2D::new(p.pose.x, p.pose.y, p.pose.heading)?;
            match (source, p.target_speed) {
                (PlanSource::Modular, Some(v)) => {
                    if !v.is_finite() {
                        return Err(ModelError::NonFinite("target speed"));
                    }
                    if v < 0.0 {
                        return Err(ModelError::NegativeSpeed(v, i));
                    }
                }
                (PlanSource::EndToEnd, None) => {}
                _ => {
                    return Err(ModelError::SpeedConvention {
                        plan: source,
                        index: i,
                    })
                }
            }
        }
        for (i, w) in points.windows(2).enumerate() {
            if !(w[0].pose.distance(&w[1].pose) > 0.0) {
                return Err(ModelError::CoincidentPoints(i, i + 1));
            }
        }
        Ok(Self {
            stamp,
            points,
            source,
        })
    }

    /// Modular plan from poses and matching target speeds.
    pub fn modular(stamp: f64, poses: &[Pose2D], speeds: &[f64]) -> Result<Self, ModelError> {
        if poses.len() != speeds.len() {
            return Err(ModelError::SpeedConvention {
                plan: PlanSource::Modular,
                index: poses.len().min(speeds.len()),
            });
        }
        let points = poses
            .iter()
            .zip(speeds)
            .map(|(&pose, &v)| TrajectoryPoint {
                pose,
                target_speed: Some(v),
            })
            .collect();
        Self::new(stamp, points, PlanSource::Modular)
    }

    /// End-to-end waypoints (no speeds).
    pub fn end_to_end(stamp: f64, poses: &[Pose2D]) -> Result<Self, ModelError> {
        let points = poses
            .iter()
            .map(|&pose| TrajectoryPoint {
                pose,
                target_speed: None,
            })
            .collect();
        Self::new(stamp, points, PlanSource::EndToEnd)
    }

    pub fn stamp(&self) -> f64 {
        self.stamp
    }

    pub fn source(&self) -> PlanSource {
        self.source
    }

    pub fn points(&self) -> &[TrajectoryPoint] {
        &self.points
    }

    pub fn poses(&self) -> impl Iterator<Item = Pose2D> + '_ {
        self.points.iter().map(|p| p.pose)
    }

    /// Target speed of the first point: what the controller executes next.
    pub fn head_speed(&self) -> Option<f64> {
        self.points[0].target_speed
    }

    pub fn arc_length(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[0].pose.distance(&w[1].pose))
            .sum()
    }
}

/// The global planner's route; the shared frame both plans are measured in.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePath {
    vertices: Vec<Pose2D>,
    cumulative: Vec<f64>,
    chunks: Vec<SegmentChunk>,
}

/// Axis-aligned bounds of a run of consecutive segments, used to prune the
/// global nearest-segment search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SegmentChunk {
    pub first: usize,
    pub end: usize,
    pub min: (f64, f64),
    pub max: (f64, f64),
}

const CHUNK_SEGMENTS: usize = 16;

impl ReferencePath {
    pub fn new(vertices: Vec<Pose2D>) -> Result<Self, ModelError> {
        if vertices.len() < 2 {
            return Err(ModelError::Reference("needs at least 2 vertices"));
        }
        let mut cumulative = Vec::with_capacity(vertices.len());
        cumulative.push(0.0);
        for w in vertices.windows(2) {
            let step = w[0].distance(&w[1]);
            if !(step > 0.0) {
                return Err(ModelError::Reference(
                    "cumulative arc length must be strictly increasing",
                ));
            }
            cumulative.push(cumulative.last().unwrap() + step);
        }
        if !cumulative.last().unwrap().is_finite() {
            return Err(ModelError::NonFinite("reference path"));
        }
        let segments = vertices.len() - 1;
        let chunks = (0..segments)
            .step_by(CHUNK_SEGMENTS)
            .map(|first| {
                let end = (first + CHUNK_SEGMENTS).min(segments);
                let mut min = (f64::INFINITY, f64::INFINITY);
                let mut max = (f64::NEG_INFINITY, f64::NEG_INFINITY);
                for v in &vertices[first..=end] {
                    min = (min.0.min(v.x), min.1.min(v.y));
                    max = (max.0.max(v.x), max.1.max(v.y));
                }
                SegmentChunk {
                    first,
                    end,
                    min,
                    max,
                }
            })
            .collect();
        Ok(Self {
            vertices,
            cumulative,
            chunks,
        })
    }

    /// Builds a reference from bare (x, y) vertices, heading taken from the
    /// outgoing segment (incoming for the last vertex).
    pub fn from_xy(xy: &[(f64, f64)]) -> Result<Self, ModelError> {
        if xy.len() < 2 {
            return Err(ModelError::Reference("needs at least 2 vertices"));
        }
        let mut vertices = Vec::with_capacity(xy.len());
        for i in 0..xy.len() {
            let (a, b) = if i + 1 < xy.len() {
                (xy[i], xy[i + 1])
            } else {
                (xy[i - 1], xy[i])
            };
            let heading = (b.1 - a.1).atan2(b.0 - a.0);
            vertices.push(Pose2D::wrapped(xy[i].0, xy[i].1, heading)?);
        }
        Self::new(vertices)
    }

    pub fn vertices(&self) -> &[Pose2D] {
        &self.vertices
    }

    pub fn cumulative_arclength(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    pub fn segment_count(&self) -> usize {
        self.vertices.len() - 1
    }

    pub(crate) fn chunks(&self) -> &[SegmentChunk] {
        &self.chunks
    }
}

/// Signed lateral offsets of one plan at matched arc-length stations.
#[derive(Debug, Clone, PartialEq)]
pub struct LateralProfile {
    offsets: Vec<f64>,
    arclengths: Vec<f64>,
    stamp: f64,
}

impl LateralProfile {
    pub fn new(offsets: Vec<f64>, arclengths: Vec<f64>, stamp: f64) -> Result<Self, ModelError> {
        if offsets.len() != arclengths.len() {
            return Err(ModelError::ProfileLength {
                offsets: offsets.len(),
                arclengths: arclengths.len(),
            });
        }
        if offsets.is_empty() {
            return Err(ModelError::EmptyProfile);
        }
        if !stamp.is_finite() || offsets.iter().chain(&arclengths).any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite("lateral profile"));
        }
        if let Some(i) = arclengths.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(ModelError::StationsNotIncreasing(i + 1));
        }
        Ok(Self {
            offsets,
            arclengths,
            stamp,
        })
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn arclengths(&self) -> &[f64] {
        &self.arclengths
    }

    pub fn stamp(&self) -> f64 {
        self.stamp
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }
}

/// Ordinal hazard class predicted by the end-to-end system.
///
/// | value | meaning                              |
/// |-------|--------------------------------------|
/// | 3     | OK, no immediate danger              |
/// | 2     | Warning, hazard in the near future   |
/// | 1     | Pedestrian in proximity              |
/// | 0     | Brake immediately                    |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub struct SpeedClass(u8);

impl SpeedClass {
    pub const BRAKE: SpeedClass = SpeedClass(0);
    pub const PEDESTRIAN: SpeedClass = SpeedClass(1);
    pub const WARNING: SpeedClass = SpeedClass(2);
    pub const OK: SpeedClass = SpeedClass(3);

    pub fn new(value: i64) -> Result<Self, ModelError> {
        match value {
            0..=3 => Ok(SpeedClass(value as u8)),
            _ => Err(ModelError::SpeedClassRange(value)),
        }
    }

    pub fn value(self) -> i64 {
        i64::from(self.0)
    }

    /// Hazard rank: 0 for OK up to 3 for Brake.
    pub fn hazard(self) -> u8 {
        3 - self.0
    }

    pub fn label(self) -> &'static str {
        match self.0 {
            0 => "brake",
            1 => "pedestrian",
            2 => "warning",
            _ => "ok",
        }
    }
}

impl TryFrom<i64> for SpeedClass {
    type Error = ModelError;
    fn try_from(v: i64) -> Result<Self, Self::Error> {
        SpeedClass::new(v)
    }
}

impl From<SpeedClass> for i64 {
    fn from(sc: SpeedClass) -> i64 {
        sc.value()
    }
}

impl fmt::Display for SpeedClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedClassSample {
    pub stamp: f64,
    pub sc: SpeedClass,
}

impl SpeedClassSample {
    pub fn new(stamp: f64, sc: SpeedClass) -> Result<Self, ModelError> {
        if !stamp.is_finite() {
            return Err(ModelError::NonFinite("speed class stamp"));
        }
        Ok(Self { stamp, sc })
    }
}

/// Modular target speed at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanSample {
    pub stamp: f64,
    pub v: f64,
}

impl PlanSample {
    pub fn new(stamp: f64, v: f64) -> Result<Self, ModelError> {
        if !(stamp.is_finite() && v.is_finite()) {
            return Err(ModelError::NonFinite("plan sample"));
        }
        if v < 0.0 {
            return Err(ModelError::NegativeSpeed(v, 0));
        }
        Ok(Self { stamp, v })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LateralScore {
    pub stamp: f64,
    pub lat_m: f64,
    pub lat_avg: f64,
    pub lat: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Lateral,
    Longitudinal,
}

/// Graded response, ordered from weakest to strongest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "level", rename_all = "snake_case")]
pub enum ResponseAction {
    None,
    SpeedReduction { factor: f64 },
    MinimalRiskManeuver,
}

impl ResponseAction {
    pub fn speed_reduction(factor: f64) -> Result<Self, ModelError> {
        if factor > 0.0 && factor < 1.0 {
            Ok(ResponseAction::SpeedReduction { factor })
        } else {
            Err(ModelError::ReductionFactor(factor))
        }
    }

    /// Fraction of the planned speed left after applying the response.
    pub fn speed_factor(&self) -> f64 {
        match *self {
            ResponseAction::None => 1.0,
            ResponseAction::SpeedReduction { factor } => factor,
            ResponseAction::MinimalRiskManeuver => 0.0,
        }
    }

    pub fn severity_cmp(&self, other: &Self) -> Ordering {
        other.speed_factor().total_cmp(&self.speed_factor())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerCaseEvent {
    pub kind: EventKind,
    pub stamp: f64,
    /// Peak smoothed Lat in meters (lateral) or |delta sc| (longitudinal).
    pub score: f64,
    pub window: (f64, f64),
    pub response: ResponseAction,
    /// Speed class after the drop, longitudinal events only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_class: Option<SpeedClass>,
}

impl CornerCaseEvent {
    pub fn new(
        kind: EventKind,
        stamp: f64,
        score: f64,
        window: (f64, f64),
        speed_class: Option<SpeedClass>,
    ) -> Result<Self, ModelError> {
        if !(stamp.is_finite() && score.is_finite() && window.0.is_finite() && window.1.is_finite())
        {
            return Err(ModelError::NonFinite("event"));
        }
        if !(window.0 <= stamp && stamp <= window.1) {
            return Err(ModelError::EventWindow {
                start: window.0,
                end: window.1,
                stamp,
            });
        }
        if score < 0.0 {
            return Err(ModelError::NegativeScore(score));
        }
        Ok(Self {
            kind,
            stamp,
            score,
            window,
            response: ResponseAction::None,
            speed_class,
        })
    }

    pub fn with_response(mut self, response: ResponseAction) -> Self {
        self.response = response;
        self
    }
}

/// Tunables for both detectors and the stream alignment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Number of compared stations per profile.
    pub n_points: usize,
    pub w_m: f64,
    pub w_avg: f64,
    /// Smoothed Lat threshold in meters. Uncalibrated default, see `calibrate`.
    pub lat_threshold: f64,
    /// Consecutive flagged samples needed for a longitudinal event.
    pub long_persistence: usize,
    pub v_deadband: f64,
    pub align_tolerance: f64,
    pub smoothing_window: f64,
    /// Compared arc length in meters.
    pub horizon: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            n_points: 20,
            w_m: 1.0,
            w_avg: 1.0,
            lat_threshold: 1.0,
            long_persistence: 1,
            v_deadband: 0.05,
            align_tolerance: 0.6,
            smoothing_window: 0.5,
            horizon: 30.0,
        }
    }
}

impl DetectorConfig {
    pub fn validate(self) -> Result<Self, ConfigError> {
        validate_config(self)
    }
}

pub fn validate_config(cfg: DetectorConfig) -> Result<DetectorConfig, ConfigError> {
    if cfg.n_points < 2 {
        return Err(ConfigError::new("n_points", "must be at least 2"));
    }
    for (field, w) in [("w_m", cfg.w_m), ("w_avg", cfg.w_avg)] {
        if !w.is_finite() || w < 0.0 {
            return Err(ConfigError::new(field, "weight must be finite and >= 0"));
        }
    }
    if cfg.w_m == 0.0 && cfg.w_avg == 0.0 {
        return Err(ConfigError::new(
            "weights",
            "w_m and w_avg cannot both be 0",
        ));
    }
    if !(cfg.lat_threshold.is_finite() && cfg.lat_threshold > 0.0) {
        return Err(ConfigError::new("lat_threshold", "must be > 0"));
    }
    if cfg.long_persistence < 1 {
        return Err(ConfigError::new("long_persistence", "must be at least 1"));
    }
    if !(cfg.v_deadband.is_finite() && cfg.v_deadband >= 0.0) {
        return Err(ConfigError::new("v_deadband", "must be >= 0"));
    }
    if !(cfg.align_tolerance.is_finite() && cfg.align_tolerance > 0.0) {
        return Err(ConfigError::new("align_tolerance", "must be > 0"));
    }
    if !(cfg.smoothing_window.is_finite() && cfg.smoothing_window > 0.0) {
        return Err(ConfigError::new("smoothing_window", "must be > 0"));
    }
    if !(cfg.horizon.is_finite() && cfg.horizon > 0.0) {
        return Err(ConfigError::new("horizon", "must be > 0"));
    }
    Ok(cfg)
}
