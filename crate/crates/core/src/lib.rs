//! Online corner-case detection from the disagreement between a modular
//! planner (primary system) and an end-to-end predictor (secondary system).
//!
//! - [`geometry`]: reference-path projection and matched lateral profiles
//! - [`lateral`]: max / mean / weighted lateral divergence and run detection
//! - [`longitudinal`]: hazard class worsening while target speed holds
//! - [`fusion`]: stream alignment, detection pipeline, response grading
//! - [`sim`]: deterministic scenario simulator with planner stubs
//! - [`io`]: run logs, scenario and config files, replay and calibration

// `!(a > b)` comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod fusion;
pub mod geometry;
pub mod io;
pub mod lateral;
pub mod longitudinal;
pub mod model;
pub mod sim;

pub use fusion::{align_streams, response_policy, run_detection, Pipeline};
pub use model::{
    validate_config, CornerCaseEvent, DetectorConfig, EventKind, LateralProfile, LateralScore,
    PlanSample, Pose2D, ReferencePath, ResponseAction, SpeedClass, SpeedClassSample, Trajectory,
};
