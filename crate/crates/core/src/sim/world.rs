//! World state: ego vehicle, static obstacles and a scripted pedestrian, and
//! the Frenet-frame hazard queries both planner stubs rely on.

use serde::{Deserialize, Serialize};

use crate::geometry::project_point;
use crate::model::{Pose2D, ReferencePath};

use super::SimConfig;

/// Static rectangle, e.g. a parked vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: Pose2D,
    pub half_length: f64,
    pub half_width: f64,
}

impl Obstacle {
    pub fn corners(&self) -> [(f64, f64); 4] {
        let (sin, cos) = self.center.heading.sin_cos();
        let mut out = [(0.0, 0.0); 4];
        for (i, (a, b)) in [(1.0, 1.0), (1.0, -1.0), (-1.0, -1.0), (-1.0, 1.0)]
            .into_iter()
            .enumerate()
        {
            let (lx, ly) = (a * self.half_length, b * self.half_width);
            out[i] = (
                self.center.x + lx * cos - ly * sin,
                self.center.y + lx * sin + ly * cos,
            );
        }
        out
    }
}

/// Frenet bounding box of an obstacle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint {
    pub s_min: f64,
    pub s_max: f64,
    pub d_min: f64,
    pub d_max: f64,
}

impl Footprint {
    pub fn of(obstacle: &Obstacle, reference: &ReferencePath) -> Self {
        let mut fp = Footprint {
            s_min: f64::INFINITY,
            s_max: f64::NEG_INFINITY,
            d_min: f64::INFINITY,
            d_max: f64::NEG_INFINITY,
        };
        for (x, y) in obstacle.corners() {
            let pr = project_point(reference, &Pose2D { x, y, heading: 0.0 });
            fp.s_min = fp.s_min.min(pr.s);
            fp.s_max = fp.s_max.max(pr.s);
            fp.d_min = fp.d_min.min(pr.d);
            fp.d_max = fp.d_max.max(pr.d);
        }
        fp
    }

    pub fn intrudes(&self, half_width: f64) -> bool {
        self.d_max >= -half_width && self.d_min <= half_width
    }

    /// Along-path gap from station `s` to the obstacle, `None` once passed.
    pub fn gap_from(&self, s: f64) -> Option<f64> {
        (self.s_max >= s).then(|| (self.s_min - s).max(0.0))
    }
}

/// Pedestrian walking a straight line at constant velocity from
/// `spawn_time` on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pedestrian {
    pub pose: Pose2D,
    pub velocity: (f64, f64),
    pub spawn_time: f64,
    /// Range within which the modular stack perceives the pedestrian.
    pub visibility_range: f64,
}

impl Pedestrian {
    pub fn position_at(&self, t: f64) -> Option<(f64, f64)> {
        (t >= self.spawn_time).then(|| {
            let dt = t - self.spawn_time;
            (
                self.pose.x + self.velocity.0 * dt,
                self.pose.y + self.velocity.1 * dt,
            )
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub time: f64,
    pub ego: Pose2D,
    pub speed: f64,
    pub obstacles: Vec<Obstacle>,
    pub pedestrian: Option<Pedestrian>,
}

/// A pedestrian that is on the corridor ahead or predicted to enter it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PedestrianThreat {
    pub s: f64,
    pub d: f64,
    /// Along-path distance ahead of the ego.
    pub ahead: f64,
    /// Euclidean distance to the ego.
    pub distance: f64,
    pub on_corridor: bool,
}

impl WorldState {
    pub fn pedestrian_threat(
        &self,
        reference: &ReferencePath,
        cfg: &SimConfig,
    ) -> Option<PedestrianThreat> {
        let ped = self.pedestrian.as_ref()?;
        let (x, y) = ped.position_at(self.time)?;
        let pr = project_point(reference, &Pose2D { x, y, heading: 0.0 });
        let ego_s = project_point(reference, &self.ego).s;
        let ahead = pr.s - ego_s;
        if ahead < 0.0 {
            return None;
        }
        let hw = cfg.corridor_half_width;
        let on_corridor = pr.d.abs() <= hw;
        let (nx, ny) = reference.left_normal_at(pr.s);
        let v_lat = ped.velocity.0 * nx + ped.velocity.1 * ny;
        let entering = if pr.d > hw && v_lat < 0.0 {
            (pr.d - hw) / -v_lat <= cfg.prediction_horizon
        } else if pr.d < -hw && v_lat > 0.0 {
            (-hw - pr.d) / v_lat <= cfg.prediction_horizon
        } else {
            false
        };
        (on_corridor || entering).then(|| PedestrianThreat {
            s: pr.s,
            d: pr.d,
            ahead,
            distance: (x - self.ego.x).hypot(y - self.ego.y),
            on_corridor,
        })
    }

    /// Gap to the nearest obstacle intruding on the corridor ahead.
    pub fn nearest_obstacle_gap(&self, reference: &ReferencePath, cfg: &SimConfig) -> Option<f64> {
        let ego_s = project_point(reference, &self.ego).s;
        self.obstacles
            .iter()
            .map(|o| Footprint::of(o, reference))
            .filter(|fp| fp.intrudes(cfg.corridor_half_width))
            .filter_map(|fp| fp.gap_from(ego_s))
            .min_by(f64::total_cmp)
    }
}
