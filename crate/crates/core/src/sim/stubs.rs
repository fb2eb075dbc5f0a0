//! Deterministic stand-ins for the two driving systems.
//!
//! The modular stub evades obstacles and brakes for pedestrians it can see.
//! The end-to-end stub follows the route centerline through its target
//! points and classifies hazards, seeing pedestrians earlier than the
//! modular stub does.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::{project_point, GeometryError};
use crate::model::{Pose2D, ReferencePath, SpeedClass, SpeedClassSample, Trajectory};

use super::world::{Footprint, WorldState};
use super::{SimConfig, SimError};

/// Seeded zero-mean uniform noise on stub outputs. Draws nothing when the
/// amplitudes are zero.
#[derive(Debug, Clone)]
pub struct Jitter {
    rng: ChaCha8Rng,
    lateral: f64,
    speed: f64,
}

impl Jitter {
    pub fn new(rng: ChaCha8Rng, lateral: f64, speed: f64) -> Self {
        Self {
            rng,
            lateral,
            speed,
        }
    }

    fn draw(&mut self, amplitude: f64) -> f64 {
        if amplitude > 0.0 {
            self.rng.random_range(-amplitude..amplitude)
        } else {
            0.0
        }
    }
}

/// Points on the reference at `s_ego + k * spacing`, `k = 1..=count`.
pub fn target_points(
    reference: &ReferencePath,
    ego: &Pose2D,
    spacing: f64,
    count: usize,
) -> Result<Vec<Pose2D>, GeometryError> {
    if !(spacing > 0.0) {
        return Err(GeometryError::InvalidArgument("spacing must be > 0"));
    }
    let s0 = project_point(reference, ego).s;
    let required = spacing * count as f64;
    if s0 + required > reference.length() {
        return Err(GeometryError::PathTooShort {
            available: reference.length() - s0,
            required,
        });
    }
    Ok((1..=count)
        .map(|k| reference.pose_at(s0 + k as f64 * spacing))
        .collect())
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Lateral evasion offset at station `s` for one obstacle: smooth ramp in,
/// plateau alongside the obstacle, smooth ramp out.
fn bump(fp: &Footprint, s: f64, cfg: &SimConfig) -> f64 {
    let pass_left = fp.d_min + fp.d_max <= 0.0;
    let needed = if pass_left {
        fp.d_max + cfg.lateral_clearance + cfg.ego_half_width
    } else {
        -fp.d_min + cfg.lateral_clearance + cfg.ego_half_width
    };
    let peak = cfg.bump_peak.max(needed);
    let b = fp.s_min - cfg.bump_margin;
    let c = fp.s_max + cfg.bump_margin;
    let weight = if s < b {
        smoothstep(1.0 - (b - s) / cfg.bump_ramp)
    } else if s <= c {
        1.0
    } else {
        smoothstep(1.0 - (s - c) / cfg.bump_ramp)
    };
    if pass_left {
        peak * weight
    } else {
        -peak * weight
    }
}

fn headings_from_positions(xy: &[(f64, f64)]) -> Result<Vec<Pose2D>, SimError> {
    let n = xy.len();
    (0..n)
        .map(|i| {
            let (a, b) = if i + 1 < n {
                (xy[i], xy[i + 1])
            } else {
                (xy[i - 1], xy[i])
            };
            Pose2D::wrapped(xy[i].0, xy[i].1, (b.1 - a.1).atan2(b.0 - a.0)).map_err(SimError::from)
        })
        .collect()
}

/// Modular planner stand-in: follows the reference, swerves around
/// obstacles intruding on the corridor, and brakes for pedestrians within
/// its visibility range.
pub fn modular_planner_stub(
    world: &WorldState,
    reference: &ReferencePath,
    cfg: &SimConfig,
    jitter: &mut Jitter,
) -> Result<Trajectory, SimError> {
    let ego = project_point(reference, &world.ego);
    let (s0, d0) = (ego.s, ego.d);
    if s0 + cfg.plan_length > reference.length() {
        return Err(GeometryError::PathTooShort {
            available: reference.length() - s0,
            required: cfg.plan_length,
        }
        .into());
    }
    let footprints: Vec<Footprint> = world
        .obstacles
        .iter()
        .map(|o| Footprint::of(o, reference))
        .filter(|fp| fp.intrudes(cfg.corridor_half_width))
        .collect();
    let target = |s: f64| {
        footprints
            .iter()
            .map(|fp| bump(fp, s, cfg))
            .fold(0.0, |acc: f64, b| if b.abs() > acc.abs() { b } else { acc })
    };

    let stop_at = world
        .pedestrian_threat(reference, cfg)
        .filter(|t| {
            world
                .pedestrian
                .is_some_and(|p| t.distance <= p.visibility_range)
        })
        .map(|t| t.s - cfg.stop_margin);
    let brake_distance = cfg.cruise_speed * cfg.cruise_speed / (2.0 * cfg.comfort_decel);

    let steps = (cfg.plan_length / cfg.plan_spacing).round() as usize;
    let offset0 = d0 - target(s0);
    let mut xy = Vec::with_capacity(steps + 1);
    let mut speeds = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let s = s0 + k as f64 * cfg.plan_spacing;
        let blend = (1.0 - (s - s0) / cfg.blend_length).max(0.0);
        let d = target(s) + offset0 * blend;
        let p = if k == 0 {
            world.ego
        } else {
            reference.frenet_to_pose(s, d)
        };
        xy.push((p.x, p.y));
        let mut v = match stop_at {
            Some(stop) => {
                (cfg.cruise_speed * (stop - s) / brake_distance).clamp(0.0, cfg.cruise_speed)
            }
            None => cfg.cruise_speed,
        };
        v = (v + jitter.draw(jitter.speed)).max(0.0);
        speeds.push(v);
    }
    let poses = headings_from_positions(&xy)?;
    Ok(Trajectory::modular(world.time, &poses, &speeds)?)
}

/// Speed class from the hazard picture around the ego.
pub fn classify_hazard(
    world: &WorldState,
    reference: &ReferencePath,
    cfg: &SimConfig,
) -> SpeedClass {
    let ped = world.pedestrian_threat(reference, cfg);
    let obstacle_gap = world.nearest_obstacle_gap(reference, cfg);
    let ped_emergency = ped.is_some_and(|p| p.on_corridor && p.ahead <= cfg.emergency_range);
    if ped_emergency || obstacle_gap.is_some_and(|g| g <= cfg.emergency_range) {
        SpeedClass::BRAKE
    } else if ped.is_some_and(|p| p.ahead <= cfg.pedestrian_range) {
        SpeedClass::PEDESTRIAN
    } else if obstacle_gap.is_some_and(|g| g <= cfg.warning_range) {
        SpeedClass::WARNING
    } else {
        SpeedClass::OK
    }
}

/// End-to-end stand-in: waypoints from the ego's foot point on the route
/// through the target points (no evasion), plus a hazard class.
pub fn e2e_stub(
    world: &WorldState,
    target_points: &[Pose2D],
    reference: &ReferencePath,
    cfg: &SimConfig,
    jitter: &mut Jitter,
) -> Result<(Trajectory, SpeedClassSample), SimError> {
    let foot = reference.pose_at(project_point(reference, &world.ego).s);
    let mut xy = Vec::with_capacity(target_points.len() + 1);
    xy.push((foot.x, foot.y));
    for p in target_points {
        let n = jitter.draw(jitter.lateral);
        let (sin, cos) = p.heading.sin_cos();
        xy.push((p.x - n * sin, p.y + n * cos));
    }
    let poses = headings_from_positions(&xy)?;
    let traj = Trajectory::end_to_end(world.time, &poses)?;
    let class = SpeedClassSample::new(world.time, classify_hazard(world, reference, cfg))?;
    Ok((traj, class))
}
