//! Deterministic desk-scale scenario simulator.
//!
//! A kinematic bicycle ego follows the modular stub's plan (10 Hz) while the
//! end-to-end stub runs alongside at 2 Hz in shadow mode. The loop is
//! fixed-step and single-threaded; every stamp is `step * dt`, so samples
//! of both stubs that fall on the same step carry bit-identical stamps.

pub mod bicycle;
pub mod scenario;
pub mod stubs;
pub mod world;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fusion::{AlignedFrame, EndToEndInput, ModularInput, Pipeline, PipelineError};
use crate::geometry::GeometryError;
use crate::io::log::{LogHeader, Record, RunLog};
use crate::model::{DetectorConfig, ModelError, ResponseAction};

pub use bicycle::{pure_pursuit, step_bicycle};
pub use scenario::{Intervention, Scenario};
pub use stubs::{classify_hazard, e2e_stub, modular_planner_stub, target_points, Jitter};
pub use world::{Obstacle, Pedestrian, WorldState};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Replay(#[from] crate::io::ReplayError),
    #[error("invalid simulation setting: {0}")]
    Config(String),
}

/// Vehicle, stub and loop parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub modular_hz: f64,
    pub e2e_hz: f64,
    pub wheelbase: f64,
    pub cruise_speed: f64,
    /// Length and point spacing of the modular plan, meters.
    pub plan_length: f64,
    pub plan_spacing: f64,
    /// Half width of the driving corridor around the route.
    pub corridor_half_width: f64,
    pub ego_half_width: f64,
    /// Minimum lateral evasion offset.
    pub bump_peak: f64,
    pub bump_ramp: f64,
    /// Longitudinal clearance kept at full offset before and after an obstacle.
    pub bump_margin: f64,
    pub lateral_clearance: f64,
    /// Distance over which the plan converges from the ego's offset.
    pub blend_length: f64,
    pub comfort_decel: f64,
    pub stop_margin: f64,
    pub prediction_horizon: f64,
    pub emergency_range: f64,
    pub pedestrian_range: f64,
    pub warning_range: f64,
    pub target_spacing: f64,
    pub target_count: usize,
    pub lookahead_min: f64,
    pub lookahead_gain: f64,
    pub speed_gain: f64,
    pub max_accel: f64,
    pub max_decel: f64,
    pub max_steer: f64,
    pub jitter_lateral: f64,
    pub jitter_speed: f64,
    /// Feed detector responses back into the ego's speed command.
    pub closed_loop: bool,
    /// How long a triggered response stays in force in closed loop.
    pub response_hold: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.05,
            modular_hz: 10.0,
            e2e_hz: 2.0,
            wheelbase: 2.8,
            cruise_speed: 8.0,
            plan_length: 40.0,
            plan_spacing: 1.0,
            corridor_half_width: 1.5,
            ego_half_width: 0.9,
            bump_peak: 2.0,
            bump_ramp: 12.0,
            bump_margin: 3.0,
            lateral_clearance: 0.5,
            blend_length: 8.0,
            comfort_decel: 3.0,
            stop_margin: 4.0,
            prediction_horizon: 3.0,
            emergency_range: 5.0,
            pedestrian_range: 15.0,
            warning_range: 20.0,
            target_spacing: 2.0,
            target_count: 20,
            lookahead_min: 5.0,
            lookahead_gain: 0.6,
            speed_gain: 1.5,
            max_accel: 2.5,
            max_decel: 6.0,
            max_steer: 0.6,
            jitter_lateral: 0.0,
            jitter_speed: 0.0,
            closed_loop: false,
            response_hold: 2.0,
        }
    }
}

impl SimConfig {
    /// Steps between two samples of a stub running at `hz`.
    fn period_steps(&self, hz: f64, what: &str) -> Result<usize, SimError> {
        let ratio = 1.0 / (hz * self.dt);
        let steps = ratio.round();
        if !(hz > 0.0) || steps < 1.0 || (ratio - steps).abs() > 1e-9 {
            return Err(SimError::Config(format!(
                "{what} rate {hz} Hz is not a whole number of {} s steps",
                self.dt
            )));
        }
        Ok(steps as usize)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0) {
            return Err(SimError::Config("dt must be > 0".into()));
        }
        self.period_steps(self.modular_hz, "modular")?;
        self.period_steps(self.e2e_hz, "end-to-end")?;
        let positive = [
            ("wheelbase", self.wheelbase),
            ("plan_length", self.plan_length),
            ("plan_spacing", self.plan_spacing),
            ("corridor_half_width", self.corridor_half_width),
            ("bump_ramp", self.bump_ramp),
            ("blend_length", self.blend_length),
            ("comfort_decel", self.comfort_decel),
            ("target_spacing", self.target_spacing),
            ("lookahead_min", self.lookahead_min),
            ("max_steer", self.max_steer),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| !(*v > 0.0)) {
            return Err(SimError::Config(format!("{name} must be > 0")));
        }
        if self.max_steer >= std::f64::consts::FRAC_PI_2 {
            return Err(SimError::Config("max_steer must be below pi/2".into()));
        }
        if self.target_count == 0 {
            return Err(SimError::Config("target_count must be >= 1".into()));
        }
        if self.cruise_speed < 0.0 || self.jitter_lateral < 0.0 || self.jitter_speed < 0.0 {
            return Err(SimError::Config(
                "cruise_speed and jitter amplitudes must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

pub const LOG_EPOCH: &str = "simulation start, t = 0 s";

/// Runs a scenario to completion and returns the recorded streams.
pub fn run_scenario(sc: &Scenario, cfg: &DetectorConfig) -> Result<RunLog, SimError> {
    let cfg = crate::model::validate_config(*cfg).map_err(|e| SimError::Config(e.to_string()))?;
    let sim = sc.sim;
    sim.validate()?;
    let reference = &sc.reference;
    let mod_every = sim.period_steps(sim.modular_hz, "modular")?;
    let e2e_every = sim.period_steps(sim.e2e_hz, "end-to-end")?;
    let steps = (sc.duration / sim.dt).round() as usize;

    let mut jitter = Jitter::new(
        ChaCha8Rng::seed_from_u64(sc.seed),
        sim.jitter_lateral,
        sim.jitter_speed,
    );
    let mut world = WorldState {
        time: 0.0,
        ego: sc.ego.pose,
        speed: sc.ego.speed,
        obstacles: sc.obstacles.clone(),
        pedestrian: sc.pedestrian,
    };
    let mut records = Vec::new();
    let mut pipeline = if sim.closed_loop {
        Some(Pipeline::new(reference, &cfg).map_err(PipelineError::from)?)
    } else {
        None
    };
    let mut last_e2e: Option<EndToEndInput> = None;
    let mut plan: Option<ModularInput> = None;
    let mut response = ResponseAction::None;
    let mut intervention_marked = false;

    for step in 0..steps {
        let t = step as f64 * sim.dt;
        world.time = t;

        if step % e2e_every == 0 {
            let tp = target_points(reference, &world.ego, sim.target_spacing, sim.target_count)?;
            let (traj, class) = e2e_stub(&world, &tp, reference, &sim, &mut jitter)?;
            records.push(Record::e2e_plan(&traj));
            records.push(Record::SpeedClass {
                stamp: class.stamp,
                sc: class.sc,
            });
            last_e2e = Some(EndToEndInput {
                trajectory: traj,
                class,
            });
        }

        if step % mod_every == 0 {
            let traj = modular_planner_stub(&world, reference, &sim, &mut jitter)?;
            records.push(Record::modular_plan(&traj));
            records.push(Record::world_truth(&world));
            let input = ModularInput::from_trajectory(traj).map_err(PipelineError::from)?;
            if let (Some(p), Some(e2e)) = (pipeline.as_mut(), last_e2e.as_ref()) {
                if let Some(frame) = AlignedFrame::pair(&input, e2e, cfg.align_tolerance) {
                    p.push(&frame)?;
                }
                response = p.active_response(t, sim.response_hold);
            }
            plan = Some(input);
        }

        if let Some(iv) = &sc.intervention {
            if !intervention_marked && t >= iv.start {
                records.push(Record::Intervention {
                    stamp: t,
                    start: iv.start,
                    end: iv.end,
                });
                intervention_marked = true;
            }
        }

        let plan = plan.as_ref().expect("modular stub runs on step 0");
        let intervening = sc
            .intervention
            .as_ref()
            .is_some_and(|iv| iv.brake && t >= iv.start && t < iv.end);
        let accel = if intervening {
            -sim.max_decel
        } else {
            let v_cmd = plan.plan.v * response.speed_factor();
            (sim.speed_gain * (v_cmd - world.speed)).clamp(-sim.max_decel, sim.max_accel)
        };
        let poses: Vec<_> = plan.trajectory.poses().collect();
        let lookahead = sim.lookahead_min.max(sim.lookahead_gain * world.speed);
        let steer = pure_pursuit(&world.ego, &poses, lookahead, sim.wheelbase)
            .clamp(-sim.max_steer, sim.max_steer);
        (world.ego, world.speed) =
            step_bicycle(world.ego, world.speed, accel, steer, sim.dt, sim.wheelbase);
    }

    Ok(RunLog {
        header: LogHeader::new(&sc.name, cfg, reference, Some(sim)),
        records,
    })
}

/// Runs a scenario and annotates the log with the events the detectors
/// raise on it in shadow mode.
pub fn simulate(sc: &Scenario, cfg: &DetectorConfig) -> Result<RunLog, SimError> {
    let mut log = run_scenario(sc, cfg)?;
    let out = crate::io::replay(&log, cfg)?;
    log.set_events(out.events());
    Ok(log)
}
