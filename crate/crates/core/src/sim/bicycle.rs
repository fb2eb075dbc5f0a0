//! Kinematic bicycle model and a pure-pursuit path follower.

use std::f64::consts::FRAC_PI_2;

use crate::geometry::resample_uniform;
use crate::model::{wrap_angle, Pose2D};

/// One explicit-Euler step of the kinematic bicycle model (rear-axle
/// reference point). Speed never goes negative.
pub fn step_bicycle(
    pose: Pose2D,
    speed: f64,
    accel: f64,
    steer: f64,
    dt: f64,
    wheelbase: f64,
) -> (Pose2D, f64) {
    assert!(dt > 0.0, "dt must be positive");
    assert!(steer.abs() < FRAC_PI_2, "steering angle must be below pi/2");
    assert!(wheelbase > 0.0, "wheelbase must be positive");
    let (sin, cos) = pose.heading.sin_cos();
    let next = Pose2D {
        x: pose.x + speed * cos * dt,
        y: pose.y + speed * sin * dt,
        heading: wrap_angle(pose.heading + speed / wheelbase * steer.tan() * dt),
    };
    (next, (speed + accel * dt).max(0.0))
}

/// Steering angle that drives the rear axle through the plan point
/// `lookahead` meters ahead along `plan`. Falls back to the plan end when
/// the plan is shorter than the lookahead.
pub fn pure_pursuit(ego: &Pose2D, plan: &[Pose2D], lookahead: f64, wheelbase: f64) -> f64 {
    let target = match resample_uniform(plan, 2, lookahead) {
        Ok(pts) => pts[1],
        Err(_) => *plan.last().expect("plan is not empty"),
    };
    let (dx, dy) = (target.x - ego.x, target.y - ego.y);
    let dist = dx.hypot(dy);
    if dist < 1e-6 {
        return 0.0;
    }
    let alpha = wrap_angle(dy.atan2(dx) - ego.heading);
    (2.0 * wheelbase * alpha.sin() / dist).atan()
}
