//! Property checks shared by the `properties` and `acceptance` targets.
//! Each returns `Err` with the minimal failing input on failure.

#![allow(dead_code)]

use std::f64::consts::PI;

use proptest::collection::vec;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use cornercase::fusion::{align_streams, EndToEndInput, ModularInput};
use cornercase::geometry::{lateral_profile, project_point};
use cornercase::lateral::{lat_avg, lat_max, lat_score};
use cornercase::longitudinal::LongitudinalDetector;
use cornercase::model::{
    DetectorConfig, LateralProfile, PlanSample, Pose2D, ReferencePath, SpeedClass,
    SpeedClassSample, Trajectory,
};
use cornercase::sim::step_bicycle;

pub const CASES: u32 = 256;

fn runner() -> TestRunner {
    TestRunner::new(Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    })
}

fn run<S: Strategy>(
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    runner().run(&strategy, test).map_err(|e| e.to_string())
}

pub fn profile(offsets: Vec<f64>) -> LateralProfile {
    let stations = (0..offsets.len()).map(|i| i as f64).collect();
    LateralProfile::new(offsets, stations, 0.0).unwrap()
}

fn offsets(n: usize) -> impl Strategy<Value = Vec<f64>> {
    vec(-5.0..5.0f64, n)
}

fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..40).prop_flat_map(|n| (offsets(n), offsets(n)))
}

fn triple() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (2usize..40).prop_flat_map(|n| (offsets(n), offsets(n), offsets(n)))
}

fn weights() -> impl Strategy<Value = (f64, f64)> {
    (0.0..3.0f64, 0.0..3.0f64).prop_filter("not both zero", |(a, b)| a + b > 1e-3)
}

pub fn nonnegativity() -> Result<(), String> {
    run((pair(), weights()), |((a, b), (w_m, w_avg))| {
        let cfg = DetectorConfig {
            w_m,
            w_avg,
            ..Default::default()
        };
        let s = lat_score(&profile(a), &profile(b), &cfg).unwrap();
        prop_assert!(s.lat_m >= 0.0 && s.lat_avg >= 0.0 && s.lat >= 0.0);
        Ok(())
    })
}

pub fn symmetry() -> Result<(), String> {
    run(pair(), |(a, b)| {
        let (pa, pb) = (profile(a), profile(b));
        prop_assert_eq!(lat_max(&pa, &pb).unwrap(), lat_max(&pb, &pa).unwrap());
        prop_assert_eq!(lat_avg(&pa, &pb).unwrap(), lat_avg(&pb, &pa).unwrap());
        Ok(())
    })
}

pub fn avg_below_max() -> Result<(), String> {
    run(pair(), |(a, b)| {
        let s = lat_score(&profile(a), &profile(b), &DetectorConfig::default()).unwrap();
        prop_assert!(s.lat_avg <= s.lat_m, "{} > {}", s.lat_avg, s.lat_m);
        Ok(())
    })
}

pub fn triangle_inequality() -> Result<(), String> {
    run(triple(), |(a, b, c)| {
        let (pa, pb, pc) = (profile(a), profile(b), profile(c));
        let tol = 1e-12;
        prop_assert!(
            lat_max(&pa, &pc).unwrap()
                <= lat_max(&pa, &pb).unwrap() + lat_max(&pb, &pc).unwrap() + tol
        );
        prop_assert!(
            lat_avg(&pa, &pc).unwrap()
                <= lat_avg(&pa, &pb).unwrap() + lat_avg(&pb, &pc).unwrap() + tol
        );
        Ok(())
    })
}

pub fn weight_homogeneity() -> Result<(), String> {
    run(
        (pair(), weights(), 0.01..100.0f64),
        |((a, b), (w_m, w_avg), k)| {
            let (pa, pb) = (profile(a), profile(b));
            let base = DetectorConfig {
                w_m,
                w_avg,
                ..Default::default()
            };
            let scaled = DetectorConfig {
                w_m: k * w_m,
                w_avg: k * w_avg,
                ..base
            };
            let l1 = lat_score(&pa, &pb, &base).unwrap().lat;
            let lk = lat_score(&pa, &pb, &scaled).unwrap().lat;
            prop_assert!((lk - k * l1).abs() <= 1e-12 * (k * l1).abs().max(1e-300) + 1e-300);
            Ok(())
        },
    )
}

/// Gently curving reference: a 1 m polyline along a circle arc of the given
/// curvature, or a straight line at zero curvature.
fn curved_reference(curvature: f64) -> Vec<(f64, f64)> {
    (0..=120)
        .map(|i| {
            let s = i as f64;
            if curvature.abs() < 1e-9 {
                (s, 0.0)
            } else {
                let r = 1.0 / curvature;
                (r * (s * curvature).sin(), r - r * (s * curvature).cos())
            }
        })
        .collect()
}

/// Plan following the reference at smooth offsets from station `s0`.
fn offset_plan(reference: &ReferencePath, s0: f64, amp: f64, freq: f64) -> Vec<(f64, f64)> {
    (0..=45)
        .map(|k| {
            let s = s0 + k as f64;
            let p = reference.frenet_to_pose(s, amp * (freq * s).sin());
            (p.x, p.y)
        })
        .collect()
}

fn poses_from_xy(xy: &[(f64, f64)]) -> Vec<Pose2D> {
    let n = xy.len();
    (0..n)
        .map(|i| {
            let (a, b) = if i + 1 < n {
                (xy[i], xy[i + 1])
            } else {
                (xy[i - 1], xy[i])
            };
            Pose2D::wrapped(xy[i].0, xy[i].1, (b.1 - a.1).atan2(b.0 - a.0)).unwrap()
        })
        .collect()
}

fn transform(xy: &[(f64, f64)], theta: f64, tx: f64, ty: f64) -> Vec<(f64, f64)> {
    let (sin, cos) = theta.sin_cos();
    xy.iter()
        .map(|&(x, y)| (cos * x - sin * y + tx, sin * x + cos * y + ty))
        .collect()
}

pub fn rigid_motion_equivariance() -> Result<(), String> {
    let strategy = (
        -0.015..0.015f64,
        5.0..40.0f64,
        0.0..2.0f64,
        0.05..0.4f64,
        -PI..PI,
        -500.0..500.0f64,
        -500.0..500.0f64,
    );
    run(strategy, |(curv, s0, amp, freq, theta, tx, ty)| {
        let cfg = DetectorConfig::default();
        let ref_xy = curved_reference(curv);
        let reference = ReferencePath::from_xy(&ref_xy).unwrap();
        let plan_xy = offset_plan(&reference, s0, amp, freq);

        let plan = Trajectory::end_to_end(0.0, &poses_from_xy(&plan_xy)).unwrap();
        let moved_ref = ReferencePath::from_xy(&transform(&ref_xy, theta, tx, ty)).unwrap();
        let moved_plan =
            Trajectory::end_to_end(0.0, &poses_from_xy(&transform(&plan_xy, theta, tx, ty)))
                .unwrap();

        let a = lateral_profile(&reference, &plan, &cfg).unwrap();
        let b = lateral_profile(&moved_ref, &moved_plan, &cfg).unwrap();
        for (x, y) in a.offsets().iter().zip(b.offsets()) {
            prop_assert!((x - y).abs() <= 1e-9, "{} vs {}", x, y);
        }
        Ok(())
    })
}

fn polyline() -> impl Strategy<Value = Vec<(f64, f64)>> {
    vec((-50.0..50.0f64, -50.0..50.0f64), 2..8).prop_filter("distinct consecutive vertices", |v| {
        v.windows(2)
            .all(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1) > 1e-3)
    })
}

pub fn projection_optimality() -> Result<(), String> {
    run(
        (polyline(), -80.0..80.0f64, -80.0..80.0f64),
        |(xy, px, py)| {
            let reference = ReferencePath::from_xy(&xy).unwrap();
            let p = Pose2D::new(px, py, 0.0).unwrap();
            let pr = project_point(&reference, &p);
            let foot = reference.pose_at(pr.s);
            let dist = (foot.x - px).hypot(foot.y - py);
            prop_assert!((dist - pr.d.abs()).abs() <= 1e-9);

            // dense sampling oracle: 10^4 points spread along the polyline
            let total: f64 = xy
                .windows(2)
                .map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1))
                .sum();
            let samples = 10_000;
            let mut dense_min = f64::INFINITY;
            for w in xy.windows(2) {
                let len = (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1);
                let k = ((len / total) * samples as f64).ceil() as usize + 1;
                for j in 0..=k {
                    let t = j as f64 / k as f64;
                    let (x, y) = (
                        w[0].0 + t * (w[1].0 - w[0].0),
                        w[0].1 + t * (w[1].1 - w[0].1),
                    );
                    dense_min = dense_min.min((x - px).hypot(y - py));
                }
            }
            prop_assert!(
                pr.d.abs() <= dense_min + 1e-9,
                "{} > dense {}",
                pr.d.abs(),
                dense_min
            );
            Ok(())
        },
    )
}

pub fn bicycle_circle() -> Result<(), String> {
    run(
        (0.05..0.5f64, 1.0..10.0f64, 1.5..4.0f64),
        |(steer, v, wheelbase)| {
            let radius = wheelbase / steer.tan();
            // step length R/1000 keeps explicit Euler drift near 0.3% per lap
            let dt = radius / (1000.0 * v);
            let steps = (2.0 * PI * radius / (v * dt)).ceil() as usize;
            let mut pose = Pose2D::new(0.0, 0.0, 0.0).unwrap();
            let mut speed = v;
            let mut worst: f64 = 0.0;
            for _ in 0..steps {
                (pose, speed) = step_bicycle(pose, speed, 0.0, steer, dt, wheelbase);
                let r = pose.x.hypot(pose.y - radius);
                worst = worst.max((r - radius).abs() / radius);
            }
            prop_assert!(worst <= 0.01, "radial error {}", worst);
            Ok(())
        },
    )
}

fn straight(stamp: f64, v: Option<f64>) -> Trajectory {
    let poses: Vec<Pose2D> = (0..=40)
        .map(|i| Pose2D::new(i as f64, 0.0, 0.0).unwrap())
        .collect();
    match v {
        Some(v) => Trajectory::modular(stamp, &poses, &vec![v; poses.len()]).unwrap(),
        None => Trajectory::end_to_end(stamp, &poses).unwrap(),
    }
}

fn increasing(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    vec(1u32..20, 1..max_len).prop_map(|gaps| {
        let mut t = 0u32;
        gaps.into_iter()
            .map(|g| {
                t += g;
                t as f64 * 0.05
            })
            .collect()
    })
}

pub fn alignment_causality() -> Result<(), String> {
    run(
        (increasing(60), increasing(20), 0.05..1.5f64),
        |(ms, es, tol)| {
            let cfg = DetectorConfig {
                align_tolerance: tol,
                ..Default::default()
            };
            let modular: Vec<ModularInput> = ms
                .iter()
                .map(|&t| ModularInput::from_trajectory(straight(t, Some(5.0))).unwrap())
                .collect();
            let e2e: Vec<EndToEndInput> = es
                .iter()
                .map(|&t| EndToEndInput {
                    trajectory: straight(t, None),
                    class: SpeedClassSample::new(t, SpeedClass::OK).unwrap(),
                })
                .collect();
            let a = align_streams(&modular, &e2e, &cfg).unwrap();
            prop_assert_eq!(a.frames.len() + a.dropped, ms.len());
            for f in &a.frames {
                prop_assert!(f.e2e.stamp() <= f.stamp);
                prop_assert!(f.stamp - f.e2e.stamp() <= tol);
                // partner is the latest end-to-end sample not newer than the frame
                prop_assert!(!es.iter().any(|&t| t > f.e2e.stamp() && t <= f.stamp));
            }

            // samples from the future never change past frames
            let last = ms
                .last()
                .copied()
                .unwrap_or(0.0)
                .max(es.last().copied().unwrap_or(0.0));
            let mut extended = e2e.clone();
            for k in 1..4 {
                let t = last + k as f64;
                extended.push(EndToEndInput {
                    trajectory: straight(t, None),
                    class: SpeedClassSample::new(t, SpeedClass::BRAKE).unwrap(),
                });
            }
            let b = align_streams(&modular, &extended, &cfg).unwrap();
            prop_assert_eq!(a.frames.len(), b.frames.len());
            for (x, y) in a.frames.iter().zip(&b.frames) {
                prop_assert_eq!(x.stamp, y.stamp);
                prop_assert_eq!(x.e2e.stamp(), y.e2e.stamp());
            }
            Ok(())
        },
    )
}

fn flags(classes: &[i64], speeds: &[f64]) -> Vec<bool> {
    let cfg = DetectorConfig::default();
    let mut det = LongitudinalDetector::new(&cfg).unwrap();
    classes
        .iter()
        .zip(speeds)
        .enumerate()
        .map(|(k, (&c, &v))| {
            let t = k as f64 * 0.1;
            let sc = SpeedClassSample::new(t, SpeedClass::new(c).unwrap()).unwrap();
            let plan = PlanSample::new(t, v).unwrap();
            det.step(&sc, &plan).unwrap().sample.long_flag
        })
        .collect()
}

/// Strictly increasing map of ranks `0..k` into the class range.
fn relabeling() -> impl Strategy<Value = Vec<i64>> {
    proptest::sample::subsequence(vec![0i64, 1, 2, 3], 2..=4)
}

pub fn long_flag_relabeling_invariance() -> Result<(), String> {
    let strategy = (relabeling(), relabeling()).prop_flat_map(|(f, g)| {
        let k = f.len().min(g.len());
        (
            Just(f),
            Just(g),
            vec(0..k, 2..40).prop_flat_map(|ranks| {
                let n = ranks.len();
                (Just(ranks), vec(0.0..10.0f64, n))
            }),
        )
    });
    run(strategy, |(f, g, (ranks, speeds))| {
        let a: Vec<i64> = ranks.iter().map(|&r| f[r]).collect();
        let b: Vec<i64> = ranks.iter().map(|&r| g[r]).collect();
        prop_assert_eq!(flags(&a, &speeds), flags(&b, &speeds));
        Ok(())
    })
}

pub type Check = fn() -> Result<(), String>;

pub const PROPERTIES: &[(&str, Check)] = &[
    ("nonnegativity", nonnegativity),
    ("symmetry", symmetry),
    ("lat_avg <= lat_max", avg_below_max),
    ("triangle inequality", triangle_inequality),
    ("weight homogeneity", weight_homogeneity),
    (
        "rigid-motion equivariance of lateral_profile",
        rigid_motion_equivariance,
    ),
    (
        "projection optimality vs dense sampling",
        projection_optimality,
    ),
    ("bicycle constant-steer circle", bicycle_circle),
    ("alignment causality", alignment_causality),
    (
        "long_flag relabeling invariance",
        long_flag_relabeling_invariance,
    ),
];
