//! Polyline geometry: arc-length resampling, projection onto the reference
//! path, and matched lateral profiles.
//!
//! Lateral deviation is the signed Frenet offset from the shared reference
//! path, positive to the left of the path direction. Profiles of both plans
//! are sampled at the same reference stations so that "point i" means the
//! same place along the road for both of them.

use thiserror::Error;

use crate::model::{DetectorConfig, LateralProfile, ModelError, Pose2D, ReferencePath, Trajectory};

/// Slack when checking that a plan covers the requested station window.
const COVERAGE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("path too short: {available:.3} m available, {required:.3} m required")]
    PathTooShort { available: f64, required: f64 },
    #[error("projection doubles back at trajectory point {index} (s = {s:.3} after {prev:.3})")]
    NonMonotonicProjection { index: usize, s: f64, prev: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Foot of the perpendicular from a point onto the reference path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Arc length along the reference.
    pub s: f64,
    /// Signed lateral offset, positive left.
    pub d: f64,
    pub segment_index: usize,
}

pub fn cumulative_arclength(path: &[Pose2D]) -> Vec<f64> {
    let mut cum = Vec::with_capacity(path.len());
    let mut acc = 0.0;
    cum.push(acc);
    for w in path.windows(2) {
        acc += w[0].distance(&w[1]);
        cum.push(acc);
    }
    cum
}

/// Index of the segment containing station `s`. At an interior vertex the
/// outgoing segment is chosen.
fn segment_at(cum: &[f64], s: f64) -> usize {
    let last = cum.len() - 2;
    // first vertex with cum > s, minus one
    let idx = cum.partition_point(|&c| c <= s);
    idx.saturating_sub(1).min(last)
}

/// Point at arc length `s` of a polyline, linearly interpolated, with the
/// heading of the containing segment. `s` is clamped to the polyline.
fn interpolate(path: &[Pose2D], cum: &[f64], s: f64) -> Result<Pose2D, ModelError> {
    let total = *cum.last().unwrap();
    let s = s.clamp(0.0, total);
    let k = segment_at(cum, s);
    let (a, b) = (path[k], path[k + 1]);
    let len = cum[k + 1] - cum[k];
    let heading = (b.y - a.y).atan2(b.x - a.x);
    if s == cum[k] {
        return Pose2D::wrapped(a.x, a.y, heading);
    }
    if s == cum[k + 1] {
        return Pose2D::wrapped(b.x, b.y, heading);
    }
    let t = (s - cum[k]) / len;
    Pose2D::wrapped(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), heading)
}

/// Resamples the first `horizon` meters of `path` into `n` points at equal
/// arc-length spacing.
pub fn resample_uniform(
    path: &[Pose2D],
    n: usize,
    horizon: f64,
) -> Result<Vec<Pose2D>, GeometryError> {
    if n < 2 {
        return Err(GeometryError::InvalidArgument("n must be at least 2"));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(GeometryError::InvalidArgument("horizon must be > 0"));
    }
    if path.len() < 2 {
        return Err(GeometryError::PathTooShort {
            available: 0.0,
            required: horizon,
        });
    }
    let cum = cumulative_arclength(path);
    let total = *cum.last().unwrap();
    if total < horizon {
        return Err(GeometryError::PathTooShort {
            available: total,
            required: horizon,
        });
    }
    let denom = (n - 1) as f64;
    (0..n)
        .map(|i| {
            let s = horizon * (i as f64 / denom);
            interpolate(path, &cum, s).map_err(GeometryError::from)
        })
        .collect()
}

impl ReferencePath {
    /// Pose on the reference at arc length `s` (clamped to the path).
    pub fn pose_at(&self, s: f64) -> Pose2D {
        interpolate(self.vertices(), self.cumulative_arclength(), s)
            .expect("reference vertices are finite")
    }

    /// Converts Frenet coordinates to a world pose. The heading is the
    /// reference heading at `s`.
    pub fn frenet_to_pose(&self, s: f64, d: f64) -> Pose2D {
        let base = self.pose_at(s);
        let (sin, cos) = base.heading.sin_cos();
        Pose2D {
            x: base.x - d * sin,
            y: base.y + d * cos,
            heading: base.heading,
        }
    }

    /// Unit left normal of the segment containing `s`.
    pub fn left_normal_at(&self, s: f64) -> (f64, f64) {
        let (sin, cos) = self.pose_at(s).heading.sin_cos();
        (-sin, cos)
    }
}

struct Candidate {
    d2: f64,
    s: f64,
    foot: (f64, f64),
    segment: usize,
}

fn project_on_segment(rf: &ReferencePath, k: usize, p: &Pose2D) -> Candidate {
    let v = rf.vertices();
    let cum = rf.cumulative_arclength();
    let (a, b) = (v[k], v[k + 1]);
    let len = cum[k + 1] - cum[k];
    let (ux, uy) = ((b.x - a.x) / len, (b.y - a.y) / len);
    let t = (p.x - a.x) * ux + (p.y - a.y) * uy;
    let (foot, s) = if t <= 0.0 {
        ((a.x, a.y), cum[k])
    } else if t >= len {
        ((b.x, b.y), cum[k + 1])
    } else {
        ((a.x + t * ux, a.y + t * uy), cum[k] + t)
    };
    let (dx, dy) = (p.x - foot.0, p.y - foot.1);
    Candidate {
        d2: dx * dx + dy * dy,
        s,
        foot,
        segment: k,
    }
}

fn aabb_distance2(min: (f64, f64), max: (f64, f64), p: &Pose2D) -> f64 {
    let dx = (min.0 - p.x).max(0.0).max(p.x - max.0);
    let dy = (min.1 - p.y).max(0.0).max(p.y - max.1);
    dx * dx + dy * dy
}

fn tie_slack(d2: f64) -> f64 {
    1e-12 * (1.0 + d2)
}

/// Global minimum-distance projection onto the reference polyline. Among
/// (numerically) equidistant candidates the smallest arc length wins.
pub fn project_point(rf: &ReferencePath, p: &Pose2D) -> Projection {
    let chunks = rf.chunks();
    // Seed the upper bound from the chunk with the smallest lower bound.
    let seed = chunks
        .iter()
        .enumerate()
        .map(|(i, c)| (aabb_distance2(c.min, c.max, p), i))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, i)| i)
        .unwrap_or(0);
    let mut bound = f64::INFINITY;
    for k in chunks[seed].first..chunks[seed].end {
        bound = bound.min(project_on_segment(rf, k, p).d2);
    }

    let mut best: Option<Candidate> = None;
    for chunk in chunks {
        if aabb_distance2(chunk.min, chunk.max, p) > bound + tie_slack(bound) {
            continue;
        }
        for k in chunk.first..chunk.end {
            let c = project_on_segment(rf, k, p);
            let better = match &best {
                None => true,
                Some(b) => c.d2 < b.d2 - tie_slack(b.d2),
            };
            if better {
                best = Some(c);
            }
        }
    }
    let best = best.expect("reference has at least one segment");

    let v = rf.vertices();
    let (a, b) = (v[best.segment], v[best.segment + 1]);
    let (dirx, diry) = (b.x - a.x, b.y - a.y);
    let (dx, dy) = (p.x - best.foot.0, p.y - best.foot.1);
    let cross = dirx * dy - diry * dx;
    let dist = dx.hypot(dy);
    Projection {
        s: best.s,
        d: if cross < 0.0 { -dist } else { dist },
        segment_index: best.segment,
    }
}

/// Lateral profile of `traj` over `cfg.horizon` meters of reference arc
/// length, starting at the projection of the plan's first point.
pub fn lateral_profile(
    rf: &ReferencePath,
    traj: &Trajectory,
    cfg: &DetectorConfig,
) -> Result<LateralProfile, GeometryError> {
    let start = project_point(rf, &traj.points()[0].pose).s;
    lateral_profile_from(rf, traj, start, cfg)
}

/// Reference stations `start + horizon * i/(n-1)`, `i = 0..n`.
pub fn stations(start: f64, horizon: f64, n: usize) -> Vec<f64> {
    let denom = (n - 1) as f64;
    (0..n)
        .map(|i| start + horizon * (i as f64 / denom))
        .collect()
}

/// Lateral profile of `traj` at the reference stations beginning at `start`.
///
/// The plan's vertices are projected onto the reference; the offset at each
/// station is interpolated linearly in arc length between the two bracketing
/// vertex projections. Two plans evaluated with the same `start` share
/// bit-identical stations.
pub fn lateral_profile_from(
    rf: &ReferencePath,
    traj: &Trajectory,
    start: f64,
    cfg: &DetectorConfig,
) -> Result<LateralProfile, GeometryError> {
    if cfg.n_points < 2 {
        return Err(GeometryError::InvalidArgument(
            "n_points must be at least 2",
        ));
    }
    if !(cfg.horizon.is_finite() && cfg.horizon > 0.0) {
        return Err(GeometryError::InvalidArgument("horizon must be > 0"));
    }
    let stations = stations(start, cfg.horizon, cfg.n_points);
    let end = *stations.last().unwrap();
    if end > rf.length() + COVERAGE_TOLERANCE {
        return Err(GeometryError::PathTooShort {
            available: rf.length() - start,
            required: cfg.horizon,
        });
    }

    // Project vertices until the window end is covered.
    let mut proj: Vec<(f64, f64)> = Vec::with_capacity(traj.points().len());
    for (i, pose) in traj.poses().enumerate() {
        let pr = project_point(rf, &pose);
        if let Some(&(prev, _)) = proj.last() {
            if !(pr.s > prev) {
                return Err(GeometryError::NonMonotonicProjection {
                    index: i,
                    s: pr.s,
                    prev,
                });
            }
        }
        proj.push((pr.s, pr.d));
        if pr.s >= end {
            break;
        }
    }
    let first = proj[0].0;
    let last = proj.last().unwrap().0;
    if first > start + COVERAGE_TOLERANCE || last < end - COVERAGE_TOLERANCE {
        return Err(GeometryError::PathTooShort {
            available: (last - start.max(first)).max(0.0),
            required: cfg.horizon,
        });
    }

    let mut offsets = Vec::with_capacity(stations.len());
    let mut k = 0;
    for &st in &stations {
        while k + 2 < proj.len() && proj[k + 1].0 < st {
            k += 1;
        }
        let (s0, d0) = proj[k];
        let (s1, d1) = proj[(k + 1).min(proj.len() - 1)];
        let d = if s1 > s0 {
            let t = ((st - s0) / (s1 - s0)).clamp(0.0, 1.0);
            if t == 1.0 {
                d1
            } else {
                d0 + t * (d1 - d0)
            }
        } else {
            d0
        };
        offsets.push(d);
    }
    Ok(LateralProfile::new(offsets, stations, traj.stamp())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn p(x: f64, y: f64) -> Pose2D {
        Pose2D::new(x, y, 0.0).unwrap()
    }

    fn x_axis(len: f64) -> ReferencePath {
        ReferencePath::from_xy(&[(0.0, 0.0), (len, 0.0)]).unwrap()
    }

    fn e2e(poses: &[(f64, f64)]) -> Trajectory {
        let v: Vec<Pose2D> = poses.iter().map(|&(x, y)| p(x, y)).collect();
        Trajectory::end_to_end(0.0, &v).unwrap()
    }

    #[test]
    fn resample_straight_segment() {
        let out = resample_uniform(&[p(0.0, 0.0), p(10.0, 0.0)], 3, 10.0).unwrap();
        let xs: Vec<f64> = out.iter().map(|q| q.x).collect();
        assert_eq!(xs, vec![0.0, 5.0, 10.0]);
        assert!(out.iter().all(|q| q.y == 0.0 && q.heading == 0.0));
    }

    #[test]
    fn resample_two_points_gives_horizon_endpoints() {
        let out = resample_uniform(&[p(0.0, 0.0), p(10.0, 0.0)], 2, 4.0).unwrap();
        assert_eq!((out[0].x, out[1].x), (0.0, 4.0));
    }

    #[test]
    fn resample_l_shape_hits_corner() {
        // walk: stations 0,2,4,6,8; station 4 is the corner vertex
        let path = [p(0.0, 0.0), p(4.0, 0.0), p(4.0, 4.0)];
        let out = resample_uniform(&path, 5, 8.0).unwrap();
        let expected = [(0.0, 0.0), (2.0, 0.0), (4.0, 0.0), (4.0, 2.0), (4.0, 4.0)];
        for (q, e) in out.iter().zip(expected) {
            assert_eq!((q.x, q.y), e);
        }
        assert_eq!(out[3].heading, FRAC_PI_2);
    }

    #[test]
    fn resample_rejects_short_path() {
        let err = resample_uniform(&[p(0.0, 0.0), p(5.0, 0.0)], 3, 10.0).unwrap_err();
        assert!(matches!(err, GeometryError::PathTooShort { .. }));
    }

    #[test]
    fn project_axis_aligned_and_sign() {
        let rf = x_axis(10.0);
        let a = project_point(&rf, &p(3.0, 2.0));
        assert_eq!((a.s, a.d, a.segment_index), (3.0, 2.0, 0));
        let b = project_point(&rf, &p(3.0, -2.0));
        assert_eq!((b.s, b.d), (3.0, -2.0));
    }

    #[test]
    fn project_clamps_to_endpoints() {
        let rf = x_axis(10.0);
        let a = project_point(&rf, &p(-3.0, 4.0));
        assert_eq!((a.s, a.d), (0.0, 5.0));
        let b = project_point(&rf, &p(13.0, -4.0));
        assert_eq!((b.s, b.d), (10.0, -5.0));
    }

    #[test]
    fn project_equidistant_legs_picks_smaller_s() {
        let rf = ReferencePath::from_xy(&[(0.0, 0.0), (10.0, 0.0), (10.0, 10.0)]).unwrap();
        // 3 m from both legs: feet at s=7 and s=13
        let pr = project_point(&rf, &p(7.0, 3.0));
        assert_eq!(pr.s, 7.0);
        assert_eq!(pr.segment_index, 0);
        assert_eq!(pr.d, 3.0);
        // brute force over dense samples agrees on the distance
        let dense = dense_min_distance(&rf, &p(7.0, 3.0));
        assert!((dense - 3.0).abs() < 1e-3);
    }

    fn dense_min_distance(rf: &ReferencePath, q: &Pose2D) -> f64 {
        let total = rf.length();
        (0..=10_000)
            .map(|i| rf.pose_at(total * i as f64 / 10_000.0).distance(q))
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn profile_of_reference_is_zero() {
        let rf = x_axis(100.0);
        let traj = e2e(&[(0.0, 0.0), (50.0, 0.0)]);
        let cfg = DetectorConfig::default();
        let prof = lateral_profile(&rf, &traj, &cfg).unwrap();
        assert_eq!(prof.len(), cfg.n_points);
        assert!(prof.offsets().iter().all(|&d| d == 0.0));
        assert_eq!(prof.arclengths()[0], 0.0);
        assert_eq!(*prof.arclengths().last().unwrap(), cfg.horizon);
    }

    #[test]
    fn profile_of_shifted_path_is_constant() {
        let rf = x_axis(100.0);
        let traj = e2e(&[(0.0, 1.0), (20.0, 1.0), (50.0, 1.0)]);
        let prof = lateral_profile(&rf, &traj, &DetectorConfig::default()).unwrap();
        assert!(prof.offsets().iter().all(|&d| d == 1.0));
    }

    #[test]
    fn profile_traces_lane_change_bump() {
        // triangular bump peaking 2 m left at x=15 over a 30 m horizon
        let rf = x_axis(100.0);
        let pts: Vec<(f64, f64)> = (0..=40)
            .map(|i| {
                let x = i as f64;
                (x, (2.0 - (x - 15.0).abs() * 2.0 / 15.0).max(0.0))
            })
            .collect();
        let traj = e2e(&pts);
        let cfg = DetectorConfig {
            n_points: 21,
            ..Default::default()
        };
        let prof = lateral_profile(&rf, &traj, &cfg).unwrap();
        let max = prof.offsets().iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(prof.offsets()[10], 2.0);
        assert_eq!(max, 2.0);
        // dense-sampling oracle: nearest point of a 10^4-sample trajectory
        for (&s, &d) in prof.arclengths().iter().zip(prof.offsets()) {
            let oracle = dense_offset_oracle(&pts, s);
            assert!((oracle - d).abs() < 1e-2, "s={s}: {d} vs {oracle}");
        }
    }

    /// Offset of a trajectory above the x axis at station `s`, by dense
    /// sampling of the trajectory and picking the sample whose projection
    /// lies closest to `s`.
    fn dense_offset_oracle(pts: &[(f64, f64)], s: f64) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        for w in pts.windows(2) {
            for j in 0..=250 {
                let t = j as f64 / 250.0;
                let x = w[0].0 + t * (w[1].0 - w[0].0);
                let y = w[0].1 + t * (w[1].1 - w[0].1);
                if (x - s).abs() < best.0 {
                    best = ((x - s).abs(), y);
                }
            }
        }
        best.1
    }

    #[test]
    fn profile_requires_coverage() {
        let rf = x_axis(100.0);
        let traj = e2e(&[(0.0, 0.0), (10.0, 0.0)]);
        assert!(matches!(
            lateral_profile(&rf, &traj, &DetectorConfig::default()),
            Err(GeometryError::PathTooShort { .. })
        ));
        // window past the end of the reference
        let traj = e2e(&[(80.0, 0.0), (120.0, 0.0)]);
        assert!(matches!(
            lateral_profile(&rf, &traj, &DetectorConfig::default()),
            Err(GeometryError::PathTooShort { .. })
        ));
    }

    #[test]
    fn profile_reports_doubling_back() {
        let rf = x_axis(100.0);
        let traj = e2e(&[(0.0, 0.0), (10.0, 0.0), (5.0, 1.0), (40.0, 0.0)]);
        assert!(matches!(
            lateral_profile(&rf, &traj, &DetectorConfig::default()),
            Err(GeometryError::NonMonotonicProjection { index: 2, .. })
        ));
    }

    #[test]
    fn frenet_round_trip_on_straight() {
        let rf = x_axis(100.0);
        let q = rf.frenet_to_pose(12.5, -1.25);
        assert_eq!((q.x, q.y), (12.5, -1.25));
        let pr = project_point(&rf, &q);
        assert_eq!((pr.s, pr.d), (12.5, -1.25));
    }
}
