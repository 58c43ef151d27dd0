use serde::{Deserialize, Serialize};

use super::TebError;
use crate::geometry::{normalize_angle, Point2, Pose2D};
use crate::global_planner::GridPath;
use crate::world::RoverParams;

/// Lower bound on every time interval, s.
pub const DT_MIN: f64 = 1e-3;

/// Poses `s_0..s_n` and the intervals between consecutive poses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TebTrajectory {
    pub poses: Vec<Pose2D>,
    /// `dts[i]` is the time spent between `poses[i]` and `poses[i + 1]`.
    pub dts: Vec<f64>,
}

impl TebTrajectory {
    pub fn new(poses: Vec<Pose2D>, dts: Vec<f64>) -> Result<Self, TebError> {
        let t = Self { poses, dts };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), TebError> {
        if self.poses.len() < 2 || self.dts.len() + 1 != self.poses.len() {
            return Err(TebError::Malformed);
        }
        Ok(())
    }

    /// Number of segments.
    pub fn segments(&self) -> usize {
        self.dts.len()
    }

    pub fn total_time(&self) -> f64 {
        self.dts.iter().sum()
    }

    pub fn start(&self) -> Pose2D {
        self.poses[0]
    }

    pub fn goal(&self) -> Pose2D {
        self.poses[self.poses.len() - 1]
    }

    pub fn segment_length(&self, i: usize) -> f64 {
        self.poses[i].distance(&self.poses[i + 1])
    }

    /// Length of the polyline through the pose positions.
    pub fn path_length(&self) -> f64 {
        (0..self.segments()).map(|i| self.segment_length(i)).sum()
    }

    /// The first `count` poses (at least two) with their intervals.
    pub fn prefix(&self, count: usize) -> TebTrajectory {
        let k = count.clamp(2, self.poses.len());
        TebTrajectory {
            poses: self.poses[..k].to_vec(),
            dts: self.dts[..k - 1].to_vec(),
        }
    }

    /// Splits segments longer than `max_len` and merges away interior poses
    /// next to segments shorter than `min_len`. Endpoints are untouched.
    pub fn resize(&mut self, min_len: f64, max_len: f64) {
        let mut i = 0;
        while i < self.segments() {
            if self.segment_length(i) > max_len && self.poses.len() < 1000 {
                let (a, b) = (self.poses[i], self.poses[i + 1]);
                let mid = Pose2D::new(
                    0.5 * (a.x + b.x),
                    0.5 * (a.y + b.y),
                    normalize_angle(a.theta + 0.5 * normalize_angle(b.theta - a.theta)),
                );
                let half = (0.5 * self.dts[i]).max(DT_MIN);
                self.poses.insert(i + 1, mid);
                self.dts[i] = half;
                self.dts.insert(i + 1, half);
            } else {
                i += 1;
            }
        }
        let mut k = 1;
        while k + 1 < self.poses.len() {
            let short = self.segment_length(k - 1) < min_len || self.segment_length(k) < min_len;
            let (prev, here, next) = (self.poses[k - 1], self.poses[k], self.poses[k + 1]);
            let merged_len = prev.distance(&next);
            let turn = normalize_angle(here.theta - prev.theta) + normalize_angle(next.theta - here.theta);
            if short && merged_len <= max_len && turn.abs() < std::f64::consts::PI {
                self.poses.remove(k);
                let dt = self.dts.remove(k);
                self.dts[k - 1] += dt;
            } else {
                k += 1;
            }
        }
    }
}

fn seed_interval(a: &Pose2D, b: &Pose2D, params: &RoverParams) -> f64 {
    let by_dist = a.distance(b) / (0.5 * params.v_max);
    let by_turn = normalize_angle(b.theta - a.theta).abs() / (0.5 * params.omega_max);
    by_dist.max(by_turn).max(DT_MIN)
}

/// Resamples a global path into an evenly spaced band.
///
/// Interior headings follow the local path tangent; a sample landing exactly
/// on a polyline vertex takes the mean of the two adjoining tangents. Seed
/// intervals assume half the speed limits (a pure rotation uses half the
/// turn-rate limit).
pub fn init_trajectory(
    path: &GridPath,
    spacing: f64,
    params: &RoverParams,
) -> Result<TebTrajectory, TebError> {
    let (Some(start), Some(goal)) = (path.world_poses.first(), path.world_poses.last()) else {
        return Err(TebError::EmptyPath);
    };
    let pts: Vec<Point2> = path.world_poses.iter().map(Pose2D::position).collect();
    let mut cum = vec![0.0];
    for w in pts.windows(2) {
        cum.push(cum.last().unwrap() + w[0].distance(&w[1]));
    }
    let total = *cum.last().unwrap();
    let mut poses = vec![*start];
    if total > 1e-9 && spacing > 0.0 {
        let n = ((total / spacing).round() as usize).max(1);
        let tangent = |j: usize| (pts[j + 1].y - pts[j].y).atan2(pts[j + 1].x - pts[j].x);
        let mut j = 0;
        for k in 1..n {
            let s = total * k as f64 / n as f64;
            while j + 1 < pts.len() - 1 && cum[j + 1] < s {
                j += 1;
            }
            let seg = cum[j + 1] - cum[j];
            let u = if seg > 0.0 { (s - cum[j]) / seg } else { 0.0 };
            let p = Point2::new(
                pts[j].x + u * (pts[j + 1].x - pts[j].x),
                pts[j].y + u * (pts[j + 1].y - pts[j].y),
            );
            let mut theta = tangent(j);
            if (cum[j + 1] - s).abs() < 1e-9 {
                // sample sits on a vertex: blend with the next non-degenerate segment
                if let Some(next) = (j + 1..pts.len() - 1).find(|&q| cum[q + 1] - cum[q] > 1e-12) {
                    theta = normalize_angle(theta + 0.5 * normalize_angle(tangent(next) - theta));
                }
            }
            poses.push(Pose2D::new(p.x, p.y, theta));
        }
    }
    poses.push(*goal);
    let dts = poses
        .windows(2)
        .map(|w| seed_interval(&w[0], &w[1], params))
        .collect();
    Ok(TebTrajectory { poses, dts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::global_planner::PathCost;
    use std::f64::consts::FRAC_PI_2;

    fn path(world_poses: Vec<Pose2D>) -> GridPath {
        GridPath {
            cells: vec![],
            goal: *world_poses.last().unwrap(),
            world_poses,
            total_cost: 0.0,
            exact_cost: PathCost::ZERO,
            map_stamp: 0.0,
        }
    }

    #[test]
    fn straight_meter() {
        let p = path(vec![Pose2D::new(0.0, 0.0, 0.0), Pose2D::new(1.0, 0.0, 0.0)]);
        let t = init_trajectory(&p, 0.2, &RoverParams::default()).unwrap();
        assert_eq!(t.poses.len(), 6);
        assert_eq!(t.dts.len(), 5);
        for dt in &t.dts {
            assert!((dt - 4.0).abs() < 1e-9, "{dt}");
        }
    }

    #[test]
    fn rotation_in_place() {
        let p = path(vec![Pose2D::new(2.0, 2.0, 0.0), Pose2D::new(2.0, 2.0, 3.0)]);
        let t = init_trajectory(&p, 0.2, &RoverParams::default()).unwrap();
        assert_eq!(t.poses.len(), 2);
        assert!((t.dts[0] - 3.0 / 0.15).abs() < 1e-9);
    }

    #[test]
    fn empty_path_is_error() {
        let p = GridPath {
            cells: vec![],
            world_poses: vec![],
            total_cost: 0.0,
            exact_cost: PathCost::ZERO,
            goal: Pose2D::default(),
            map_stamp: 0.0,
        };
        assert_eq!(init_trajectory(&p, 0.2, &RoverParams::default()), Err(TebError::EmptyPath));
    }

    #[test]
    fn l_shape_against_resampling_oracle() {
        // 0.8 m east then 0.6 m north; samples every 0.2 m hit the corner exactly
        let p = path(vec![
            Pose2D::new(0.0, 0.0, 0.0),
            Pose2D::new(0.8, 0.0, 0.0),
            Pose2D::new(0.8, 0.6, FRAC_PI_2),
        ]);
        let t = init_trajectory(&p, 0.2, &RoverParams::default()).unwrap();
        // oracle: walk the polyline by arc length
        let oracle = |s: f64| -> (f64, f64, f64) {
            if s < 0.8 - 1e-12 {
                (s, 0.0, 0.0)
            } else if s <= 0.8 + 1e-12 {
                (0.8, 0.0, FRAC_PI_2 / 2.0)
            } else {
                (0.8, s - 0.8, FRAC_PI_2)
            }
        };
        assert_eq!(t.poses.len(), 8);
        for (k, pose) in t.poses.iter().enumerate().take(7).skip(1) {
            let (x, y, th) = oracle(0.2 * k as f64);
            assert!((pose.x - x).abs() < 1e-9 && (pose.y - y).abs() < 1e-9, "{k}: {pose:?}");
            assert!((pose.theta - th).abs() < 1e-9, "{k}: {pose:?}");
        }
        assert_eq!(t.goal(), Pose2D::new(0.8, 0.6, FRAC_PI_2));
    }

    #[test]
    fn resize_keeps_lengths_in_band() {
        let mut t = TebTrajectory::new(
            vec![
                Pose2D::new(0.0, 0.0, 0.0),
                Pose2D::new(0.05, 0.0, 0.0),
                Pose2D::new(1.5, 0.0, 0.0),
                Pose2D::new(1.6, 0.0, 0.0),
            ],
            vec![1.0, 10.0, 1.0],
        )
        .unwrap();
        let before = t.total_time();
        t.resize(0.1, 0.4);
        assert!((t.total_time() - before).abs() < 1e-9);
        for i in 0..t.segments() {
            let l = t.segment_length(i);
            assert!(l <= 0.4 + 1e-12, "{i}: {l}");
        }
        assert_eq!(t.start(), Pose2D::new(0.0, 0.0, 0.0));
        assert_eq!(t.goal(), Pose2D::new(1.6, 0.0, 0.0));
    }
}
