use serde::{Deserialize, Serialize};

use super::TebTrajectory;
use crate::geometry::{normalize_angle, Point2};
use crate::locomotion::Twist;
use crate::world::RoverParams;

/// Penalty weights of the band objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TebWeights {
    pub w_time: f64,
    pub w_vel: f64,
    pub w_acc: f64,
    pub w_obs: f64,
    pub w_kin: f64,
    /// Desired clearance between band poses and obstacle points, m.
    pub d_min_obs: f64,
}

impl Default for TebWeights {
    fn default() -> Self {
        Self {
            w_time: 1.0,
            w_vel: 1e5,
            w_acc: 1e5,
            w_obs: 1e4,
            w_kin: 1e6,
            d_min_obs: 0.3,
        }
    }
}

/// Partial derivatives of the objective. Entries for the pinned endpoints are
/// always zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Gradient {
    /// d/d(x, y, θ) per pose.
    pub poses: Vec<[f64; 3]>,
    pub dts: Vec<f64>,
}

impl Gradient {
    pub fn max_abs(&self) -> f64 {
        self.poses
            .iter()
            .flatten()
            .chain(&self.dts)
            .fold(0.0, |m, g| m.max(g.abs()))
    }
}

/// Arc-consistency residual of segment `i`; zero when both headings are
/// symmetric about the chord.
pub fn kinematic_residual(traj: &TebTrajectory, i: usize) -> f64 {
    let (a, b) = (traj.poses[i], traj.poses[i + 1]);
    (a.theta.cos() + b.theta.cos()) * (b.y - a.y) - (a.theta.sin() + b.theta.sin()) * (b.x - a.x)
}

/// Per-segment speed and turn rate. Speed is negative when the segment
/// points behind the start pose's heading.
pub fn segment_rates(traj: &TebTrajectory) -> Vec<Twist> {
    (0..traj.segments())
        .map(|i| {
            let (a, b) = (traj.poses[i], traj.poses[i + 1]);
            let t = traj.dts[i];
            let (dx, dy) = (b.x - a.x, b.y - a.y);
            let along = dx * a.theta.cos() + dy * a.theta.sin();
            let v = dx.hypot(dy) / t;
            Twist::new(if along < 0.0 { -v } else { v }, normalize_angle(b.theta - a.theta) / t)
        })
        .collect()
}

fn nearest(p: Point2, obstacles: &[Point2]) -> Option<(Point2, f64)> {
    obstacles
        .iter()
        .map(|o| (*o, p.distance(o)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

/// Objective value, gradient and Gauss-Newton diagonal over the flat
/// variable layout `[x0, y0, θ0, x1, ..., θn, ΔT0, ..., ΔT(n-1)]`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Evaluation {
    pub f: f64,
    pub grad: Vec<f64>,
    pub diag: Vec<f64>,
}

struct Acc {
    f: f64,
    grad: Vec<f64>,
    diag: Vec<f64>,
}

impl Acc {
    /// Adds `w·r²` given the partials of `r`. Indices may repeat.
    fn residual(&mut self, w: f64, r: f64, partials: &[(usize, f64)]) {
        self.f += w * r * r;
        let mut merged: [(usize, f64); 12] = [(usize::MAX, 0.0); 12];
        let mut used = 0;
        for &(j, d) in partials {
            match merged[..used].iter_mut().find(|(k, _)| *k == j) {
                Some(slot) => slot.1 += d,
                None => {
                    merged[used] = (j, d);
                    used += 1;
                }
            }
        }
        for &(j, d) in &merged[..used] {
            self.grad[j] += 2.0 * w * r * d;
            self.diag[j] += 2.0 * w * d * d;
        }
    }
}

pub(crate) fn evaluate(
    traj: &TebTrajectory,
    obstacles: &[Point2],
    params: &RoverParams,
    w: &TebWeights,
) -> Evaluation {
    let np = traj.poses.len();
    let nvar = 3 * np + traj.dts.len();
    let mut acc = Acc {
        f: 0.0,
        grad: vec![0.0; nvar],
        diag: vec![0.0; nvar],
    };
    let (px, py, pt) = (|i: usize| 3 * i, |i: usize| 3 * i + 1, |i: usize| 3 * i + 2);
    let dt = |i: usize| 3 * np + i;

    // speed of segment i and its partials
    let speed = |i: usize| -> (f64, [(usize, f64); 5]) {
        let (a, b) = (traj.poses[i], traj.poses[i + 1]);
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let len = dx.hypot(dy);
        let t = traj.dts[i];
        let v = len / t;
        let (ux, uy) = if len > 0.0 { (dx / (len * t), dy / (len * t)) } else { (0.0, 0.0) };
        (
            v,
            [(px(i + 1), ux), (py(i + 1), uy), (px(i), -ux), (py(i), -uy), (dt(i), -v / t)],
        )
    };

    for i in 0..traj.segments() {
        let (a, b) = (traj.poses[i], traj.poses[i + 1]);
        let t = traj.dts[i];
        acc.residual(w.w_time, t, &[(dt(i), 1.0)]);

        let (v, dv) = speed(i);
        if v > params.v_max {
            acc.residual(w.w_vel, v - params.v_max, &dv);
        }

        let omega = normalize_angle(b.theta - a.theta) / t;
        if omega.abs() > params.omega_max {
            let s = omega.signum();
            acc.residual(
                w.w_vel,
                omega.abs() - params.omega_max,
                &[(pt(i + 1), s / t), (pt(i), -s / t), (dt(i), -s * omega / t)],
            );
        }

        let (sa, ca) = a.theta.sin_cos();
        let (sb, cb) = b.theta.sin_cos();
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let r = (ca + cb) * dy - (sa + sb) * dx;
        if r != 0.0 {
            acc.residual(
                w.w_kin,
                r,
                &[
                    (pt(i), -sa * dy - ca * dx),
                    (pt(i + 1), -sb * dy - cb * dx),
                    (px(i + 1), -(sa + sb)),
                    (px(i), sa + sb),
                    (py(i + 1), ca + cb),
                    (py(i), -(ca + cb)),
                ],
            );
        }
    }

    for i in 0..traj.segments().saturating_sub(1) {
        let (v0, d0) = speed(i);
        let (v1, d1) = speed(i + 1);
        let tau = 0.5 * (traj.dts[i] + traj.dts[i + 1]);
        let a = (v1 - v0) / tau;
        if a.abs() > params.a_max {
            let s = a.signum();
            let mut partials = [(0usize, 0.0); 12];
            for (k, &(j, d)) in d1.iter().enumerate() {
                partials[k] = (j, s * d / tau);
            }
            for (k, &(j, d)) in d0.iter().enumerate() {
                partials[5 + k] = (j, -s * d / tau);
            }
            partials[10] = (dt(i), -s * a / (2.0 * tau));
            partials[11] = (dt(i + 1), -s * a / (2.0 * tau));
            acc.residual(w.w_acc, a.abs() - params.a_max, &partials);
        }
    }

    if w.w_obs > 0.0 {
        for (i, pose) in traj.poses.iter().enumerate() {
            let p = pose.position();
            let Some((o, d)) = nearest(p, obstacles) else {
                break;
            };
            if d < w.d_min_obs {
                let (ux, uy) = if d > 0.0 { ((p.x - o.x) / d, (p.y - o.y) / d) } else { (0.0, 0.0) };
                acc.residual(w.w_obs, w.d_min_obs - d, &[(px(i), -ux), (py(i), -uy)]);
            }
        }
    }

    // pinned endpoints
    let last = np - 1;
    for j in [px(0), py(0), pt(0), px(last), py(last), pt(last)] {
        acc.grad[j] = 0.0;
        acc.diag[j] = 0.0;
    }
    Evaluation {
        f: acc.f,
        grad: acc.grad,
        diag: acc.diag,
    }
}

/// Objective value and its gradient with respect to the interior poses and
/// all intervals.
pub fn objective(
    traj: &TebTrajectory,
    obstacles: &[Point2],
    params: &RoverParams,
    w: &TebWeights,
) -> (f64, Gradient) {
    let e = evaluate(traj, obstacles, params, w);
    let np = traj.poses.len();
    let g = Gradient {
        poses: (0..np).map(|i| [e.grad[3 * i], e.grad[3 * i + 1], e.grad[3 * i + 2]]).collect(),
        dts: e.grad[3 * np..].to_vec(),
    };
    (e.f, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose2D;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn straight(n: usize, spacing: f64, dt: f64) -> TebTrajectory {
        TebTrajectory::new(
            (0..=n).map(|i| Pose2D::new(i as f64 * spacing, 0.0, 0.0)).collect(),
            vec![dt; n],
        )
        .unwrap()
    }

    #[test]
    fn slack_constraints_leave_time_term() {
        let t = straight(5, 0.2, 4.0);
        let w = TebWeights::default();
        let (f, g) = objective(&t, &[], &RoverParams::default(), &w);
        assert!((f - w.w_time * 5.0 * 16.0).abs() < 1e-9);
        for gp in &g.poses {
            assert_eq!(*gp, [0.0; 3]);
        }
        assert!(g.dts.iter().all(|&d| (d - 8.0 * w.w_time).abs() < 1e-12));
    }

    #[test]
    fn tangent_headings_have_zero_residual() {
        let a = Pose2D::new(0.3, -0.2, 0.0);
        let bearing = (0.7f64).atan2(0.4);
        let t = TebTrajectory::new(
            vec![Pose2D { theta: bearing, ..a }, Pose2D::new(0.7, 0.5, bearing)],
            vec![1.0],
        )
        .unwrap();
        assert!(kinematic_residual(&t, 0).abs() < 1e-15);
        let axis = TebTrajectory::new(
            vec![Pose2D::new(0.0, 1.0, 0.0), Pose2D::new(0.4, 1.0, 0.0)],
            vec![1.0],
        )
        .unwrap();
        assert_eq!(kinematic_residual(&axis, 0), 0.0);
    }

    pub(crate) fn random_trajectory(rng: &mut ChaCha8Rng) -> (TebTrajectory, Vec<Point2>) {
        let n = rng.random_range(2..9);
        let mut poses = vec![];
        let (mut x, mut y, mut th) = (0.0, 0.0, rng.random_range(-3.0..3.0));
        for _ in 0..=n {
            poses.push(Pose2D::new(x, y, th));
            let step = rng.random_range(0.05..0.5);
            let heading: f64 = th + rng.random_range(-0.6..0.6);
            x += step * heading.cos();
            y += step * heading.sin();
            th = normalize_angle(th + rng.random_range(-0.8..0.8));
        }
        let dts = (0..n).map(|_| rng.random_range(0.3..5.0)).collect();
        let obstacles = (0..rng.random_range(0..6))
            .map(|_| Point2::new(rng.random_range(-0.5..2.5), rng.random_range(-1.5..1.5)))
            .collect();
        (TebTrajectory::new(poses, dts).unwrap(), obstacles)
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let params = RoverParams::default();
        let w = TebWeights {
            d_min_obs: 0.6,
            ..TebWeights::default()
        };
        for _ in 0..25 {
            let (t, obs) = random_trajectory(&mut rng);
            let (_, g) = objective(&t, &obs, &params, &w);
            let eps = 1e-6;
            let f_at = |t: &TebTrajectory| objective(t, &obs, &params, &w).0;
            for i in 1..t.poses.len() - 1 {
                for c in 0..3 {
                    let mut p = t.clone();
                    let mut m = t.clone();
                    let bump = |pose: &mut Pose2D, d: f64| match c {
                        0 => pose.x += d,
                        1 => pose.y += d,
                        _ => pose.theta += d,
                    };
                    bump(&mut p.poses[i], eps);
                    bump(&mut m.poses[i], -eps);
                    let fd = (f_at(&p) - f_at(&m)) / (2.0 * eps);
                    let ga = g.poses[i][c];
                    assert!((ga - fd).abs() / ga.abs().max(fd.abs()).max(1.0) < 1e-4, "pose {i}.{c}: {ga} vs {fd}");
                }
            }
            for i in 0..t.dts.len() {
                let mut p = t.clone();
                let mut m = t.clone();
                p.dts[i] += eps;
                m.dts[i] -= eps;
                let fd = (f_at(&p) - f_at(&m)) / (2.0 * eps);
                let ga = g.dts[i];
                assert!((ga - fd).abs() / ga.abs().max(fd.abs()).max(1.0) < 1e-4, "dt {i}: {ga} vs {fd}");
            }
        }
    }

    #[test]
    fn backward_segment_has_negative_speed() {
        let t = TebTrajectory::new(
            vec![Pose2D::new(0.0, 0.0, 0.0), Pose2D::new(-0.1, 0.0, 0.0)],
            vec![1.0],
        )
        .unwrap();
        let r = segment_rates(&t);
        assert!((r[0].v + 0.1).abs() < 1e-12);
    }
}
