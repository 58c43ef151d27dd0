//! Planar poses, angle wrapping and the rectangular rover footprint.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

/// Wraps an angle into `(-π, π]`.
pub fn normalize_angle(theta: f64) -> f64 {
    if theta > -PI && theta <= PI {
        return theta;
    }
    let mut a = theta.rem_euclid(TAU);
    if a > PI {
        a -= TAU;
    }
    // rem_euclid can land on exactly -π after the subtraction above
    if a <= -PI {
        a += TAU;
    }
    a
}

/// A point in the world frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Position and heading of the rover in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    /// Heading in radians, counterclockwise from +x.
    pub theta: f64,
}

impl Pose2D {
    pub const fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn distance(&self, other: &Pose2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Smallest signed rotation taking this heading onto `other`'s.
    pub fn heading_error(&self, other: &Pose2D) -> f64 {
        normalize_angle(other.theta - self.theta)
    }

    /// Transforms a point given in the rover body frame into the world frame.
    pub fn transform(&self, local: Point2) -> Point2 {
        let (s, c) = self.theta.sin_cos();
        Point2::new(
            self.x + c * local.x - s * local.y,
            self.y + s * local.x + c * local.y,
        )
    }
}

/// Rectangular rover outline centered on the rover reference point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    /// Extent along the heading, meters.
    pub length: f64,
    /// Lateral extent, meters.
    pub width: f64,
}

impl Footprint {
    pub const fn new(length: f64, width: f64) -> Self {
        Self { length, width }
    }

    /// Radius of the largest circle inside the footprint.
    pub fn inscribed_radius(&self) -> f64 {
        0.5 * self.length.min(self.width)
    }

    /// Radius of the smallest circle containing the footprint.
    pub fn circumscribed_radius(&self) -> f64 {
        0.5 * self.length.hypot(self.width)
    }

    /// Corners in world coordinates, counterclockwise starting front-left.
    pub fn corners(&self, pose: &Pose2D) -> [Point2; 4] {
        let hl = 0.5 * self.length;
        let hw = 0.5 * self.width;
        [
            pose.transform(Point2::new(hl, hw)),
            pose.transform(Point2::new(-hl, hw)),
            pose.transform(Point2::new(-hl, -hw)),
            pose.transform(Point2::new(hl, -hw)),
        ]
    }
}

impl Default for Footprint {
    /// 1.0 m long, 0.82 m wide.
    fn default() -> Self {
        Self::new(1.0, 0.82)
    }
}

/// Separating-axis overlap test for two convex polygons given as vertex loops.
///
/// Touching edges count as overlap.
pub fn convex_polygons_overlap(a: &[Point2], b: &[Point2]) -> bool {
    fn separated_along_edges_of(p: &[Point2], q: &[Point2]) -> bool {
        for i in 0..p.len() {
            let p0 = p[i];
            let p1 = p[(i + 1) % p.len()];
            let axis = (-(p1.y - p0.y), p1.x - p0.x);
            let project = |pts: &[Point2]| {
                pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    let d = v.x * axis.0 + v.y * axis.1;
                    (lo.min(d), hi.max(d))
                })
            };
            let (amin, amax) = project(p);
            let (bmin, bmax) = project(q);
            if amax < bmin || bmax < amin {
                return true;
            }
        }
        false
    }
    !(separated_along_edges_of(a, b) || separated_along_edges_of(b, a))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_range() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert!((normalize_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(-0.5 * PI - TAU) + 0.5 * PI).abs() < 1e-12);
        assert_eq!(normalize_angle(0.25), 0.25);
        for k in -50..50 {
            let a = normalize_angle(k as f64 * 0.37);
            assert!(a > -PI && a <= PI, "{a}");
        }
    }

    #[test]
    fn footprint_radii() {
        let fp = Footprint::default();
        assert!((fp.inscribed_radius() - 0.41).abs() < 1e-12);
        assert!(fp.circumscribed_radius() > 0.64);
    }

    #[test]
    fn rotated_square_overlap() {
        let sq = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        let fp = Footprint::new(1.0, 1.0);
        // diamond edge x + y = 2.79 stays clear of the corner at (1, 1)
        let far = fp.corners(&Pose2D::new(1.75, 1.75, PI / 4.0));
        assert!(!convex_polygons_overlap(&sq, &far));
        let near = fp.corners(&Pose2D::new(1.3, 1.3, PI / 4.0));
        assert!(convex_polygons_overlap(&sq, &near));
    }
}
