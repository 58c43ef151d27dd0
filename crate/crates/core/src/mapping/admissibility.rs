use serde::{Deserialize, Serialize};

use super::{Cell, Costmap, COST_INSCRIBED, COST_LETHAL};
use crate::geometry::{convex_polygons_overlap, Footprint, Point2, Pose2D};

/// Outcome of checking a pose against the costmap traversability rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Admissibility {
    Admissible,
    /// The footprint overlaps a lethal cell.
    FootprintCollision,
    /// The center sits on an inscribed, lethal or unknown cell, or off the map.
    CenterViolation,
}

impl Admissibility {
    pub fn is_admissible(self) -> bool {
        self == Admissibility::Admissible
    }
}

/// Footprint must not overlap a lethal cell; center must stay below the
/// inscribed cost. A footprint collision is reported in preference to a
/// center violation when both hold.
pub fn is_pose_admissible(costmap: &Costmap, pose: &Pose2D, footprint: &Footprint) -> Admissibility {
    let g = &costmap.geometry;
    let Some(center) = g.world_to_cell(pose.position()) else {
        return Admissibility::CenterViolation;
    };
    let corners = footprint.corners(pose);
    let (mut lo, mut hi) = (corners[0], corners[0]);
    for c in &corners[1..] {
        lo = Point2::new(lo.x.min(c.x), lo.y.min(c.y));
        hi = Point2::new(hi.x.max(c.x), hi.y.max(c.y));
    }
    let (u0, v0) = g.to_lattice(lo);
    let (u1, v1) = g.to_lattice(hi);
    let x0 = u0.floor().max(0.0) as usize;
    let y0 = v0.floor().max(0.0) as usize;
    let x1 = (u1.floor() + 1.0).clamp(0.0, g.width as f64) as usize;
    let y1 = (v1.floor() + 1.0).clamp(0.0, g.height as f64) as usize;
    for y in y0..y1 {
        for x in x0..x1 {
            let cell = Cell::new(x, y);
            if costmap.cost(cell) != COST_LETHAL {
                continue;
            }
            let (clo, chi) = g.cell_bounds(cell);
            let square = [clo, Point2::new(chi.x, clo.y), chi, Point2::new(clo.x, chi.y)];
            if convex_polygons_overlap(&corners, &square) {
                return Admissibility::FootprintCollision;
            }
        }
    }
    if costmap.cost(center) >= COST_INSCRIBED {
        Admissibility::CenterViolation
    } else {
        Admissibility::Admissible
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::{GridGeometry, COST_FREE};

    fn open_map() -> Costmap {
        let g = GridGeometry::new(0.1, Point2::new(0.0, 0.0), 60, 60).unwrap();
        Costmap::from_costs(g, vec![COST_FREE; g.len()], 0.0)
    }

    #[test]
    fn open_space_admissible() {
        let c = open_map();
        let r = is_pose_admissible(&c, &Pose2D::new(3.0, 3.0, 0.7), &Footprint::default());
        assert_eq!(r, Admissibility::Admissible);
    }

    #[test]
    fn inscribed_center_is_violation() {
        let mut c = open_map();
        c.set_cost(Cell::new(30, 30), COST_INSCRIBED);
        let r = is_pose_admissible(&c, &Pose2D::new(3.05, 3.05, 0.0), &Footprint::default());
        assert_eq!(r, Admissibility::CenterViolation);
    }

    #[test]
    fn corner_over_lethal_is_collision() {
        let mut c = open_map();
        // front-left corner of a 1.0 x 0.82 footprint at (3.0, 3.0, 0) is (3.5, 3.41)
        c.set_cost(Cell::new(34, 34), COST_LETHAL);
        let fp = Footprint::default();
        assert_eq!(
            is_pose_admissible(&c, &Pose2D::new(3.0, 3.0, 0.0), &fp),
            Admissibility::FootprintCollision
        );
        // shift so the corner no longer reaches the cell
        assert_eq!(
            is_pose_admissible(&c, &Pose2D::new(2.85, 2.9, 0.0), &fp),
            Admissibility::Admissible
        );
    }

    #[test]
    fn off_map_is_center_violation() {
        let c = open_map();
        assert_eq!(
            is_pose_admissible(&c, &Pose2D::new(-1.0, 3.0, 0.0), &Footprint::default()),
            Admissibility::CenterViolation
        );
    }
}
