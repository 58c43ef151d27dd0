//! Dijkstra minimum-cost paths over the costmap lattice.
//!
//! The lattice is 8-connected. Moving between neighbouring cells `a` and `b`
//! costs `step · (1 + (cost(a) + cost(b)) / 128)`, where `step` is 1 for
//! orthogonal moves and √2 for diagonal ones. Cells at or above the inscribed
//! cost (including unknown) are never entered, and a diagonal move is refused
//! when both orthogonal cells it squeezes between are blocked.
//!
//! Path costs are accumulated exactly as `(A + √2·B) / 128` with integer `A`
//! and `B`, so optimality and tie-breaking do not depend on floating-point
//! summation order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point2, Pose2D};
use crate::mapping::{Cell, Costmap, COST_INSCRIBED};

/// Exact path length `(straight + √2·diagonal) / 128`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct PathCost {
    pub straight: u64,
    pub diagonal: u64,
}

impl PathCost {
    pub const ZERO: PathCost = PathCost {
        straight: 0,
        diagonal: 0,
    };

    /// Cost of one move between cells with the given costs.
    pub fn step(from_cost: u8, to_cost: u8, diagonal: bool) -> PathCost {
        let units = 128 + from_cost as u64 + to_cost as u64;
        if diagonal {
            PathCost {
                straight: 0,
                diagonal: units,
            }
        } else {
            PathCost {
                straight: units,
                diagonal: 0,
            }
        }
    }

    pub fn value(&self) -> f64 {
        (self.straight as f64 + std::f64::consts::SQRT_2 * self.diagonal as f64) / 128.0
    }
}

impl std::ops::Add for PathCost {
    type Output = PathCost;
    fn add(self, rhs: PathCost) -> PathCost {
        PathCost {
            straight: self.straight + rhs.straight,
            diagonal: self.diagonal + rhs.diagonal,
        }
    }
}

impl Ord for PathCost {
    fn cmp(&self, other: &Self) -> Ordering {
        // compare a + √2·b against c + √2·d via (a - c) vs √2·(d - b)
        let lhs = self.straight as i128 - other.straight as i128;
        let rhs = other.diagonal as i128 - self.diagonal as i128;
        match (lhs.signum(), rhs.signum()) {
            (l, r) if l != r && !(l == 0 || r == 0) => l.cmp(&r),
            (0, r) => 0.cmp(&r),
            (l, 0) => l.cmp(&0),
            (1, 1) => (lhs * lhs).cmp(&(2 * rhs * rhs)),
            _ => (2 * rhs * rhs).cmp(&(lhs * lhs)),
        }
    }
}

impl PartialOrd for PathCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPath {
    /// 8-adjacent cells from the start cell to the goal cell.
    pub cells: Vec<Cell>,
    /// Start pose, interior cell centers headed at the next cell, goal pose.
    /// A single-cell path carries `[start, goal]`.
    pub world_poses: Vec<Pose2D>,
    pub total_cost: f64,
    pub exact_cost: PathCost,
    pub goal: Pose2D,
    /// Stamp of the costmap the path was planned on.
    pub map_stamp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Error, Serialize, Deserialize)]
pub enum PlanError {
    #[error("start pose is off the map")]
    StartOffMap,
    #[error("goal pose is off the map")]
    GoalOffMap,
    #[error("start cell is not traversable (cost {0})")]
    StartBlocked(u8),
    #[error("goal cell is not traversable (cost {0})")]
    GoalBlocked(u8),
    #[error("goal is not reachable from the start")]
    Unreachable,
}

impl PlanError {
    /// Blocked or disconnected goal: no path exists for the request.
    pub fn is_no_path(&self) -> bool {
        matches!(self, PlanError::GoalBlocked(_) | PlanError::Unreachable)
    }
}

fn blocked(cost: u8) -> bool {
    cost >= COST_INSCRIBED
}

const NEIGHBORS: [(i64, i64); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// Admissible moves out of `cell` with their exact costs.
pub fn neighbors(costmap: &Costmap, cell: Cell) -> impl Iterator<Item = (Cell, PathCost)> + '_ {
    let g = costmap.geometry;
    let here = costmap.cost(cell);
    NEIGHBORS.iter().filter_map(move |&(dx, dy)| {
        let nx = cell.x as i64 + dx;
        let ny = cell.y as i64 + dy;
        if !g.contains_cell(nx, ny) {
            return None;
        }
        let next = Cell::new(nx as usize, ny as usize);
        let c = costmap.cost(next);
        if blocked(c) {
            return None;
        }
        let diagonal = dx != 0 && dy != 0;
        if diagonal {
            let side_a = costmap.cost(Cell::new(nx as usize, cell.y));
            let side_b = costmap.cost(Cell::new(cell.x, ny as usize));
            if blocked(side_a) && blocked(side_b) {
                return None;
            }
        }
        Some((next, PathCost::step(here, c, diagonal)))
    })
}

/// Minimum-cost path from the start pose's cell to the goal pose's cell.
pub fn plan(costmap: &Costmap, start: Pose2D, goal: Pose2D) -> Result<GridPath, PlanError> {
    let g = costmap.geometry;
    let s = g.world_to_cell(start.position()).ok_or(PlanError::StartOffMap)?;
    let t = g.world_to_cell(goal.position()).ok_or(PlanError::GoalOffMap)?;
    if blocked(costmap.cost(s)) {
        return Err(PlanError::StartBlocked(costmap.cost(s)));
    }
    if blocked(costmap.cost(t)) {
        return Err(PlanError::GoalBlocked(costmap.cost(t)));
    }

    let n = g.len();
    let mut best: Vec<Option<PathCost>> = vec![None; n];
    let mut parent: Vec<usize> = vec![usize::MAX; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    best[g.index(s)] = Some(PathCost::ZERO);
    heap.push(std::cmp::Reverse((PathCost::ZERO, s)));

    while let Some(std::cmp::Reverse((cost, cell))) = heap.pop() {
        let i = g.index(cell);
        if done[i] {
            continue;
        }
        done[i] = true;
        if cell == t {
            break;
        }
        for (next, step) in neighbors(costmap, cell) {
            let j = g.index(next);
            if done[j] {
                continue;
            }
            let candidate = cost + step;
            if best[j].is_none_or(|b| candidate < b) {
                best[j] = Some(candidate);
                parent[j] = i;
                heap.push(std::cmp::Reverse((candidate, next)));
            }
        }
    }

    let exact = best[g.index(t)].filter(|_| done[g.index(t)]).ok_or(PlanError::Unreachable)?;
    let mut cells = vec![t];
    let mut i = g.index(t);
    while i != g.index(s) {
        i = parent[i];
        cells.push(g.cell_of_index(i));
    }
    cells.reverse();
    Ok(GridPath {
        world_poses: path_poses(costmap, &cells, start, goal),
        cells,
        total_cost: exact.value(),
        exact_cost: exact,
        goal,
        map_stamp: costmap.stamp,
    })
}

fn path_poses(costmap: &Costmap, cells: &[Cell], start: Pose2D, goal: Pose2D) -> Vec<Pose2D> {
    if cells.len() == 1 {
        return vec![start, goal];
    }
    let g = costmap.geometry;
    let mut poses = Vec::with_capacity(cells.len());
    poses.push(start);
    for w in cells.windows(2).skip(1) {
        let a = g.cell_center(w[0]);
        let b = g.cell_center(w[1]);
        poses.push(Pose2D::new(a.x, a.y, (b.y - a.y).atan2(b.x - a.x)));
    }
    poses.push(goal);
    poses
}

/// Outcome of a replanning check.
#[derive(Debug, Clone, PartialEq)]
pub enum Replan {
    /// The previous path is still valid and was kept as is.
    Kept,
    Replanned(GridPath),
}

/// Re-plans only when the goal changed or a cell under the previous path has
/// become non-traversable on the new costmap.
pub fn replan_on_update(
    costmap: &Costmap,
    current: Pose2D,
    goal: Pose2D,
    previous: &GridPath,
) -> Result<Replan, PlanError> {
    let g = costmap.geometry;
    let same_goal = previous.goal == goal;
    let still_clear = previous.cells.iter().all(|&c| {
        g.contains_cell(c.x as i64, c.y as i64) && !blocked(costmap.cost(c))
    });
    if same_goal && still_clear {
        return Ok(Replan::Kept);
    }
    plan(costmap, current, goal).map(Replan::Replanned)
}

/// World position of a cell center; convenience for callers holding a path.
pub fn cell_center(costmap: &Costmap, cell: Cell) -> Point2 {
    costmap.geometry.cell_center(cell)
}
