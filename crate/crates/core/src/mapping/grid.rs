use serde::{Deserialize, Serialize};

use super::raycast::traverse_cells;
use super::{Cell, MapError};
use crate::geometry::Point2;
use crate::world::{DepthScan, Shape, WorldScene};

/// m/cell
pub const DEFAULT_RESOLUTION: f64 = 0.1;
/// Obstacles at least this tall are insurmountable, m.
pub const DEFAULT_HEIGHT_CUT: f64 = 0.20;
/// Map rebuild period (4 Hz), s.
pub const MAP_UPDATE_PERIOD: f64 = 0.25;

/// Lattice placement shared by occupancy grids and costmaps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub resolution: f64,
    /// World coordinates of the lower-left corner of cell (0, 0).
    pub origin: Point2,
    pub width: usize,
    pub height: usize,
}

impl GridGeometry {
    pub fn new(resolution: f64, origin: Point2, width: usize, height: usize) -> Result<Self, MapError> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(MapError::InvalidGeometry(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(MapError::InvalidGeometry("grid must have at least one cell".into()));
        }
        Ok(Self {
            resolution,
            origin,
            width,
            height,
        })
    }

    /// Smallest grid at `resolution` covering the rectangle `min..max`.
    pub fn covering(min: Point2, max: Point2, resolution: f64) -> Result<Self, MapError> {
        let w = ((max.x - min.x) / resolution - 1e-9).ceil().max(1.0) as usize;
        let h = ((max.y - min.y) / resolution - 1e-9).ceil().max(1.0) as usize;
        Self::new(resolution, min, w, h)
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, cell: Cell) -> usize {
        cell.y * self.width + cell.x
    }

    pub fn cell_of_index(&self, i: usize) -> Cell {
        Cell::new(i % self.width, i / self.width)
    }

    pub fn contains_cell(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    /// Continuous lattice coordinates of a world point (cell units).
    pub fn to_lattice(&self, p: Point2) -> (f64, f64) {
        (
            (p.x - self.origin.x) / self.resolution,
            (p.y - self.origin.y) / self.resolution,
        )
    }

    /// Cell containing a world point, if on the map.
    pub fn world_to_cell(&self, p: Point2) -> Option<Cell> {
        let (u, v) = self.to_lattice(p);
        let (x, y) = (u.floor(), v.floor());
        if !(x.is_finite() && y.is_finite()) {
            return None;
        }
        self.contains_cell(x as i64, y as i64)
            .then(|| Cell::new(x as usize, y as usize))
    }

    pub fn cell_center(&self, cell: Cell) -> Point2 {
        Point2::new(
            self.origin.x + (cell.x as f64 + 0.5) * self.resolution,
            self.origin.y + (cell.y as f64 + 0.5) * self.resolution,
        )
    }

    /// World-space corners of a cell: lower-left and upper-right.
    pub fn cell_bounds(&self, cell: Cell) -> (Point2, Point2) {
        let lo = Point2::new(
            self.origin.x + cell.x as f64 * self.resolution,
            self.origin.y + cell.y as f64 * self.resolution,
        );
        (lo, Point2::new(lo.x + self.resolution, lo.y + self.resolution))
    }

    pub fn max_corner(&self) -> Point2 {
        Point2::new(
            self.origin.x + self.width as f64 * self.resolution,
            self.origin.y + self.height as f64 * self.resolution,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CellState {
    #[default]
    Unknown,
    Free,
    Occupied,
}

/// Three-state occupancy lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    pub geometry: GridGeometry,
    cells: Vec<CellState>,
    pub stamp: f64,
}

impl OccupancyGrid {
    /// All cells start Unknown.
    pub fn new(geometry: GridGeometry) -> Self {
        Self {
            cells: vec![CellState::Unknown; geometry.len()],
            geometry,
            stamp: 0.0,
        }
    }

    pub fn get(&self, cell: Cell) -> CellState {
        self.cells[self.geometry.index(cell)]
    }

    pub fn set(&mut self, cell: Cell, state: CellState) {
        let i = self.geometry.index(cell);
        self.cells[i] = state;
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    pub fn count(&self, state: CellState) -> usize {
        self.cells.iter().filter(|&&c| c == state).count()
    }

    /// Ground-truth rasterization: a cell is Occupied when it overlaps an
    /// obstacle at least `height_cut` tall, Free otherwise.
    pub fn from_scene(scene: &WorldScene, geometry: GridGeometry, height_cut: f64) -> Self {
        let mut grid = Self::new(geometry);
        grid.cells.fill(CellState::Free);
        for o in scene.obstacles.iter().filter(|o| o.height_m >= height_cut) {
            let (lo, hi) = o.shape.aabb();
            let (u0, v0) = geometry.to_lattice(lo);
            let (u1, v1) = geometry.to_lattice(hi);
            let x0 = u0.floor().max(0.0) as usize;
            let y0 = v0.floor().max(0.0) as usize;
            let x1 = (u1.ceil().max(0.0) as usize).min(geometry.width);
            let y1 = (v1.ceil().max(0.0) as usize).min(geometry.height);
            for y in y0..y1 {
                for x in x0..x1 {
                    let cell = Cell::new(x, y);
                    let (clo, chi) = geometry.cell_bounds(cell);
                    let overlaps = match o.shape {
                        Shape::Rect { min, max } => {
                            min.x < chi.x && max.x > clo.x && min.y < chi.y && max.y > clo.y
                        }
                        Shape::Circle { center, radius } => {
                            let nx = center.x.clamp(clo.x, chi.x);
                            let ny = center.y.clamp(clo.y, chi.y);
                            (center.x - nx).hypot(center.y - ny) < radius
                        }
                    };
                    if overlaps {
                        grid.set(cell, CellState::Occupied);
                    }
                }
            }
        }
        grid
    }

    /// Folds one depth scan into the grid with the direct inverse measurement
    /// model. Later scans overwrite earlier cell states.
    ///
    /// Rays leaving the map are clipped at its edge; the clipped part is
    /// marked free and no cell is marked occupied for that ray.
    pub fn integrate_scan(&mut self, scan: &DepthScan, height_cut: f64) -> Result<(), MapError> {
        let origin = scan.origin.position();
        if self.geometry.world_to_cell(origin).is_none() {
            return Err(MapError::OutOfBounds(origin));
        }
        let lo = self.geometry.origin;
        let hi = self.geometry.max_corner();
        for ray in &scan.rays {
            let end = scan.endpoint(ray);
            let t_exit = clip_segment(origin, end, lo, hi);
            let clipped = t_exit < 1.0;
            let end = if clipped {
                Point2::new(
                    origin.x + t_exit * (end.x - origin.x),
                    origin.y + t_exit * (end.y - origin.y),
                )
            } else {
                end
            };
            let occupied_end = !clipped && ray.hit.is_some_and(|h| h.height >= height_cut);
            let cells = traverse_cells(&self.geometry, origin, end);
            let last = cells.len() - 1;
            for (i, cell) in cells.into_iter().enumerate() {
                let state = if i == last && occupied_end {
                    CellState::Occupied
                } else {
                    CellState::Free
                };
                self.set(cell, state);
            }
        }
        self.stamp = scan.timestamp;
        Ok(())
    }
}

/// Parameter at which the segment `a→b` leaves the box `lo..hi` (1.0 if it
/// stays inside). `a` must be inside.
fn clip_segment(a: Point2, b: Point2, lo: Point2, hi: Point2) -> f64 {
    let mut t = 1.0f64;
    for (p, d, l, h) in [(a.x, b.x - a.x, lo.x, hi.x), (a.y, b.y - a.y, lo.y, hi.y)] {
        if d > 0.0 {
            t = t.min((h - p) / d);
        } else if d < 0.0 {
            t = t.min((l - p) / d);
        }
    }
    t.max(0.0)
}

/// Gates map rebuilds to the configured cadence in simulation time.
#[derive(Debug, Clone)]
pub struct MapUpdateScheduler {
    period: f64,
    last: Option<f64>,
}

impl MapUpdateScheduler {
    pub fn new(period: f64) -> Self {
        Self { period, last: None }
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// True (and records the rebuild) when at least one period has elapsed
    /// since the previous rebuild.
    pub fn due(&mut self, now: f64) -> bool {
        // tolerance for accumulated step rounding
        let ready = self.last.is_none_or(|t| now - t >= self.period - 1e-9);
        if ready {
            self.last = Some(now);
        }
        ready
    }
}

impl Default for MapUpdateScheduler {
    fn default() -> Self {
        Self::new(MAP_UPDATE_PERIOD)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose2D;
    use crate::world::{Bounds, DepthRay, Obstacle, RayHit};

    fn geometry(w: usize, h: usize) -> GridGeometry {
        GridGeometry::new(0.1, Point2::new(0.0, 0.0), w, h).unwrap()
    }

    fn single_ray(origin: Pose2D, hit: Option<RayHit>) -> DepthScan {
        DepthScan {
            origin,
            rays: vec![DepthRay { azimuth: 0.0, hit }],
            max_range: 10.0,
            fov: 0.1,
            timestamp: 1.0,
        }
    }

    #[test]
    fn free_then_occupied_then_untouched() {
        let mut g = OccupancyGrid::new(geometry(40, 3));
        let scan = single_ray(
            Pose2D::new(0.0, 0.15, 0.0),
            Some(RayHit {
                range: 2.0,
                height: 0.5,
            }),
        );
        g.integrate_scan(&scan, DEFAULT_HEIGHT_CUT).unwrap();
        for x in 0..19 {
            assert_eq!(g.get(Cell::new(x, 1)), CellState::Free, "cell {x}");
        }
        assert_eq!(g.get(Cell::new(19, 1)), CellState::Occupied);
        for x in 20..40 {
            assert_eq!(g.get(Cell::new(x, 1)), CellState::Unknown);
        }
        assert_eq!(g.count(CellState::Free), 19);
        assert_eq!(g.stamp, 1.0);
    }

    #[test]
    fn low_obstacle_below_cut_is_free() {
        let mut g = OccupancyGrid::new(geometry(40, 3));
        let scan = single_ray(
            Pose2D::new(0.0, 0.15, 0.0),
            Some(RayHit {
                range: 2.0,
                height: 0.1,
            }),
        );
        g.integrate_scan(&scan, DEFAULT_HEIGHT_CUT).unwrap();
        assert_eq!(g.count(CellState::Free), 20);
        assert_eq!(g.count(CellState::Occupied), 0);
    }

    #[test]
    fn cut_is_inclusive() {
        let mut g = OccupancyGrid::new(geometry(40, 3));
        let scan = single_ray(
            Pose2D::new(0.0, 0.15, 0.0),
            Some(RayHit {
                range: 2.0,
                height: 0.20,
            }),
        );
        g.integrate_scan(&scan, DEFAULT_HEIGHT_CUT).unwrap();
        assert_eq!(g.get(Cell::new(19, 1)), CellState::Occupied);
    }

    #[test]
    fn miss_clipped_at_map_edge() {
        let mut g = OccupancyGrid::new(geometry(30, 3));
        g.integrate_scan(&single_ray(Pose2D::new(0.05, 0.15, 0.0), None), 0.2)
            .unwrap();
        assert_eq!(g.count(CellState::Free), 30);
        assert_eq!(g.count(CellState::Occupied), 0);
    }

    #[test]
    fn latest_scan_wins_and_repeat_is_idempotent() {
        let mut g = OccupancyGrid::new(geometry(40, 3));
        let o = Pose2D::new(0.0, 0.15, 0.0);
        let hit = single_ray(
            o,
            Some(RayHit {
                range: 1.0,
                height: 0.5,
            }),
        );
        g.integrate_scan(&hit, 0.2).unwrap();
        let once = g.clone();
        g.integrate_scan(&hit, 0.2).unwrap();
        assert_eq!(g, once);
        g.integrate_scan(&single_ray(o, None), 0.2).unwrap();
        assert_eq!(g.get(Cell::new(9, 1)), CellState::Free);
    }

    #[test]
    fn origin_outside_rejected() {
        let mut g = OccupancyGrid::new(geometry(10, 10));
        let scan = single_ray(Pose2D::new(-1.0, 0.5, 0.0), None);
        assert!(g.integrate_scan(&scan, 0.2).is_err());
    }

    #[test]
    fn scheduler_cadence() {
        let mut s = MapUpdateScheduler::default();
        let mut rebuilds = Vec::new();
        for k in 0..200 {
            let t = k as f64 * 0.05;
            if s.due(t) {
                rebuilds.push(t);
            }
        }
        assert_eq!(rebuilds.len(), 40);
        assert!(rebuilds.windows(2).all(|w| w[1] - w[0] >= 0.25 - 1e-9));
    }

    #[test]
    fn rasterize_scene() {
        let scene = WorldScene::new(
            "r",
            Bounds::new(Point2::new(0.0, 0.0), Point2::new(2.0, 2.0)),
        )
        .with_obstacle(Obstacle::rect(Point2::new(0.5, 0.5), Point2::new(0.7, 0.6), 0.5))
        .with_obstacle(Obstacle::rect(Point2::new(1.5, 1.5), Point2::new(1.7, 1.6), 0.1));
        let g = OccupancyGrid::from_scene(&scene, geometry(20, 20), 0.2);
        assert_eq!(g.count(CellState::Occupied), 2);
        assert_eq!(g.get(Cell::new(5, 5)), CellState::Occupied);
        assert_eq!(g.get(Cell::new(6, 5)), CellState::Occupied);
    }

    #[test]
    fn covering_geometry() {
        let g = GridGeometry::covering(Point2::new(0.0, 0.0), Point2::new(10.0, 4.05), 0.1).unwrap();
        assert_eq!((g.width, g.height), (100, 41));
        assert!(GridGeometry::new(0.0, Point2::default(), 1, 1).is_err());
    }
}
