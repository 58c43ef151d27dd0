use super::{Cell, GridGeometry, MapError};
use crate::geometry::Point2;

/// Cells whose interior the segment `from→to` passes through, in order.
///
/// The start cell always comes first. An end point lying exactly on a cell
/// boundary does not pull in the cell beyond it. Passing exactly through a
/// lattice corner steps diagonally.
pub fn raycast_cells(grid: &GridGeometry, from: Point2, to: Point2) -> Result<Vec<Cell>, MapError> {
    let lo = grid.origin;
    let hi = grid.max_corner();
    let inside = |p: Point2| p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y;
    if grid.world_to_cell(from).is_none() {
        return Err(MapError::OutOfBounds(from));
    }
    if !inside(to) {
        return Err(MapError::OutOfBounds(to));
    }
    Ok(traverse_cells(grid, from, to))
}

/// Grid traversal without bounds checks on the end point; callers must keep
/// the segment inside the map (the end may sit on the map's outer edge).
pub fn traverse_cells(grid: &GridGeometry, from: Point2, to: Point2) -> Vec<Cell> {
    let (x0, y0) = grid.to_lattice(from);
    let (x1, y1) = grid.to_lattice(to);
    let mut ix = x0.floor() as i64;
    let mut iy = y0.floor() as i64;
    let dx = x1 - x0;
    let dy = y1 - y0;

    let axis = |p: f64, d: f64, i: i64| -> (i64, f64, f64) {
        if d > 0.0 {
            (1, ((i + 1) as f64 - p) / d, 1.0 / d)
        } else if d < 0.0 {
            (-1, (p - i as f64) / -d, -1.0 / d)
        } else {
            (0, f64::INFINITY, f64::INFINITY)
        }
    };
    let (step_x, mut t_max_x, t_delta_x) = axis(x0, dx, ix);
    let (step_y, mut t_max_y, t_delta_y) = axis(y0, dy, iy);

    let bound = (dx.abs().ceil() + dy.abs().ceil()) as usize + 2;
    let mut cells = Vec::with_capacity(bound);
    let push = |ix: i64, iy: i64, cells: &mut Vec<Cell>| {
        if grid.contains_cell(ix, iy) {
            cells.push(Cell::new(ix as usize, iy as usize));
        }
    };
    push(ix, iy, &mut cells);
    while t_max_x.min(t_max_y) < 1.0 && cells.len() <= bound {
        if t_max_x < t_max_y {
            ix += step_x;
            t_max_x += t_delta_x;
        } else if t_max_y < t_max_x {
            iy += step_y;
            t_max_y += t_delta_y;
        } else {
            ix += step_x;
            iy += step_y;
            t_max_x += t_delta_x;
            t_max_y += t_delta_y;
        }
        push(ix, iy, &mut cells);
    }
    cells
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridGeometry {
        GridGeometry::new(0.1, Point2::new(0.0, 0.0), 50, 50).unwrap()
    }

    #[test]
    fn axis_aligned() {
        let c = raycast_cells(&grid(), Point2::new(0.05, 0.05), Point2::new(0.35, 0.05)).unwrap();
        assert_eq!(
            c,
            vec![Cell::new(0, 0), Cell::new(1, 0), Cell::new(2, 0), Cell::new(3, 0)]
        );
    }

    #[test]
    fn zero_length() {
        let p = Point2::new(1.23, 2.34);
        assert_eq!(raycast_cells(&grid(), p, p).unwrap(), vec![Cell::new(12, 23)]);
    }

    #[test]
    fn backwards_and_vertical() {
        let c = raycast_cells(&grid(), Point2::new(0.35, 0.05), Point2::new(0.05, 0.05)).unwrap();
        assert_eq!(c.first(), Some(&Cell::new(3, 0)));
        assert_eq!(c.last(), Some(&Cell::new(0, 0)));
        let c = raycast_cells(&grid(), Point2::new(0.05, 0.45), Point2::new(0.05, 0.12)).unwrap();
        assert_eq!(c.len(), 4);
    }

    #[test]
    fn exact_diagonal_through_corners() {
        let c = raycast_cells(&grid(), Point2::new(0.05, 0.05), Point2::new(0.35, 0.35)).unwrap();
        assert_eq!(
            c,
            vec![Cell::new(0, 0), Cell::new(1, 1), Cell::new(2, 2), Cell::new(3, 3)]
        );
    }

    #[test]
    fn out_of_bounds() {
        assert!(raycast_cells(&grid(), Point2::new(-0.1, 0.0), Point2::new(1.0, 1.0)).is_err());
        assert!(raycast_cells(&grid(), Point2::new(0.1, 0.0), Point2::new(6.0, 1.0)).is_err());
    }

    #[test]
    fn consecutive_cells_are_neighbors() {
        let c = raycast_cells(&grid(), Point2::new(0.31, 4.77), Point2::new(4.9, 0.02)).unwrap();
        for w in c.windows(2) {
            let dx = w[0].x.abs_diff(w[1].x);
            let dy = w[0].y.abs_diff(w[1].y);
            assert!(dx + dy == 1 || (dx == 1 && dy == 1), "{w:?}");
        }
    }
}
