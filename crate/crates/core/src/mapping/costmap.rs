use serde::{Deserialize, Serialize};

use super::{Cell, CellState, GridGeometry, MapError, OccupancyGrid};
use crate::geometry::Point2;

pub const COST_FREE: u8 = 0;
/// Center inside the inscribed circle of an obstacle: collision is certain.
pub const COST_INSCRIBED: u8 = 253;
pub const COST_LETHAL: u8 = 254;
pub const COST_UNKNOWN: u8 = 255;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InflationConfig {
    /// m
    pub inflation_radius: f64,
    /// m
    pub inscribed_radius: f64,
    /// Exponential decay rate of the inflated cost, 1/m.
    pub decay_rate: f64,
}

impl Default for InflationConfig {
    fn default() -> Self {
        Self {
            inflation_radius: 1.0,
            inscribed_radius: 0.41,
            decay_rate: 3.0,
        }
    }
}

impl InflationConfig {
    pub fn validate(&self) -> Result<(), MapError> {
        if !(self.inscribed_radius > 0.0) || !(self.inflation_radius >= self.inscribed_radius) {
            return Err(MapError::InvalidInflation(format!(
                "need inflation_radius >= inscribed_radius > 0, got {} and {}",
                self.inflation_radius, self.inscribed_radius
            )));
        }
        if !(self.decay_rate >= 0.0 && self.decay_rate.is_finite()) {
            return Err(MapError::InvalidInflation(format!(
                "decay rate must be finite and non-negative, got {}",
                self.decay_rate
            )));
        }
        Ok(())
    }

    /// Cost of a cell at `distance` meters from the nearest occupied cell
    /// center, or `None` when the distance is beyond the inflation radius.
    pub fn cost_at_distance(&self, distance: f64) -> Option<u8> {
        if distance == 0.0 {
            Some(COST_LETHAL)
        } else if distance <= self.inscribed_radius {
            Some(COST_INSCRIBED)
        } else if distance <= self.inflation_radius {
            let c = 252.0 * (-self.decay_rate * (distance - self.inscribed_radius)).exp();
            Some(c.round() as u8)
        } else {
            None
        }
    }
}

/// Inflated 8-bit traversal costs on the occupancy lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Costmap {
    pub geometry: GridGeometry,
    costs: Vec<u8>,
    pub stamp: f64,
}

impl Costmap {
    /// Wraps raw row-major costs; panics if the length does not match.
    pub fn from_costs(geometry: GridGeometry, costs: Vec<u8>, stamp: f64) -> Self {
        assert_eq!(costs.len(), geometry.len(), "cost buffer does not match geometry");
        Self {
            geometry,
            costs,
            stamp,
        }
    }

    pub fn cost(&self, cell: Cell) -> u8 {
        self.costs[self.geometry.index(cell)]
    }

    pub fn set_cost(&mut self, cell: Cell, cost: u8) {
        let i = self.geometry.index(cell);
        self.costs[i] = cost;
    }

    /// Cost of the cell under a world point; off-map points read as unknown.
    pub fn cost_at(&self, p: Point2) -> u8 {
        self.geometry
            .world_to_cell(p)
            .map_or(COST_UNKNOWN, |c| self.cost(c))
    }

    /// Row-major costs, row 0 at the map origin.
    pub fn costs(&self) -> &[u8] {
        &self.costs
    }

    pub fn width(&self) -> usize {
        self.geometry.width
    }

    pub fn height(&self) -> usize {
        self.geometry.height
    }

    pub fn lethal_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.costs
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == COST_LETHAL)
            .map(|(i, _)| self.geometry.cell_of_index(i))
    }
}

const FAR: i64 = i64::MAX / 4;

/// Exact squared Euclidean distance transform of a 1-D sampled function
/// (lower envelope of parabolas).
fn edt_1d(f: &[i64], out: &mut [i64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let sq = |q: usize| (q * q) as f64;
    for q in 1..n {
        if f[q] >= FAR {
            continue;
        }
        if f[v[0]] >= FAR {
            v[0] = q;
            continue;
        }
        let intersect = |p: usize| {
            ((f[q] as f64 + sq(q)) - (f[p] as f64 + sq(p))) / (2.0 * q as f64 - 2.0 * p as f64)
        };
        let mut s = intersect(v[k]);
        // z[0] is -inf so this stops at k = 0
        while s <= z[k] {
            k -= 1;
            s = intersect(v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    if f[v[0]] >= FAR {
        out.fill(FAR);
        return;
    }
    let mut k = 0usize;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as i64 - v[k] as i64;
        *o = d * d + f[v[k]];
    }
}

/// Squared distance (in cells²) from every cell center to the nearest
/// occupied cell center; `FAR` where there is none.
fn squared_distance_field(grid: &OccupancyGrid) -> Vec<i64> {
    let g = grid.geometry;
    let (w, h) = (g.width, g.height);
    let mut d: Vec<i64> = grid
        .cells()
        .iter()
        .map(|&s| if s == CellState::Occupied { 0 } else { FAR })
        .collect();
    let n = w.max(h);
    let mut f = vec![0i64; n];
    let mut out = vec![0i64; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0f64; n + 1];
    // columns
    for x in 0..w {
        for y in 0..h {
            f[y] = d[y * w + x];
        }
        edt_1d(&f[..h], &mut out[..h], &mut v, &mut z);
        for y in 0..h {
            d[y * w + x] = out[y];
        }
    }
    // rows
    for y in 0..h {
        let row = &mut d[y * w..(y + 1) * w];
        f[..w].copy_from_slice(row);
        edt_1d(&f[..w], &mut out[..w], &mut v, &mut z);
        row.copy_from_slice(&out[..w]);
    }
    d
}

/// Builds the costmap from occupancy states.
pub fn inflate(grid: &OccupancyGrid, cfg: &InflationConfig) -> Result<Costmap, MapError> {
    cfg.validate()?;
    let res = grid.geometry.resolution;
    let dist2 = squared_distance_field(grid);
    let costs = dist2
        .iter()
        .zip(grid.cells())
        .map(|(&d2, &state)| {
            let inflated = if d2 >= FAR {
                None
            } else {
                cfg.cost_at_distance((d2 as f64).sqrt() * res)
            };
            inflated.unwrap_or(match state {
                CellState::Unknown => COST_UNKNOWN,
                _ => COST_FREE,
            })
        })
        .collect();
    Ok(Costmap {
        geometry: grid.geometry,
        costs,
        stamp: grid.stamp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;

    fn grid(w: usize, h: usize) -> OccupancyGrid {
        OccupancyGrid::new(GridGeometry::new(0.1, Point2::new(0.0, 0.0), w, h).unwrap())
    }

    #[test]
    fn no_obstacles_only_free_or_unknown() {
        let mut g = grid(20, 10);
        for x in 0..10 {
            g.set(Cell::new(x, 3), CellState::Free);
        }
        let c = inflate(&g, &InflationConfig::default()).unwrap();
        assert_eq!(c.costs().iter().filter(|&&v| v == COST_FREE).count(), 10);
        assert!(c.costs().iter().all(|&v| v == COST_FREE || v == COST_UNKNOWN));
    }

    #[test]
    fn single_obstacle_rings() {
        let mut g = grid(31, 31);
        for s in g.cells().to_vec().iter().enumerate().map(|(i, _)| i) {
            let c = g.geometry.cell_of_index(s);
            g.set(c, CellState::Free);
        }
        g.set(Cell::new(15, 15), CellState::Occupied);
        let c = inflate(&g, &InflationConfig::default()).unwrap();
        assert_eq!(c.cost(Cell::new(15, 15)), COST_LETHAL);
        assert_eq!(c.cost(Cell::new(19, 15)), COST_INSCRIBED); // 0.4 m
        // 0.5 m: 252 exp(-3 * 0.09)
        let expect = (252.0f64 * (-3.0f64 * 0.09).exp()).round() as u8;
        assert_eq!(c.cost(Cell::new(20, 15)), expect);
        assert_eq!(c.cost(Cell::new(25, 15)), (252.0f64 * (-3.0f64 * 0.59).exp()).round() as u8);
        assert_eq!(c.cost(Cell::new(26, 15)), COST_FREE);
        assert_eq!(c.cost(Cell::new(0, 0)), COST_FREE);
    }

    #[test]
    fn edt_handles_empty_rows_and_columns() {
        let mut g = grid(7, 5);
        g.set(Cell::new(6, 4), CellState::Occupied);
        let d = squared_distance_field(&g);
        for y in 0..5usize {
            for x in 0..7usize {
                let e = (6 - x as i64).pow(2) + (4 - y as i64).pow(2);
                assert_eq!(d[y * 7 + x], e);
            }
        }
    }

    #[test]
    fn invalid_config() {
        let bad = InflationConfig {
            inflation_radius: 0.2,
            inscribed_radius: 0.41,
            decay_rate: 3.0,
        };
        assert!(inflate(&grid(3, 3), &bad).is_err());
    }
}
