//! Independent reference implementations the acceptance suite compares
//! against. They favour obviousness over speed.

#![allow(dead_code)]

use std::cmp::Ordering;

use roverlink::geometry::Point2;
use roverlink::mapping::{CellState, GridGeometry, OccupancyGrid};
use roverlink::world::DepthScan;

/// Cells a segment passes through, found by splitting it at every lattice
/// line crossing and locating the midpoint of each piece.
pub fn sampled_cells(g: &GridGeometry, a: Point2, b: Point2) -> Vec<(usize, usize)> {
    let u0 = (a.x - g.origin.x) / g.resolution;
    let v0 = (a.y - g.origin.y) / g.resolution;
    let u1 = (b.x - g.origin.x) / g.resolution;
    let v1 = (b.y - g.origin.y) / g.resolution;
    let mut ts = vec![0.0, 1.0];
    for (p0, p1) in [(u0, u1), (v0, v1)] {
        if p0 == p1 {
            continue;
        }
        let lo = p0.min(p1).floor() as i64;
        let hi = p0.max(p1).ceil() as i64;
        for k in lo..=hi {
            let t = (k as f64 - p0) / (p1 - p0);
            if t > 0.0 && t < 1.0 {
                ts.push(t);
            }
        }
    }
    ts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut out: Vec<(usize, usize)> = vec![];
    let mut visit = |u: f64, v: f64| {
        let (x, y) = (u.floor(), v.floor());
        if x >= 0.0 && y >= 0.0 && (x as usize) < g.width && (y as usize) < g.height {
            let c = (x as usize, y as usize);
            if out.last() != Some(&c) {
                out.push(c);
            }
        }
    };
    visit(u0, v0);
    for w in ts.windows(2) {
        if w[1] - w[0] < 1e-12 {
            continue;
        }
        let t = 0.5 * (w[0] + w[1]);
        visit(u0 + t * (u1 - u0), v0 + t * (v1 - v0));
    }
    out
}

/// Fraction of `a→b` that stays inside the map rectangle.
fn inside_fraction(g: &GridGeometry, a: Point2, b: Point2) -> f64 {
    let hi = Point2::new(
        g.origin.x + g.width as f64 * g.resolution,
        g.origin.y + g.height as f64 * g.resolution,
    );
    let mut t: f64 = 1.0;
    if b.x > hi.x {
        t = t.min((hi.x - a.x) / (b.x - a.x));
    }
    if b.x < g.origin.x {
        t = t.min((g.origin.x - a.x) / (b.x - a.x));
    }
    if b.y > hi.y {
        t = t.min((hi.y - a.y) / (b.y - a.y));
    }
    if b.y < g.origin.y {
        t = t.min((g.origin.y - a.y) / (b.y - a.y));
    }
    t
}

/// Expected per-cell states after applying the rays of `scan` in order to
/// `grid`: cells along each ray free, the hit cell occupied when the obstacle
/// is at least `height_cut` tall and inside the map, everything else as before.
pub fn apply_scan(grid: &mut [CellState], g: &GridGeometry, scan: &DepthScan, height_cut: f64) {
    let o = scan.origin.position();
    for ray in &scan.rays {
        let end = scan.endpoint(ray);
        let t = inside_fraction(g, o, end);
        let clipped = t < 1.0;
        let end = if clipped { Point2::new(o.x + t * (end.x - o.x), o.y + t * (end.y - o.y)) } else { end };
        let cells = sampled_cells(g, o, end);
        for (i, &(x, y)) in cells.iter().enumerate() {
            let hit_cell = i + 1 == cells.len();
            let occupied = hit_cell && !clipped && ray.hit.is_some_and(|h| h.height >= height_cut);
            grid[y * g.width + x] = if occupied { CellState::Occupied } else { CellState::Free };
        }
    }
}

/// Costmap by definition: nearest occupied cell over all pairs.
pub fn brute_force_costs(grid: &OccupancyGrid, inscribed: f64, inflation: f64, k: f64) -> Vec<u8> {
    let g = grid.geometry;
    let occupied: Vec<(i64, i64)> = (0..g.len())
        .filter(|&i| grid.cells()[i] == CellState::Occupied)
        .map(|i| ((i % g.width) as i64, (i / g.width) as i64))
        .collect();
    (0..g.len())
        .map(|i| {
            let (x, y) = ((i % g.width) as i64, (i / g.width) as i64);
            let d2 = occupied.iter().map(|&(ox, oy)| (ox - x).pow(2) + (oy - y).pow(2)).min();
            let d = d2.map(|d2| (d2 as f64).sqrt() * g.resolution);
            match d {
                Some(0.0) => 254,
                Some(d) if d <= inscribed => 253,
                Some(d) if d <= inflation => (252.0 * (-k * (d - inscribed)).exp()).round() as u8,
                _ => match grid.cells()[i] {
                    CellState::Unknown => 255,
                    _ => 0,
                },
            }
        })
        .collect()
}

/// Path length `(a + √2·b) / 128` kept as the integer pair.
pub type Exact = (i128, i128);

pub fn exact_cmp(p: Exact, q: Exact) -> Ordering {
    let da = p.0 - q.0;
    let db = p.1 - q.1;
    // sign of da + √2·db
    let sign = if (da >= 0 && db >= 0) || (da <= 0 && db <= 0) {
        (da + db).signum()
    } else if da > 0 {
        (da * da - 2 * db * db).signum()
    } else {
        (2 * db * db - da * da).signum()
    };
    sign.cmp(&0)
}

pub struct LatticeCosts<'a> {
    pub w: usize,
    pub h: usize,
    pub costs: &'a [u8],
}

impl LatticeCosts<'_> {
    pub fn blocked(&self, x: usize, y: usize) -> bool {
        self.costs[y * self.w + x] >= 253
    }

    /// Legal moves with their exact edge weights.
    pub fn moves(&self, x: usize, y: usize) -> Vec<((usize, usize), Exact)> {
        let mut out = vec![];
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx < 0 || ny < 0 || nx >= self.w as i64 || ny >= self.h as i64 {
                    continue;
                }
                let (nx, ny) = (nx as usize, ny as usize);
                if self.blocked(nx, ny) {
                    continue;
                }
                let diagonal = dx != 0 && dy != 0;
                if diagonal && self.blocked(nx, y) && self.blocked(x, ny) {
                    continue;
                }
                let units = 128 + self.costs[y * self.w + x] as i128 + self.costs[ny * self.w + nx] as i128;
                out.push(((nx, ny), if diagonal { (0, units) } else { (units, 0) }));
            }
        }
        out
    }

    /// Relaxes every edge until nothing changes.
    pub fn bellman_ford(&self, s: (usize, usize), t: (usize, usize)) -> Option<Exact> {
        if self.blocked(s.0, s.1) || self.blocked(t.0, t.1) {
            return None;
        }
        let mut best: Vec<Option<Exact>> = vec![None; self.w * self.h];
        best[s.1 * self.w + s.0] = Some((0, 0));
        loop {
            let mut changed = false;
            for y in 0..self.h {
                for x in 0..self.w {
                    let Some(here) = best[y * self.w + x] else { continue };
                    for ((nx, ny), e) in self.moves(x, y) {
                        let cand = (here.0 + e.0, here.1 + e.1);
                        let slot = &mut best[ny * self.w + nx];
                        if slot.is_none_or(|b| exact_cmp(cand, b) == Ordering::Less) {
                            *slot = Some(cand);
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        best[t.1 * self.w + t.0]
    }

    /// Minimum over every simple path; only for tiny grids.
    pub fn enumerate(&self, s: (usize, usize), t: (usize, usize)) -> Option<Exact> {
        fn go(
            l: &LatticeCosts,
            at: (usize, usize),
            t: (usize, usize),
            acc: Exact,
            seen: &mut Vec<bool>,
            best: &mut Option<Exact>,
        ) {
            if at == t {
                if best.is_none_or(|b| exact_cmp(acc, b) == Ordering::Less) {
                    *best = Some(acc);
                }
                return;
            }
            for ((nx, ny), e) in l.moves(at.0, at.1) {
                let i = ny * l.w + nx;
                if seen[i] {
                    continue;
                }
                seen[i] = true;
                go(l, (nx, ny), t, (acc.0 + e.0, acc.1 + e.1), seen, best);
                seen[i] = false;
            }
        }
        if self.blocked(s.0, s.1) || self.blocked(t.0, t.1) {
            return None;
        }
        let mut seen = vec![false; self.w * self.h];
        seen[s.1 * self.w + s.0] = true;
        let mut best = None;
        go(self, s, t, (0, 0), &mut seen, &mut best);
        best
    }
}

/// Rest-to-rest travel time over `dist` with speed and acceleration limits.
pub fn trapezoid_time(dist: f64, v_max: f64, a_max: f64) -> f64 {
    let ramp = v_max * v_max / a_max;
    if dist >= ramp {
        dist / v_max + v_max / a_max
    } else {
        2.0 * (dist / a_max).sqrt()
    }
}
