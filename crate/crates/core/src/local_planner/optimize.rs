use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::objective::evaluate;
use super::{objective, TebError, TebTrajectory, TebWeights, DT_MIN};
use crate::geometry::{normalize_angle, Point2};
use crate::world::RoverParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Resize-then-descend rounds.
    pub outer_iterations: usize,
    /// Line-searched steps per round.
    pub inner_iterations: usize,
    pub min_segment: f64,
    pub max_segment: f64,
    /// Sufficient-decrease constant of the backtracking search.
    pub armijo: f64,
    pub max_backtracks: usize,
    /// Largest coordinate change tried first, in variable units.
    pub max_step: f64,
    /// Stop when every partial derivative is below this.
    pub gradient_tolerance: f64,
    /// Curvature pairs kept to scale the descent direction; 0 gives plain
    /// steepest descent.
    pub memory: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            outer_iterations: 3,
            inner_iterations: 40,
            min_segment: 0.1,
            max_segment: 0.4,
            armijo: 1e-4,
            max_backtracks: 40,
            max_step: 0.5,
            gradient_tolerance: 1e-8,
            memory: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeReport {
    pub trajectory: TebTrajectory,
    /// Objective of the input band.
    pub initial_cost: f64,
    pub final_cost: f64,
    /// Objective after every accepted step, one list per round. Each list
    /// starts with the value at the beginning of the round.
    pub trace: Vec<Vec<f64>>,
}

fn pack(t: &TebTrajectory) -> Vec<f64> {
    let mut x = Vec::with_capacity(3 * t.poses.len() + t.dts.len());
    for p in &t.poses {
        x.extend([p.x, p.y, p.theta]);
    }
    x.extend(&t.dts);
    x
}

/// Writes the free variables back; endpoints are never touched.
fn unpack(x: &[f64], t: &mut TebTrajectory) {
    let n = t.poses.len();
    for (i, p) in t.poses.iter_mut().enumerate().take(n - 1).skip(1) {
        p.x = x[3 * i];
        p.y = x[3 * i + 1];
        p.theta = x[3 * i + 2];
    }
    t.dts.copy_from_slice(&x[3 * n..]);
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Two-loop recursion with a diagonal initial inverse Hessian; returns the
/// negated product with `g`.
fn descent_direction(g: &[f64], h0: &[f64], memory: &VecDeque<(Vec<f64>, Vec<f64>)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y) in memory.iter().rev() {
        let rho = 1.0 / dot(y, s);
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push((a, rho));
    }
    for (qi, hi) in q.iter_mut().zip(h0) {
        *qi *= hi;
    }
    for ((s, y), (a, rho)) in memory.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

fn check_finite(f: f64, where_: &str) -> Result<(), TebError> {
    if f.is_finite() {
        Ok(())
    } else {
        Err(TebError::NonFinite(format!("{where_}: objective evaluated to {f}")))
    }
}

/// Deforms the band to lower the objective. The returned band never scores
/// worse than the input and keeps both endpoints bit-identical.
pub fn optimize(
    traj: &TebTrajectory,
    obstacles: &[Point2],
    params: &RoverParams,
    w: &TebWeights,
    cfg: &OptimizerConfig,
) -> Result<OptimizeReport, TebError> {
    traj.validate()?;
    let (initial_cost, _) = objective(traj, obstacles, params, w);
    check_finite(initial_cost, "input trajectory")?;
    let mut cur = traj.clone();
    for dt in &mut cur.dts {
        *dt = dt.max(DT_MIN);
    }
    let mut trace = Vec::with_capacity(cfg.outer_iterations);
    for _ in 0..cfg.outer_iterations {
        cur.resize(cfg.min_segment, cfg.max_segment);
        trace.push(descend(&mut cur, obstacles, params, w, cfg)?);
    }
    let n = cur.poses.len();
    for p in &mut cur.poses[1..n - 1] {
        p.theta = normalize_angle(p.theta);
    }
    let (mut final_cost, _) = objective(&cur, obstacles, params, w);
    check_finite(final_cost, "optimized trajectory")?;
    if final_cost > initial_cost {
        cur = traj.clone();
        final_cost = initial_cost;
    }
    Ok(OptimizeReport {
        trajectory: cur,
        initial_cost,
        final_cost,
        trace,
    })
}

fn descend(
    traj: &mut TebTrajectory,
    obstacles: &[Point2],
    params: &RoverParams,
    w: &TebWeights,
    cfg: &OptimizerConfig,
) -> Result<Vec<f64>, TebError> {
    let np = traj.poses.len();
    let off = 3 * np;
    let free: Vec<bool> = (0..off + traj.dts.len())
        .map(|j| j >= off || (j >= 3 && j < off - 3))
        .collect();
    let mut x = pack(traj);
    let mut scratch = traj.clone();
    let mut eval = |x: &[f64]| {
        unpack(x, &mut scratch);
        evaluate(&scratch, obstacles, params, w)
    };
    let mut e = eval(&x);
    check_finite(e.f, "band")?;
    let mut trace = vec![e.f];
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>)> = VecDeque::new();
    for _ in 0..cfg.inner_iterations {
        if e.grad.iter().all(|v| v.abs() < cfg.gradient_tolerance) {
            break;
        }
        let h0 = preconditioner(&e.diag, &free);
        let mut accepted = None;
        for use_memory in [true, false] {
            if !use_memory && memory.is_empty() {
                continue;
            }
            let mut d = if use_memory {
                descent_direction(&e.grad, &h0, &memory)
            } else {
                descent_direction(&e.grad, &h0, &VecDeque::new())
            };
            for (k, di) in d.iter_mut().enumerate() {
                // endpoints stay put; intervals at the bound cannot shrink
                if !free[k] || (k >= off && x[k] <= DT_MIN && *di < 0.0) {
                    *di = 0.0;
                }
            }
            if dot(&d, &e.grad) >= 0.0 {
                continue;
            }
            let largest = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let mut alpha = (cfg.max_step / largest).min(1.0);
            for _ in 0..cfg.max_backtracks {
                let xn: Vec<f64> = x
                    .iter()
                    .zip(&d)
                    .enumerate()
                    .map(|(k, (xi, di))| {
                        let v = xi + alpha * di;
                        if k >= off { v.max(DT_MIN) } else { v }
                    })
                    .collect();
                let en = eval(&xn);
                let moved: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
                if en.f.is_finite() && en.f <= e.f && en.f <= e.f + cfg.armijo * dot(&e.grad, &moved) {
                    accepted = Some((xn, en, moved));
                    break;
                }
                alpha *= 0.5;
            }
            if accepted.is_some() {
                break;
            }
            memory.clear();
        }
        let Some((xn, en, s)) = accepted else {
            break;
        };
        let y: Vec<f64> = en.grad.iter().zip(&e.grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if cfg.memory > 0 && sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if memory.len() == cfg.memory {
                memory.pop_front();
            }
            memory.push_back((s, y));
        }
        let stalled = e.f - en.f <= 1e-15 * e.f.abs().max(1.0);
        x = xn;
        e = en;
        trace.push(e.f);
        if stalled {
            break;
        }
    }
    unpack(&x, traj);
    Ok(trace)
}

/// Inverse of the Gauss-Newton diagonal, floored so flat directions still move.
fn preconditioner(diag: &[f64], free: &[bool]) -> Vec<f64> {
    let top = diag.iter().fold(0.0f64, |m, v| m.max(*v));
    let floor = (top * 1e-10).max(1e-12);
    diag.iter()
        .zip(free)
        .map(|(d, &f)| if f { 1.0 / d.max(floor) } else { 0.0 })
        .collect()
}
