//! H¹-preconditioned descent for the discrete energy, optionally restricted
//! to one branch of the Nehari set.
//!
//! Directions are Riesz representatives of the gradient in the `H¹_λ` inner
//! product (one tridiagonal solve per component), combined Polak–Ribière
//! style. In constrained mode every trial point is rescaled along its ray
//! onto the requested fibering root, so iterates stay on the manifold and the
//! energy along the path is the reduced functional `J(t(x)·x)`, whose
//! gradient on the manifold coincides with that of `J`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{
    residual_l2, Evaluation, FiberClass, Functional, SplitGradient, Terms, DEFAULT_ZERO_BAND,
};
use crate::grid::{RadialGrid, FOUR_PI};
use crate::manifold::project_fiber;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub theta_nodes: usize,
    pub max_iter: usize,
    /// Stop once the grid-L² residual drops below this multiple of `‖x‖_{L²}`.
    pub residual_tol: f64,
    /// Relative energy change allowed over `stall_window` iterations at convergence.
    pub energy_tol: f64,
    pub stall_window: usize,
    /// Use conjugate directions instead of plain preconditioned steepest descent.
    pub conjugate: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            theta_nodes: crate::angular::DEFAULT_THETA_NODES,
            max_iter: 20_000,
            residual_tol: 1e-8,
            energy_tol: 1e-12,
            stall_window: 10,
            conjugate: true,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 || !(self.residual_tol > 0.0) || !(self.energy_tol >= 0.0) {
            return Err(Error::Config("solver tolerances and iteration cap must be positive".into()));
        }
        crate::angular::ThetaQuadrature::new(self.theta_nodes).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Constraint {
    Free,
    /// Stay on the Nehari root of this class along every ray.
    Nehari(FiberClass),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentSetup {
    pub constraint: Constraint,
    /// Replace iterates by their absolute value.
    pub positive: bool,
    /// Stop (as `Runaway`) once `‖x‖_H` exceeds this.
    pub norm_cap: Option<f64>,
    /// Stop (as `Decayed`) once `‖x‖_H` falls below this.
    pub decay_floor: Option<f64>,
    /// Stop (as `Trapped`) once the energy drops below this.
    pub energy_floor: Option<f64>,
}

impl DescentSetup {
    pub fn constrained(class: FiberClass) -> Self {
        Self { constraint: Constraint::Nehari(class), positive: true, norm_cap: None, decay_floor: None, energy_floor: None }
    }

    pub fn free() -> Self {
        Self { constraint: Constraint::Free, positive: true, norm_cap: None, decay_floor: None, energy_floor: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stop {
    Converged,
    /// The line search could not decrease the energy any further.
    Stalled,
    MaxIter,
    Decayed,
    Runaway,
    /// Energy went below the floor; a monotone flow cannot reach zero from there.
    Trapped,
}

#[derive(Debug, Clone)]
pub struct DescentOutcome {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub terms: Terms,
    pub energy: f64,
    /// Grid-L² norm of the strong residual.
    pub residual: f64,
    /// `residual / ‖x‖_{L²}`.
    pub rel_residual: f64,
    pub iterations: usize,
    pub stop: Stop,
}

struct Point {
    u: Vec<f64>,
    v: Vec<f64>,
    ev: Evaluation,
    energy: f64,
    /// Ray scaling applied to land on the manifold (1 when free).
    scale: f64,
}

impl Point {
    /// Derivative of the path energy at this point along `−dir`.
    fn slope_along(&self, dir: &(Vec<f64>, Vec<f64>)) -> f64 {
        -self.scale * (dot(&self.ev.grad_u, &dir.0) + dot(&self.ev.grad_v, &dir.1))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn energy_scale(t: &Terms, f: &Functional) -> f64 {
    let prm = f.params();
    (0.5 * t.a(prm)).abs() + (0.25 * t.b(prm)).abs() + (t.c() / (prm.p + 1.0)).abs()
}

/// Evaluates a trial point, rescaling it onto the manifold when constrained.
fn make_point(
    f: &Functional,
    grid: &RadialGrid,
    mut u: Vec<f64>,
    mut v: Vec<f64>,
    setup: &DescentSetup,
) -> Result<Point> {
    let n = grid.n();
    u[n - 1] = 0.0;
    v[n - 1] = 0.0;
    if setup.positive {
        u.iter_mut().for_each(|x| *x = x.abs());
        v.iter_mut().for_each(|x| *x = x.abs());
    }
    let split: SplitGradient = f.evaluate_split(grid, &u, &v);
    let t = match setup.constraint {
        Constraint::Free => 1.0,
        Constraint::Nehari(class) => {
            let proj = project_fiber(&split.terms.fiber(f.params()), DEFAULT_ZERO_BAND)?;
            proj.root(class).ok_or(Error::NoProjection)?
        }
    };
    let mut ev = split.at_scale(t);
    if t != 1.0 {
        u.iter_mut().for_each(|x| *x *= t);
        v.iter_mut().for_each(|x| *x *= t);
    }
    ev.grad_u[n - 1] = 0.0;
    ev.grad_v[n - 1] = 0.0;
    let energy = ev.terms.energy(f.params());
    Ok(Point { u, v, ev, energy, scale: t })
}

fn l2_norm(grid: &RadialGrid, u: &[f64], v: &[f64]) -> f64 {
    let s: f64 = grid.weights().iter().zip(u.iter().zip(v)).map(|(w, (a, b))| w * (a * a + b * b)).sum();
    (FOUR_PI * s).sqrt()
}

/// Step length along `−dir` satisfying sufficient decrease and a curvature
/// condition. Near convergence, energy differences drop below roundoff, so
/// the approximate form (energy within `slack`, slope condition only) is
/// also accepted; the slope itself carries no cancellation.
#[allow(clippy::too_many_arguments)]
fn line_search(
    f: &Functional,
    grid: &RadialGrid,
    x: &Point,
    dir: &(Vec<f64>, Vec<f64>),
    slope: f64,
    slack: f64,
    tau0: f64,
    setup: &DescentSetup,
) -> Result<Option<(Point, f64)>> {
    const C1: f64 = 1e-4;
    const SIGMA: f64 = 0.1;
    const MAX_TRIALS: usize = 40;
    let s0 = -slope;
    let (mut lo, mut hi) = (0.0, f64::INFINITY);
    let mut tau = tau0;
    let mut best: Option<(Point, f64)> = None;
    for _ in 0..MAX_TRIALS {
        let yu: Vec<f64> = x.u.iter().zip(&dir.0).map(|(a, d)| a - tau * d).collect();
        let yv: Vec<f64> = x.v.iter().zip(&dir.1).map(|(a, d)| a - tau * d).collect();
        let y = match make_point(f, grid, yu, yv, setup) {
            Ok(y) if y.energy.is_finite() => Some(y),
            Ok(_) | Err(Error::NoProjection) => None,
            Err(e) => return Err(e),
        };
        let Some(y) = y else {
            hi = tau;
            tau = 0.5 * (lo + hi);
            continue;
        };
        let sy = y.slope_along(dir);
        let armijo = y.energy <= x.energy + C1 * tau * s0;
        let decreased = armijo || y.energy <= x.energy + slack;
        if decreased && sy.abs() <= SIGMA * s0.abs() {
            return Ok(Some((y, tau)));
        }
        if decreased && best.as_ref().map_or(true, |(b, _)| y.energy < b.energy) {
            best = Some((y, tau));
        }
        // Secant estimate of the zero of the path slope, safeguarded.
        let secant = if s0 != sy { tau * s0 / (s0 - sy) } else { f64::NAN };
        if !decreased || sy > 0.0 {
            hi = tau;
        } else {
            lo = tau;
        }
        let next = if hi.is_finite() {
            if secant.is_finite() && secant > lo + 0.1 * (hi - lo) && secant < hi - 0.1 * (hi - lo) {
                secant
            } else {
                0.5 * (lo + hi)
            }
        } else if secant.is_finite() && secant > tau {
            secant.min(8.0 * tau)
        } else {
            4.0 * tau
        };
        if hi.is_finite() && (hi - lo) <= 1e-14 * hi.max(1e-300) {
            break;
        }
        tau = next;
    }
    Ok(best.filter(|(b, _)| b.energy < x.energy || (b.energy <= x.energy + slack)))
}

/// Minimizes the discrete energy from `(u0, v0)`.
pub fn minimize(
    f: &Functional,
    grid: &RadialGrid,
    u0: &[f64],
    v0: &[f64],
    setup: &DescentSetup,
    opts: &SolverOptions,
) -> Result<DescentOutcome> {
    let lambda = f.params().lambda;
    let mut x = make_point(f, grid, u0.to_vec(), v0.to_vec(), setup)?;
    let mut tau = 1.0;
    let mut prev_dir: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut prev_gd = 0.0;
    let mut prev_pre: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut history: Vec<f64> = vec![x.energy];
    let mut stop = Stop::MaxIter;
    let mut iterations = 0;

    for it in 0..opts.max_iter {
        iterations = it;
        let res = residual_l2(grid, &x.ev.grad_u, &x.ev.grad_v, true);
        let xnorm = l2_norm(grid, &x.u, &x.v);
        let h_norm = x.ev.terms.a(f.params()).max(0.0).sqrt();
        if let Some(floor) = setup.decay_floor {
            if h_norm < floor {
                stop = Stop::Decayed;
                break;
            }
        }
        if let Some(cap) = setup.norm_cap {
            if h_norm > cap || !h_norm.is_finite() {
                stop = Stop::Runaway;
                break;
            }
        }
        if let Some(floor) = setup.energy_floor {
            if x.energy < floor {
                stop = Stop::Trapped;
                break;
            }
        }
        let flat = history.len() > opts.stall_window && {
            let old = history[history.len() - 1 - opts.stall_window];
            (old - x.energy).abs() <= opts.energy_tol * x.energy.abs().max(1e-300)
        };
        if res <= opts.residual_tol * xnorm && (flat || res == 0.0) {
            stop = Stop::Converged;
            break;
        }

        // Riesz representative of the gradient.
        let du = grid.solve_gram(lambda, &x.ev.grad_u);
        let dv = grid.solve_gram(lambda, &x.ev.grad_v);
        let (du, dv): (Vec<f64>, Vec<f64>) =
            (du.iter().map(|d| d / FOUR_PI).collect(), dv.iter().map(|d| d / FOUR_PI).collect());
        let gd = dot(&x.ev.grad_u, &du) + dot(&x.ev.grad_v, &dv);
        if gd <= 0.0 {
            stop = Stop::Converged;
            break;
        }

        let mut dir = (du.clone(), dv.clone());
        if opts.conjugate {
            if let (Some((pu, pv)), Some((qu, qv))) = (&prev_dir, &prev_pre) {
                let num = gd - dot(&x.ev.grad_u, qu) - dot(&x.ev.grad_v, qv);
                let beta = (num / prev_gd).max(0.0);
                if beta > 0.0 && it % 100 != 0 {
                    let cand_u: Vec<f64> = du.iter().zip(pu).map(|(d, p)| d + beta * p).collect();
                    let cand_v: Vec<f64> = dv.iter().zip(pv).map(|(d, p)| d + beta * p).collect();
                    if dot(&x.ev.grad_u, &cand_u) + dot(&x.ev.grad_v, &cand_v) > 0.0 {
                        dir = (cand_u, cand_v);
                    }
                }
            }
        }
        let mut slope = dot(&x.ev.grad_u, &dir.0) + dot(&x.ev.grad_v, &dir.1);
        let slack = 1e-13 * energy_scale(&x.ev.terms, f);

        let mut accepted = line_search(f, grid, &x, &dir, slope, slack, tau, setup)?;
        if accepted.is_none() && opts.conjugate && dir.0 != du {
            // Retry along the plain preconditioned gradient.
            dir = (du.clone(), dv.clone());
            slope = gd;
            accepted = line_search(f, grid, &x, &dir, slope, slack, 1.0, setup)?;
        }
        let Some((y, step)) = accepted else {
            stop = Stop::Stalled;
            break;
        };
        tau = step;
        prev_gd = gd;
        prev_pre = Some((du, dv));
        prev_dir = Some(dir);
        x = y;
        history.push(x.energy);
        iterations = it + 1;
    }

    let res = residual_l2(grid, &x.ev.grad_u, &x.ev.grad_v, true);
    let xnorm = l2_norm(grid, &x.u, &x.v);
    Ok(DescentOutcome {
        terms: x.ev.terms,
        energy: x.energy,
        residual: res,
        rel_residual: if xnorm > 0.0 { res / xnorm } else { 0.0 },
        iterations,
        stop,
        u: x.u,
        v: x.v,
    })
}
