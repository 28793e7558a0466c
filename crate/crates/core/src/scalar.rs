//! Positive radial solutions of the single-component problem
//! `−Δw + λw + μ φ_w w = |w|^{p−1} w`.
//!
//! The positive-energy solution minimizes over the `h″ < 0` branch of the
//! Nehari set; the negative-energy one (only for `p < 2`, where the energy is
//! coercive) is a global minimizer.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::descent::{minimize, DescentSetup, SolverOptions, Stop};
use crate::error::{Error, Result};
use crate::functional::{FiberClass, Functional, Params, Terms, DEFAULT_ZERO_BAND};
use crate::grid::{RadialFn, RadialGrid};
use crate::manifold::project_fiber;

/// Residual level below which a stalled line search still counts as a solution.
const STALL_ACCEPT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Branch {
    Minus,
    Plus,
}

#[derive(Debug, Clone)]
pub struct ScalarSolveResult {
    pub w: RadialFn,
    pub energy: f64,
    pub nehari_class: FiberClass,
    /// Grid-L² residual relative to `‖w‖_{L²}`.
    pub residual_norm: f64,
    /// `|‖w‖² + μ∫φ_w w² − ∫|w|^{p+1}| / ‖w‖²`.
    pub nehari_residual: f64,
    pub h1_norm_sq: f64,
    pub iterations: usize,
    pub stop: Stop,
}

fn gaussian(grid: &RadialGrid, sigma: f64) -> Vec<f64> {
    grid.nodes().iter().map(|r| (-(r / sigma).powi(2)).exp()).collect()
}

/// Gaussian widths tried for the initial ray, in order.
const WIDTHS: [f64; 8] = [1.0, 2.0, 0.5, 4.0, 0.25, 8.0, 0.125, 16.0];

pub fn solve_scalar(
    grid: &Arc<RadialGrid>,
    prm: &Params,
    mu: f64,
    branch: Branch,
    opts: &SolverOptions,
) -> Result<ScalarSolveResult> {
    let sprm = Params::scalar(prm.lambda, prm.p, mu)?;
    if branch == Branch::Plus && prm.p >= 2.0 {
        return Err(Error::BranchUnavailable(format!(
            "the negative-energy branch needs p < 2, got p = {}",
            prm.p
        )));
    }
    let f = Functional::new(sprm, opts.theta_nodes)?;
    let zeros = vec![0.0; grid.n()];

    let seed = match branch {
        Branch::Minus => WIDTHS.iter().find_map(|&s| {
            let w = gaussian(grid, s);
            let fib = f.terms(grid, &w, &zeros).fiber(&sprm);
            let t = project_fiber(&fib, DEFAULT_ZERO_BAND).ok()?.t_minus?;
            Some(w.iter().map(|x| t * x).collect::<Vec<f64>>())
        }),
        Branch::Plus => WIDTHS.iter().find_map(|&s| {
            let w = gaussian(grid, s);
            let fib = f.terms(grid, &w, &zeros).fiber(&sprm);
            let t = project_fiber(&fib, DEFAULT_ZERO_BAND).ok()?.t_plus?;
            (fib.h(t) < 0.0).then(|| w.iter().map(|x| t * x).collect::<Vec<f64>>())
        }),
    }
    .ok_or_else(|| Error::BranchUnavailable(format!("no Gaussian ray reaches the {branch:?} branch at mu = {mu}")))?;

    let setup = match branch {
        Branch::Minus => DescentSetup::constrained(FiberClass::Minus),
        Branch::Plus => DescentSetup::free(),
    };
    let out = minimize(&f, grid, &seed, &zeros, &setup, opts)?;
    let ok = out.stop == Stop::Converged || (out.stop == Stop::Stalled && out.rel_residual < STALL_ACCEPT);
    if !ok {
        return Err(Error::NoConvergence { iterations: out.iterations, residual: out.rel_residual });
    }

    // Land exactly on the Nehari root of the matching class.
    let class = match branch {
        Branch::Minus => FiberClass::Minus,
        Branch::Plus => FiberClass::Plus,
    };
    let fib = out.terms.fiber(&sprm);
    let t = project_fiber(&fib, DEFAULT_ZERO_BAND)?.root(class).ok_or(Error::NoProjection)?;
    let values: Vec<f64> = out.u.iter().map(|x| t * x).collect();
    let terms: Terms = out.terms.scaled(t, sprm.p);
    let a = terms.a(&sprm);
    let nehari_class = fib.classify(t, DEFAULT_ZERO_BAND);
    Ok(ScalarSolveResult {
        w: RadialFn::from_parts(grid.clone(), values),
        energy: terms.energy(&sprm),
        nehari_class,
        residual_norm: out.rel_residual,
        nehari_residual: terms.nehari(&sprm).abs() / a.max(1e-300),
        h1_norm_sq: a,
        iterations: out.iterations,
        stop: out.stop,
    })
}
