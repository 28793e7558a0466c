//! End-to-end pipelines: positive vectorial solution, ground-state gate,
//! nonexistence probe, two-solution search and parameter sweeps.

use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants;
use crate::descent::{minimize, DescentSetup, SolverOptions, Stop};
use crate::error::{Error, Result};
use crate::functional::{FiberClass, Functional, PairFn, Params, DEFAULT_ZERO_BAND};
use crate::grid::RadialGrid;
use crate::identities::{check_ground_state_condition_tol, GroundStateVerdict, IdentityReport, ZVector};
use crate::manifold::{classify_sublevel_tol, project_fiber, seed_pair, Sublevel};
use crate::scalar::{solve_scalar, Branch};

/// Minimum share of the total L² mass each component must carry.
pub const VECTORIAL_THRESHOLD: f64 = 1e-6;
const POSITIVE_FLOOR: f64 = -1e-12;
/// Residual level below which a stalled line search still counts as converged.
const STALL_ACCEPT: f64 = 1e-6;

/// Grid, solver settings and the Sobolev constant shared by the pipelines.
#[derive(Debug, Clone)]
pub struct Context {
    pub grid: Arc<RadialGrid>,
    pub opts: SolverOptions,
    pub sobolev_override: Option<f64>,
    /// Tolerance for reproducing `z` from its decomposition. Grid solutions
    /// satisfy the Pohozaev identity only to discretization accuracy.
    pub decompose_tol: f64,
    pub rng_seed: u64,
}

impl Context {
    pub fn new(grid: Arc<RadialGrid>) -> Self {
        Self {
            grid,
            opts: SolverOptions::default(),
            sobolev_override: None,
            decompose_tol: 1e-3,
            rng_seed: crate::io::DEFAULT_SEED,
        }
    }

    pub fn sobolev(&self, p: f64, lambda: f64) -> Result<f64> {
        match self.sobolev_override {
            Some(s) => Ok(s),
            None => constants::sobolev_constant_on(p, lambda, self.grid.r_max(), self.grid.n(), &self.opts),
        }
    }

    fn functional(&self, prm: Params) -> Result<Functional> {
        Functional::new(prm, self.opts.theta_nodes)
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub state: PairFn,
    pub energy: f64,
    pub classification: Sublevel,
    /// Sign class of `h″(1)`.
    pub fiber_class: FiberClass,
    pub identity: IdentityReport,
    pub vectorial: bool,
    pub positive: bool,
    /// Grid-L² residual relative to `‖(u,v)‖_{L²}`.
    pub residual: f64,
    pub h_norm: f64,
    pub iterations: usize,
    pub stop: Stop,
    pub sobolev: f64,
    /// Energy of the scalar solution the run was seeded from.
    pub scalar_energy: f64,
    pub warnings: Vec<String>,
}

/// Everything in a [`SolveOutcome`] except the state itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub energy: f64,
    pub classification: Sublevel,
    pub fiber_class: FiberClass,
    pub identity: IdentityReport,
    pub vectorial: bool,
    pub positive: bool,
    pub residual: f64,
    pub h_norm: f64,
    pub iterations: usize,
    pub stop: Stop,
    pub sobolev: f64,
    pub scalar_energy: f64,
    pub warnings: Vec<String>,
}

impl SolveOutcome {
    pub fn summary(&self) -> SolveSummary {
        SolveSummary {
            energy: self.energy,
            classification: self.classification,
            fiber_class: self.fiber_class,
            identity: self.identity.clone(),
            vectorial: self.vectorial,
            positive: self.positive,
            residual: self.residual,
            h_norm: self.h_norm,
            iterations: self.iterations,
            stop: self.stop,
            sobolev: self.sobolev,
            scalar_energy: self.scalar_energy,
            warnings: self.warnings.clone(),
        }
    }
}

fn accept(stop: Stop, rel: f64) -> bool {
    stop == Stop::Converged || (stop == Stop::Stalled && rel < STALL_ACCEPT)
}

/// Descends from `seed` (canonical frame), lands on the Nehari root of
/// `class`, and packages the result in the caller's frame.
#[allow(clippy::too_many_arguments)]
fn run_pair(
    ctx: &Context,
    prm: &Params,
    canon: &Params,
    swapped: bool,
    seed: &PairFn,
    setup: DescentSetup,
    class: FiberClass,
    scalar_energy: f64,
    mut warnings: Vec<String>,
) -> Result<SolveOutcome> {
    let grid = &ctx.grid;
    let f = ctx.functional(*canon)?;
    let out = minimize(&f, grid, seed.u.values(), seed.v.values(), &setup, &ctx.opts)?;
    if !accept(out.stop, out.rel_residual) {
        return Err(Error::NoConvergence { iterations: out.iterations, residual: out.rel_residual });
    }
    let fib = out.terms.fiber(canon);
    let t = project_fiber(&fib, DEFAULT_ZERO_BAND)?.root(class).ok_or(Error::NoProjection)?;
    let terms = out.terms.scaled(t, canon.p);
    let total = terms.mass.max(1e-300);
    let frac = terms.mass_u.min(terms.mass_v) / total;
    if frac <= VECTORIAL_THRESHOLD {
        return Err(Error::SemitrivialCollapse(frac));
    }
    let mut state = PairFn::from_values(
        grid,
        out.u.iter().map(|x| t * x).collect(),
        out.v.iter().map(|x| t * x).collect(),
    );
    let interior = grid.n() - 1;
    let positive = state.u.values()[..interior].iter().chain(&state.v.values()[..interior]).all(|&x| x > POSITIVE_FLOOR);
    let sobolev = ctx.sobolev(prm.p, prm.lambda)?;
    if swapped {
        state = state.swapped();
    }
    let identity = IdentityReport::from_z(&ZVector::from_terms(&terms, canon), canon);
    let classification = classify_sublevel_tol(&state, prm, sobolev, 1e-7)?;
    let fiber_class = fib.classify(t, DEFAULT_ZERO_BAND);
    if identity.pohozaev_residual > 1e-3 {
        warnings.push(format!("Pohozaev residual {:.3e} exceeds 1e-3", identity.pohozaev_residual));
    }
    if fiber_class != class {
        warnings.push(format!("landed on a {fiber_class:?} root"));
    }
    Ok(SolveOutcome {
        energy: terms.energy(canon),
        classification,
        fiber_class,
        identity,
        vectorial: true,
        positive,
        residual: out.rel_residual,
        h_norm: terms.a(canon).sqrt(),
        iterations: out.iterations,
        stop: out.stop,
        sobolev,
        scalar_energy,
        warnings,
        state,
    })
}

/// Positive-energy vectorial solution: scalar seed mixed at `s_min`, then
/// descent on the `h″ < 0` branch of the Nehari set.
pub fn find_positive_solution(prm: &Params, ctx: &Context) -> Result<SolveOutcome> {
    prm.validate()?;
    let (canon, swapped) = prm.canonical();
    let mut warnings = Vec::new();
    let s = ctx.sobolev(prm.p, prm.lambda)?;
    let l0 = constants::lambda0(prm.p, prm.lambda, s)?;
    if canon.mu11 >= l0 {
        warnings.push(format!("mu11 = {} is not below Lambda0 = {l0:.6e}; existence is not guaranteed", canon.mu11));
    }
    let scalar = solve_scalar(&ctx.grid, &canon, canon.mu11, Branch::Minus, &ctx.opts)?;
    let seed = seed_pair(&scalar.w, &canon);
    run_pair(
        ctx,
        prm,
        &canon,
        swapped,
        &seed,
        DescentSetup::constrained(FiberClass::Minus),
        FiberClass::Minus,
        scalar.energy,
        warnings,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CertVerdict {
    Certified,
    NotApplicable,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    pub verdict: CertVerdict,
    pub sobolev: f64,
    pub lambda0: f64,
    /// Absent outside `[2, 3)` and when the threshold is infinite.
    pub lambda0_bar: Option<f64>,
    pub d0_level: f64,
    pub gate_passed: bool,
    pub reasons: Vec<String>,
    pub c1: Option<bool>,
    pub feasible: Option<bool>,
    pub w_bound: Option<bool>,
    pub w_bound_upper: Option<bool>,
}

/// Parameter gate for the ground-state criterion, then the `(c1)` check on
/// the decomposed solution.
pub fn certify_ground_state(outcome: &SolveOutcome, prm: &Params, ctx: &Context) -> Result<Certification> {
    let s = outcome.sobolev;
    let l0 = constants::lambda0(prm.p, prm.lambda, s)?;
    let d0 = constants::d0_level(prm.p, s)?;
    let mut cert = Certification {
        verdict: CertVerdict::NotApplicable,
        sobolev: s,
        lambda0: l0,
        lambda0_bar: None,
        d0_level: d0,
        gate_passed: false,
        reasons: Vec::new(),
        c1: None,
        feasible: None,
        w_bound: None,
        w_bound_upper: None,
    };
    if !(prm.p >= 2.0 && prm.p < 3.0) {
        cert.reasons.push(format!("p = {} outside [2, 3)", prm.p));
        return Ok(cert);
    }
    let lbar = constants::lambda0_bar(prm.p, prm.lambda, s)?;
    cert.lambda0_bar = Some(lbar).filter(|x| x.is_finite());
    let bound = l0.min(lbar);
    if !(prm.mu11 < bound && prm.mu22 < bound) {
        cert.reasons.push(format!("mu_ii must be below min(Lambda0, Lambda0_bar) = {bound:.6e}"));
    }
    if prm.det() < 0.0 {
        cert.reasons.push("det(mu) < 0".into());
    }
    if !(outcome.energy < d0) {
        cert.reasons.push(format!("J = {} not below D0 = {d0}", outcome.energy));
    }
    if !cert.reasons.is_empty() {
        return Ok(cert);
    }
    cert.gate_passed = true;
    let (canon, _) = prm.canonical();
    let z = ZVector::from_array(outcome.identity.z);
    match check_ground_state_condition_tol(&z, &canon, ctx.decompose_tol) {
        Ok(chk) => {
            cert.c1 = Some(chk.verdict == GroundStateVerdict::InMMinus);
            cert.feasible = Some(chk.feasible);
            cert.w_bound = Some(chk.w_bound);
            cert.w_bound_upper = chk.w_bound_upper;
            cert.verdict = if chk.verdict == GroundStateVerdict::InMMinus {
                CertVerdict::Certified
            } else {
                cert.reasons.push(format!("(c1) quantity {} is not negative", chk.c1_value));
                CertVerdict::Failed
            };
        }
        Err(e) => {
            cert.reasons.push(e.to_string());
            cert.verdict = CertVerdict::Failed;
        }
    }
    Ok(cert)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ProbeVerdict {
    AllDecayed,
    Survivor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub amplitudes: [f64; 2],
    pub widths: [f64; 2],
    pub final_h_norm: f64,
    pub final_energy: f64,
    pub iterations: usize,
    pub stop: Stop,
}

#[derive(Debug, Clone)]
pub struct ProbeOutcome {
    pub verdict: ProbeVerdict,
    pub ratio: f64,
    pub threshold: Option<f64>,
    pub trajectories: Vec<Trajectory>,
    /// First trajectory that did not decay, with its identity report.
    pub survivor: Option<(PairFn, IdentityReport)>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSummary {
    pub verdict: ProbeVerdict,
    pub ratio: f64,
    pub threshold: Option<f64>,
    pub trajectories: Vec<Trajectory>,
    pub survivor_identity: Option<IdentityReport>,
    pub warnings: Vec<String>,
}

impl ProbeOutcome {
    pub fn summary(&self) -> ProbeSummary {
        ProbeSummary {
            verdict: self.verdict,
            ratio: self.ratio,
            threshold: self.threshold,
            trajectories: self.trajectories.clone(),
            survivor_identity: self.survivor.as_ref().map(|(_, r)| r.clone()),
            warnings: self.warnings.clone(),
        }
    }
}

pub const DECAY_FLOOR: f64 = 1e-6;
const RUNAWAY_CAP: f64 = 1e8;

/// Free gradient flow from randomized positive Gaussian pairs. A trajectory
/// survives unless its H-norm falls below [`DECAY_FLOOR`]; negative energy
/// ends it early since `J(0) = 0` and the flow is monotone.
pub fn nonexistence_probe(prm: &Params, n_seeds: usize, ctx: &Context) -> Result<ProbeOutcome> {
    prm.validate()?;
    let mut warnings = Vec::new();
    let ratio = prm.det() / (prm.mu11 + prm.mu22);
    let threshold = if prm.p <= 2.0 { Some(constants::nonexist_threshold(prm.p, prm.lambda)?) } else { None };
    match threshold {
        Some(th) if ratio > th => {}
        Some(th) => warnings.push(format!("det/(mu11+mu22) = {ratio} is not above the threshold {th}")),
        None => warnings.push(format!("no nonexistence threshold for p = {}", prm.p)),
    }
    let grid = &ctx.grid;
    let f = ctx.functional(*prm)?;
    let setup = DescentSetup {
        decay_floor: Some(DECAY_FLOOR),
        norm_cap: Some(RUNAWAY_CAP),
        energy_floor: Some(0.0),
        ..DescentSetup::free()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.rng_seed);
    let seeds: Vec<([f64; 2], [f64; 2])> = (0..n_seeds)
        .map(|_| {
            let amps = [rng.gen_range(0.1..10.0), rng.gen_range(0.1..10.0)];
            let widths = [rng.gen_range(0.5..4.0), rng.gen_range(0.5..4.0)];
            (amps, widths)
        })
        .collect();
    let mut trajectories = Vec::with_capacity(n_seeds);
    let mut survivor = None;
    for (amps, widths) in seeds {
        let gauss = |a: f64, s: f64| -> Vec<f64> { grid.nodes().iter().map(|r| a * (-(r / s).powi(2)).exp()).collect() };
        let out = minimize(&f, grid, &gauss(amps[0], widths[0]), &gauss(amps[1], widths[1]), &setup, &ctx.opts)?;
        let h_norm = out.terms.a(prm).max(0.0).sqrt();
        if out.stop != Stop::Decayed && survivor.is_none() {
            let st = PairFn::from_values(grid, out.u.clone(), out.v.clone());
            let rep = IdentityReport::from_z(&ZVector::from_terms(&out.terms, prm), prm);
            survivor = Some((st, rep));
        }
        trajectories.push(Trajectory {
            amplitudes: amps,
            widths,
            final_h_norm: h_norm,
            final_energy: out.energy,
            iterations: out.iterations,
            stop: out.stop,
        });
    }
    let verdict = if survivor.is_none() { ProbeVerdict::AllDecayed } else { ProbeVerdict::Survivor };
    Ok(ProbeOutcome { verdict, ratio, threshold, trajectories, survivor, warnings })
}

#[derive(Debug, Clone)]
pub struct TwoSolutions {
    pub first: SolveOutcome,
    pub second: SolveOutcome,
    /// `J(√s_min w₂, √(1−s_min) w₂)` for the negative-energy scalar solution `w₂`.
    pub seed_energy: f64,
    pub scalar_energy_minus: f64,
    pub scalar_energy_plus: f64,
}

/// Positive-energy solution plus a negative-energy global minimizer.
pub fn find_two_solutions(prm: &Params, ctx: &Context) -> Result<TwoSolutions> {
    prm.validate()?;
    if prm.p >= 2.0 {
        return Err(Error::BranchUnavailable(format!("two solutions need p < 2, got {}", prm.p)));
    }
    let first = find_positive_solution(prm, ctx)?;
    let (canon, swapped) = prm.canonical();
    let mut warnings = Vec::new();
    if canon.det() <= 0.0 {
        warnings.push("det(mu) is not positive".into());
    }
    let scalar = solve_scalar(&ctx.grid, &canon, canon.mu11, Branch::Plus, &ctx.opts)?;
    let seed = seed_pair(&scalar.w, &canon);
    let seed_energy = ctx.functional(canon)?.state_terms(&seed).energy(&canon);
    let second = run_pair(
        ctx,
        prm,
        &canon,
        swapped,
        &seed,
        DescentSetup::free(),
        FiberClass::Plus,
        scalar.energy,
        warnings,
    )?;
    if !(second.energy < 0.0 && 0.0 < first.energy) {
        return Err(Error::OrderingViolation { first: first.energy, second: second.energy });
    }
    Ok(TwoSolutions { scalar_energy_minus: first.scalar_energy, scalar_energy_plus: scalar.energy, first, second, seed_energy })
}

/// Which pipelines a sweep runs in each cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepTasks {
    pub solve: bool,
    pub certify: bool,
    pub nonexist: bool,
    pub two_solutions: bool,
}

impl Default for SweepTasks {
    fn default() -> Self {
        Self { solve: true, certify: true, nonexist: false, two_solutions: false }
    }
}

/// Cartesian parameter grid. Cells are enumerated with `p` outermost and
/// `mu12` innermost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub p: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu11: Vec<f64>,
    pub mu22: Vec<f64>,
    pub mu12: Vec<f64>,
    #[serde(default)]
    pub tasks: SweepTasks,
    #[serde(default = "default_seeds")]
    pub n_seeds: usize,
}

fn default_seeds() -> usize {
    10
}

impl SweepSpec {
    pub fn cells(&self) -> Vec<[f64; 5]> {
        let mut out = Vec::new();
        for &p in &self.p {
            for &l in &self.lambda {
                for &a in &self.mu11 {
                    for &b in &self.mu22 {
                        for &c in &self.mu12 {
                            out.push([p, l, a, b, c]);
                        }
                    }
                }
            }
        }
        out
    }
}

/// One CSV row of a sweep. Empty fields mean "not run" or "not defined".
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p: f64,
    pub lambda: f64,
    pub mu11: f64,
    pub mu22: f64,
    pub mu12: f64,
    pub sobolev: Option<f64>,
    pub lambda0: Option<f64>,
    pub lambda0_bar: Option<f64>,
    pub d0_level: Option<f64>,
    pub det_ratio: f64,
    pub nonexist_threshold: Option<f64>,
    pub solve_status: String,
    pub energy: Option<f64>,
    pub residual: Option<f64>,
    pub nehari_residual: Option<f64>,
    pub pohozaev_residual: Option<f64>,
    pub classification: Option<String>,
    pub certification: Option<String>,
    pub probe: Option<String>,
    pub second_energy: Option<f64>,
    pub two_status: Option<String>,
    pub error: Option<String>,
}

pub const SWEEP_HEADER: [&str; 22] = [
    "p",
    "lambda",
    "mu11",
    "mu22",
    "mu12",
    "sobolev",
    "lambda0",
    "lambda0_bar",
    "d0_level",
    "det_ratio",
    "nonexist_threshold",
    "solve_status",
    "energy",
    "residual",
    "nehari_residual",
    "pohozaev_residual",
    "classification",
    "certification",
    "probe",
    "second_energy",
    "two_status",
    "error",
];

fn label<T: Serialize>(x: &T) -> String {
    serde_json::to_value(x).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
}

fn run_cell(cell: [f64; 5], spec: &SweepSpec, ctx: &Context) -> SweepRow {
    let [p, lambda, mu11, mu22, mu12] = cell;
    let mut row = SweepRow {
        p,
        lambda,
        mu11,
        mu22,
        mu12,
        det_ratio: (mu11 * mu22 - mu12 * mu12) / (mu11 + mu22),
        solve_status: "skipped".into(),
        ..SweepRow::default()
    };
    let mut errors: Vec<String> = Vec::new();
    let prm = match Params::new(lambda, p, mu11, mu22, mu12) {
        Ok(prm) => prm,
        Err(e) => {
            row.solve_status = "invalid".into();
            row.error = Some(e.to_string());
            return row;
        }
    };
    match ctx.sobolev(p, lambda) {
        Ok(s) => {
            row.sobolev = Some(s);
            row.lambda0 = constants::lambda0(p, lambda, s).ok();
            row.lambda0_bar = constants::lambda0_bar(p, lambda, s).ok().filter(|x| x.is_finite());
            row.d0_level = constants::d0_level(p, s).ok();
        }
        Err(e) => errors.push(format!("sobolev: {e}")),
    }
    row.nonexist_threshold = constants::nonexist_threshold(p, lambda).ok();

    if spec.tasks.solve || spec.tasks.certify {
        match find_positive_solution(&prm, ctx) {
            Ok(out) => {
                row.solve_status = "converged".into();
                row.energy = Some(out.energy);
                row.residual = Some(out.residual);
                row.nehari_residual = Some(out.identity.nehari_residual);
                row.pohozaev_residual = Some(out.identity.pohozaev_residual);
                row.classification = Some(label(&out.classification));
                if spec.tasks.certify {
                    match certify_ground_state(&out, &prm, ctx) {
                        Ok(c) => row.certification = Some(label(&c.verdict)),
                        Err(e) => errors.push(format!("certify: {e}")),
                    }
                }
            }
            Err(e) => {
                row.solve_status = "failed".into();
                errors.push(format!("solve: {e}"));
            }
        }
    }
    if spec.tasks.nonexist {
        match nonexistence_probe(&prm, spec.n_seeds, ctx) {
            Ok(pr) => row.probe = Some(label(&pr.verdict)),
            Err(e) => errors.push(format!("probe: {e}")),
        }
    }
    if spec.tasks.two_solutions {
        match find_two_solutions(&prm, ctx) {
            Ok(two) => {
                row.second_energy = Some(two.second.energy);
                row.two_status = Some("ok".into());
            }
            Err(e) => {
                row.two_status = Some("failed".into());
                errors.push(format!("two-solutions: {e}"));
            }
        }
    }
    if !errors.is_empty() {
        row.error = Some(errors.join("; "));
    }
    row
}

/// Runs every cell (in parallel on the current rayon pool) and returns rows
/// in cell order.
pub fn sweep(spec: &SweepSpec, ctx: &Context) -> Vec<SweepRow> {
    spec.cells().into_par_iter().map(|cell| run_cell(cell, spec, ctx)).collect()
}

/// Writes rows as CSV; the header is written even when there are no rows.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(SWEEP_HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// `‖x‖²_{L²}` share of the smaller component.
pub fn component_fraction(state: &PairFn) -> f64 {
    let (a, b) = (state.u.l2_norm_sq(), state.v.l2_norm_sq());
    a.min(b) / (a + b).max(1e-300)
}

/// Largest absolute nodal value of either component.
pub fn peak(state: &PairFn) -> f64 {
    state.u.values().iter().chain(state.v.values()).fold(0.0f64, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn ctx() -> Context {
        Context::new(make_grid(20.0, 800).unwrap())
    }

    #[test]
    fn certify_not_applicable_below_two() {
        let c = ctx();
        let prm = Params::new(1.0, 1.8, 1e-5, 2e-5, 1e-5).unwrap();
        let out = find_positive_solution(&prm, &c).unwrap();
        let cert = certify_ground_state(&out, &prm, &c).unwrap();
        assert_eq!(cert.verdict, CertVerdict::NotApplicable);
    }

    #[test]
    fn gate_needs_mu_below_lambda0_even_when_bar_is_infinite() {
        let c = ctx();
        let prm = Params::new(1.0, 2.5, 0.05, 0.1, 0.05).unwrap();
        let out = find_positive_solution(&prm, &c).unwrap();
        let cert = certify_ground_state(&out, &prm, &c).unwrap();
        assert!(cert.lambda0_bar.is_none());
        assert!(prm.mu11 > cert.lambda0);
        assert_eq!(cert.verdict, CertVerdict::NotApplicable);
        assert!(!cert.gate_passed);
    }

    #[test]
    fn swapped_parameters_give_swapped_state() {
        let c = ctx();
        let a = Params::new(1.0, 2.5, 0.002, 0.003, 0.001).unwrap();
        let b = Params::new(1.0, 2.5, 0.003, 0.002, 0.001).unwrap();
        let sa = find_positive_solution(&a, &c).unwrap();
        let sb = find_positive_solution(&b, &c).unwrap();
        assert_eq!(sa.energy, sb.energy);
        assert_eq!(sa.state.u.values(), sb.state.v.values());
        assert_eq!(sa.state.v.values(), sb.state.u.values());
    }

    #[test]
    fn empty_sweep_is_header_only() {
        let spec = SweepSpec {
            p: vec![],
            lambda: vec![1.0],
            mu11: vec![0.1],
            mu22: vec![0.1],
            mu12: vec![0.1],
            tasks: SweepTasks::default(),
            n_seeds: 1,
        };
        let rows = sweep(&spec, &ctx());
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("p,lambda,mu11"));
    }

    #[test]
    fn invalid_cell_is_recorded_not_fatal() {
        let spec = SweepSpec {
            p: vec![3.5, 2.5],
            lambda: vec![1.0],
            mu11: vec![0.002],
            mu22: vec![0.003],
            mu12: vec![0.001],
            tasks: SweepTasks { solve: true, certify: false, nonexist: false, two_solutions: false },
            n_seeds: 1,
        };
        let rows = sweep(&spec, &ctx());
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].solve_status, "invalid");
        assert!(rows[0].error.is_some());
        assert_eq!(rows[1].solve_status, "converged");
    }
}
