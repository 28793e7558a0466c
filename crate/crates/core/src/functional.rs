//! Energy functional, its gradient, the Nehari value and the fibering map.
//!
//! With `A = ‖(u,v)‖²_H`, `B = ∫ μ₁₁φ_u u² + μ₂₂φ_v v² − 2μ₁₂φ_v u²` and
//! `C = ∫ ⟨|u + e^{iθ}v|^{p+1}⟩_θ`, the energy is
//! `J = A/2 + B/4 − C/(p+1)` and along a ray `h(t) = J(tu, tv)` the three
//! parts scale as `t²`, `t⁴` and `t^{p+1}`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::angular::{ThetaQuadrature, DEFAULT_THETA_NODES};
use crate::error::{Error, Result};
use crate::grid::{RadialFn, RadialGrid, FOUR_PI};
use crate::hartree::potential_values;

/// Relative width of the band around `h″ = 0` classified as degenerate.
pub const DEFAULT_ZERO_BAND: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub lambda: f64,
    pub p: f64,
    pub mu11: f64,
    pub mu22: f64,
    pub mu12: f64,
}

impl Params {
    pub fn new(lambda: f64, p: f64, mu11: f64, mu22: f64, mu12: f64) -> Result<Self> {
        let prm = Self { lambda, p, mu11, mu22, mu12 };
        prm.validate()?;
        Ok(prm)
    }

    /// Parameters of the single-component problem: `v ≡ 0` and `μ₁₁ = mu`.
    /// `mu = 0` is allowed and gives the plain power nonlinearity.
    pub fn scalar(lambda: f64, p: f64, mu: f64) -> Result<Self> {
        check_lambda_p(lambda, p)?;
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(Error::Config(format!("mu must be nonnegative, got {mu}")));
        }
        Ok(Self { lambda, p, mu11: mu, mu22: 0.0, mu12: 0.0 })
    }

    pub fn validate(&self) -> Result<()> {
        check_lambda_p(self.lambda, self.p)?;
        for (name, mu) in [("mu11", self.mu11), ("mu22", self.mu22), ("mu12", self.mu12)] {
            if !(mu.is_finite() && mu > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {mu}")));
            }
        }
        Ok(())
    }

    /// `μ₁₁μ₂₂ − μ₁₂²`
    pub fn det(&self) -> f64 {
        self.mu11 * self.mu22 - self.mu12 * self.mu12
    }

    /// The same problem with components relabelled so that `μ₁₁ ≤ μ₂₂`, and
    /// whether a swap happened.
    pub fn canonical(&self) -> (Params, bool) {
        if self.mu11 <= self.mu22 {
            (*self, false)
        } else {
            (Params { mu11: self.mu22, mu22: self.mu11, ..*self }, true)
        }
    }
}

fn check_lambda_p(lambda: f64, p: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Config(format!("lambda must be positive, got {lambda}")));
    }
    if !(p > 1.0 && p < 3.0) {
        return Err(Error::Config(format!("p must lie in (1, 3), got {p}")));
    }
    Ok(())
}

/// A two-component state on one grid.
#[derive(Debug, Clone)]
pub struct PairFn {
    pub u: RadialFn,
    pub v: RadialFn,
}

impl PairFn {
    pub fn new(u: RadialFn, v: RadialFn) -> Result<Self> {
        if !u.same_grid(&v) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { u, v })
    }

    pub fn zeros(grid: &Arc<RadialGrid>) -> Self {
        Self { u: grid.zeros(), v: grid.zeros() }
    }

    pub(crate) fn from_values(grid: &Arc<RadialGrid>, u: Vec<f64>, v: Vec<f64>) -> Self {
        Self { u: RadialFn::from_parts(grid.clone(), u), v: RadialFn::from_parts(grid.clone(), v) }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        self.u.grid()
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self { u: self.u.scaled(t), v: self.v.scaled(t) }
    }

    pub fn swapped(&self) -> Self {
        Self { u: self.v.clone(), v: self.u.clone() }
    }

    /// `‖(u,v)‖²_H = ∫ |∇u|² + |∇v|² + λ(u² + v²)`.
    pub fn h_norm_sq(&self, lambda: f64) -> f64 {
        let g = self.grid();
        g.gradient_sq(self.u.values())
            + g.gradient_sq(self.v.values())
            + lambda * (self.u.l2_norm_sq() + self.v.l2_norm_sq())
    }
}

/// The integrals from which every scalar quantity of a state is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Terms {
    /// `∫ |∇u|² + |∇v|²`
    pub grad: f64,
    /// `∫ u² + v²` (without λ)
    pub mass: f64,
    pub mass_u: f64,
    pub mass_v: f64,
    /// `∫ φ_u u²`
    pub z3: f64,
    /// `∫ φ_v v²`
    pub z4: f64,
    /// `∫ φ_v u²`
    pub z5: f64,
    /// `∫ ⟨|u + e^{iθ}v|^{p+1}⟩_θ`
    pub z6: f64,
}

impl Terms {
    pub fn a(&self, prm: &Params) -> f64 {
        self.grad + prm.lambda * self.mass
    }

    pub fn b(&self, prm: &Params) -> f64 {
        prm.mu11 * self.z3 + prm.mu22 * self.z4 - 2.0 * prm.mu12 * self.z5
    }

    pub fn c(&self) -> f64 {
        self.z6
    }

    pub fn energy(&self, prm: &Params) -> f64 {
        0.5 * self.a(prm) + 0.25 * self.b(prm) - self.c() / (prm.p + 1.0)
    }

    pub fn nehari(&self, prm: &Params) -> f64 {
        self.a(prm) + self.b(prm) - self.c()
    }

    pub fn fiber(&self, prm: &Params) -> Fiber {
        Fiber { a: self.a(prm), b: self.b(prm), c: self.c(), p: prm.p }
    }
}

/// Terms plus the nodal gradient `∂J/∂u_k`, `∂J/∂v_k`.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub terms: Terms,
    pub grad_u: Vec<f64>,
    pub grad_v: Vec<f64>,
}

/// Nodal gradient split by homogeneity degree, so that the gradient at
/// `t·x` is `t·lin + t³·quart − t^p·pow` without re-evaluating.
#[derive(Debug, Clone)]
pub struct SplitGradient {
    pub terms: Terms,
    lin: [Vec<f64>; 2],
    quart: [Vec<f64>; 2],
    pow: [Vec<f64>; 2],
    p: f64,
}

impl SplitGradient {
    /// Terms and gradient of the scaled state `t·x`.
    pub fn at_scale(&self, t: f64) -> Evaluation {
        let (t3, tp) = (t * t * t, t.powf(self.p));
        let comp = |k: usize| -> Vec<f64> {
            self.lin[k]
                .iter()
                .zip(&self.quart[k])
                .zip(&self.pow[k])
                .map(|((l, q), w)| t * l + t3 * q - tp * w)
                .collect()
        };
        Evaluation { terms: self.terms.scaled(t, self.p), grad_u: comp(0), grad_v: comp(1) }
    }
}

impl Terms {
    /// Terms of `t·x` from those of `x`.
    pub fn scaled(&self, t: f64, p: f64) -> Terms {
        let (t2, t4, tp1) = (t * t, t.powi(4), t.powf(p + 1.0));
        Terms {
            grad: t2 * self.grad,
            mass: t2 * self.mass,
            mass_u: t2 * self.mass_u,
            mass_v: t2 * self.mass_v,
            z3: t4 * self.z3,
            z4: t4 * self.z4,
            z5: t4 * self.z5,
            z6: tp1 * self.z6,
        }
    }
}

/// Evaluates the discrete functional for one parameter set and θ rule.
///
/// The θ rule is fixed so that the discrete energy and its gradient are
/// exactly consistent.
#[derive(Debug, Clone)]
pub struct Functional {
    prm: Params,
    quad: ThetaQuadrature,
}

impl Functional {
    pub fn new(prm: Params, theta_nodes: usize) -> Result<Self> {
        Ok(Self { prm, quad: ThetaQuadrature::new(theta_nodes)? })
    }

    pub fn with_defaults(prm: Params) -> Self {
        Self::new(prm, DEFAULT_THETA_NODES).expect("default theta rule is valid")
    }

    pub fn params(&self) -> &Params {
        &self.prm
    }

    pub fn terms(&self, grid: &RadialGrid, u: &[f64], v: &[f64]) -> Terms {
        self.run(grid, u, v, false).terms
    }

    pub fn evaluate(&self, grid: &RadialGrid, u: &[f64], v: &[f64]) -> Evaluation {
        self.run(grid, u, v, true).at_scale(1.0)
    }

    pub fn evaluate_split(&self, grid: &RadialGrid, u: &[f64], v: &[f64]) -> SplitGradient {
        self.run(grid, u, v, true)
    }

    pub fn state_terms(&self, s: &PairFn) -> Terms {
        self.terms(s.grid(), s.u.values(), s.v.values())
    }

    fn run(&self, grid: &RadialGrid, u: &[f64], v: &[f64], with_grad: bool) -> SplitGradient {
        let prm = &self.prm;
        let n = grid.n();
        let w = grid.weights();
        let v_zero = v.iter().all(|&x| x == 0.0);

        let phi_u = potential_values(grid, u);
        let phi_v = if v_zero { vec![0.0; n] } else { potential_values(grid, v) };

        let mut t = Terms { grad: grid.gradient_sq(u) + grid.gradient_sq(v), ..Terms::default() };
        let len = if with_grad { n } else { 0 };
        let mut lin = [vec![0.0; len], vec![0.0; len]];
        let mut quart = [vec![0.0; len], vec![0.0; len]];
        let mut pow = [vec![0.0; len], vec![0.0; len]];
        if with_grad {
            grid.stiffness_apply(u, &mut lin[0]);
            grid.stiffness_apply(v, &mut lin[1]);
        }

        let (mut mu_, mut mv, mut z3, mut z4, mut z5, mut z6) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for k in 0..n {
            let (a, b, wk) = (u[k], v[k], w[k]);
            let e = self.quad.eval(a, b, prm.p);
            mu_ += wk * a * a;
            mv += wk * b * b;
            z3 += wk * phi_u[k] * a * a;
            z4 += wk * phi_v[k] * b * b;
            z5 += wk * phi_v[k] * a * a;
            z6 += wk * e.power;
            if with_grad {
                lin[0][k] = FOUR_PI * (lin[0][k] + wk * prm.lambda * a);
                lin[1][k] = FOUR_PI * (lin[1][k] + wk * prm.lambda * b);
                quart[0][k] = FOUR_PI * wk * (prm.mu11 * phi_u[k] - prm.mu12 * phi_v[k]) * a;
                quart[1][k] = FOUR_PI * wk * (prm.mu22 * phi_v[k] - prm.mu12 * phi_u[k]) * b;
                pow[0][k] = FOUR_PI * wk * e.force_a;
                pow[1][k] = FOUR_PI * wk * e.force_b;
            }
        }
        t.mass_u = FOUR_PI * mu_;
        t.mass_v = FOUR_PI * mv;
        t.mass = t.mass_u + t.mass_v;
        t.z3 = FOUR_PI * z3;
        t.z4 = FOUR_PI * z4;
        t.z5 = FOUR_PI * z5;
        t.z6 = FOUR_PI * z6;
        SplitGradient { terms: t, lin, quart, pow, p: prm.p }
    }
}

/// `J(u, v)`.
pub fn energy(state: &PairFn, prm: &Params) -> f64 {
    Functional::with_defaults(*prm).state_terms(state).energy(prm)
}

/// Strong-form residual of the system: the nodal gradient divided by the
/// quadrature weight, so that `∫ residual · w dx` is the first variation.
pub fn residual(state: &PairFn, prm: &Params) -> PairFn {
    let grid = state.grid();
    let ev = Functional::with_defaults(*prm).evaluate(grid, state.u.values(), state.v.values());
    let (ru, rv) = nodal_to_residual(grid, &ev.grad_u, &ev.grad_v);
    PairFn::from_values(grid, ru, rv)
}

pub(crate) fn nodal_to_residual(grid: &RadialGrid, gu: &[f64], gv: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let scale = |g: &[f64]| -> Vec<f64> {
        g.iter().zip(grid.weights()).map(|(g, w)| g / (FOUR_PI * w)).collect()
    };
    (scale(gu), scale(gv))
}

/// Grid-L² norm of a nodal gradient, `(∫ R_u² + R_v²)^{1/2}` with `R = g/(4πw)`.
pub(crate) fn residual_l2(grid: &RadialGrid, gu: &[f64], gv: &[f64], skip_last: bool) -> f64 {
    let n = grid.n() - usize::from(skip_last);
    let s: f64 = (0..n)
        .map(|k| (gu[k] * gu[k] + gv[k] * gv[k]) / (FOUR_PI * grid.weights()[k]))
        .sum();
    s.sqrt()
}

/// `F(u, v) = ⟨J′(u, v), (u, v)⟩ = A + B − C`.
pub fn nehari_value(state: &PairFn, prm: &Params) -> f64 {
    Functional::with_defaults(*prm).state_terms(state).nehari(prm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FiberClass {
    Plus,
    Zero,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberingReport {
    pub t: f64,
    pub h: f64,
    pub h1: f64,
    pub h2: f64,
    pub class: FiberClass,
}

/// Fibering map of one ray, from its three cached integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fiber {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub p: f64,
}

impl Fiber {
    pub fn h(&self, t: f64) -> f64 {
        0.5 * t * t * self.a + 0.25 * t.powi(4) * self.b - t.powf(self.p + 1.0) / (self.p + 1.0) * self.c
    }

    pub fn h1(&self, t: f64) -> f64 {
        t * self.a + t.powi(3) * self.b - t.powf(self.p) * self.c
    }

    pub fn h2(&self, t: f64) -> f64 {
        self.a + 3.0 * t * t * self.b - self.p * t.powf(self.p - 1.0) * self.c
    }

    /// `h′(t)/t = A + B t² − C t^{p−1}`.
    pub fn g(&self, t: f64) -> f64 {
        self.a + self.b * t * t - self.c * t.powf(self.p - 1.0)
    }

    pub fn dg(&self, t: f64) -> f64 {
        2.0 * self.b * t - (self.p - 1.0) * self.c * t.powf(self.p - 2.0)
    }

    /// Classification band, `band · |A|` after scaling `h″` back to `t = 1`.
    pub fn classify(&self, t: f64, band: f64) -> FiberClass {
        // h″(t) scales like t⁰ in A; compare against the A-part at this t.
        let h2 = self.h2(t);
        let tol = band * self.a.abs();
        if h2 < -tol {
            FiberClass::Minus
        } else if h2 > tol {
            FiberClass::Plus
        } else {
            FiberClass::Zero
        }
    }

    pub fn report(&self, t: f64, band: f64) -> FiberingReport {
        FiberingReport { t, h: self.h(t), h1: self.h1(t), h2: self.h2(t), class: self.classify(t, band) }
    }
}

/// `h(t) = J(tu, tv)` and its derivatives.
pub fn fibering(state: &PairFn, prm: &Params, t: f64) -> Result<FiberingReport> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("fibering parameter must be positive, got {t}")));
    }
    let fib = Functional::with_defaults(*prm).state_terms(state).fiber(prm);
    Ok(fib.report(t, DEFAULT_ZERO_BAND))
}
