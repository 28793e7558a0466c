//! Scaling states onto the Nehari set and classifying the result.
//!
//! Along a ray the Nehari condition is `g(t) = A + B t² − C t^{p−1} = 0`.
//! For `p < 3`, `g` is strictly decreasing when `B ≤ 0`, so there is exactly
//! one root and it is a local maximum of the fibering map. When `B > 0`, `g`
//! is convex-like with a single interior minimum at
//! `t* = ((p−1)C/(2B))^{1/(3−p)}`, giving zero or two roots that straddle it.

use serde::{Deserialize, Serialize};

use crate::constants;
use crate::error::{Error, Result};
use crate::functional::{
    FiberClass, Fiber, FiberingReport, Functional, PairFn, Params, DEFAULT_ZERO_BAND,
};
use crate::grid::RadialFn;

const BISECT_REL: f64 = 1e-13;
const NEWTON_STEPS: usize = 5;
/// Default relative tolerance on `|F| / A` for a state to count as on the manifold.
pub const DEFAULT_NEHARI_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResult {
    pub t_minus: Option<f64>,
    pub t_plus: Option<f64>,
    pub report_minus: Option<FiberingReport>,
    pub report_plus: Option<FiberingReport>,
    /// A root landed inside the `h″ ≈ 0` band.
    pub degenerate: bool,
}

impl ProjectionResult {
    /// Root of the requested class closest to `t = 1`.
    pub fn root(&self, class: FiberClass) -> Option<f64> {
        match class {
            FiberClass::Minus => self.t_minus,
            FiberClass::Plus => self.t_plus,
            FiberClass::Zero => None,
        }
    }
}

fn refine(f: &Fiber, mut lo: f64, mut hi: f64) -> f64 {
    // Invariant: g(lo) > 0 ≥ g(hi) or the reverse; track by sign at lo.
    let lo_pos = f.g(lo) > 0.0;
    while hi - lo > BISECT_REL * hi {
        let mid = 0.5 * (lo + hi);
        if (f.g(mid) > 0.0) == lo_pos {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (a, b) = (lo, hi);
    let mut t = 0.5 * (a + b);
    for _ in 0..NEWTON_STEPS {
        let d = f.dg(t);
        if d == 0.0 {
            break;
        }
        let next = t - f.g(t) / d;
        if !(next > a - (b - a) && next < b + (b - a)) {
            break;
        }
        t = next;
    }
    t
}

/// Positive roots of `h′(t)/t` for a ray with cached integrals.
pub fn project_fiber(f: &Fiber, band: f64) -> Result<ProjectionResult> {
    if !(f.a > 0.0) || !f.a.is_finite() || !f.b.is_finite() || !f.c.is_finite() {
        return Err(Error::NoProjection);
    }
    let p = f.p;
    let mut out = ProjectionResult {
        t_minus: None,
        t_plus: None,
        report_minus: None,
        report_plus: None,
        degenerate: false,
    };
    if f.b <= 0.0 {
        if f.b == 0.0 && f.c <= 0.0 {
            return Err(Error::NoProjection);
        }
        let mut hi = 1.0;
        while f.g(hi) > 0.0 {
            hi *= 2.0;
        }
        let mut lo = hi;
        while f.g(lo) <= 0.0 {
            lo *= 0.5;
        }
        out.t_minus = Some(refine(f, lo, hi));
    } else {
        if f.c <= 0.0 {
            return Err(Error::NoProjection);
        }
        let t_star = ((p - 1.0) * f.c / (2.0 * f.b)).powf(1.0 / (3.0 - p));
        let g_star = f.g(t_star);
        if g_star > 0.0 {
            return Err(Error::NoProjection);
        }
        if g_star.abs() <= band * f.a {
            out.degenerate = true;
        }
        let mut lo = t_star;
        while f.g(lo) <= 0.0 {
            lo *= 0.5;
        }
        out.t_minus = Some(refine(f, lo, t_star));
        let mut hi = t_star;
        while f.g(hi) <= 0.0 {
            hi *= 2.0;
        }
        out.t_plus = Some(refine(f, t_star, hi));
    }
    out.report_minus = out.t_minus.map(|t| f.report(t, band));
    out.report_plus = out.t_plus.map(|t| f.report(t, band));
    for rep in out.report_minus.iter().chain(out.report_plus.iter()) {
        if rep.class == FiberClass::Zero {
            out.degenerate = true;
        }
    }
    Ok(out)
}

/// All positive scalings of `state` that land on the Nehari set.
pub fn project_nehari(state: &PairFn, prm: &Params) -> Result<ProjectionResult> {
    let f = Functional::with_defaults(*prm).state_terms(state).fiber(prm);
    project_fiber(&f, DEFAULT_ZERO_BAND)
}

/// `(√s_min · w, √(1 − s_min) · w)`.
pub fn seed_pair(w: &RadialFn, prm: &Params) -> PairFn {
    let (s, _) = constants::s_min_and_g(prm);
    PairFn { u: w.scaled(s.sqrt()), v: w.scaled((1.0 - s).sqrt()) }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Sublevel {
    M1,
    M2,
    Neither,
}

/// Sublevel split below `D₀` by the norm threshold built from `μ₂₂`.
pub fn classify_sublevel(state: &PairFn, prm: &Params, sobolev: f64) -> Result<Sublevel> {
    classify_sublevel_tol(state, prm, sobolev, DEFAULT_NEHARI_TOL)
}

pub fn classify_sublevel_tol(state: &PairFn, prm: &Params, sobolev: f64, tol: f64) -> Result<Sublevel> {
    let t = Functional::with_defaults(*prm).state_terms(state);
    let a = t.a(prm);
    let rel = t.nehari(prm).abs() / a.max(1e-300);
    if rel > tol {
        return Err(Error::NotOnManifold(rel));
    }
    let d0 = constants::d0_level(prm.p, sobolev)?;
    if t.energy(prm) >= d0 {
        return Ok(Sublevel::Neither);
    }
    let thr = constants::norm_threshold(prm.p, prm.lambda, prm.mu22)?;
    let norm = a.sqrt();
    Ok(if norm < thr {
        Sublevel::M1
    } else if norm > thr {
        Sublevel::M2
    } else {
        Sublevel::Neither
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn gauss_state(prm: &Params, amp: f64) -> PairFn {
        let g = make_grid(20.0, 800).unwrap();
        let w = g.sample(|r| amp * (-r * r / 2.0).exp());
        seed_pair(&w, prm)
    }

    fn count_sign_changes(f: &Fiber) -> usize {
        let n = 200_000;
        let (lo, hi): (f64, f64) = (1e-6, 1e3);
        let mut prev = f.g(lo);
        let mut count = 0;
        for k in 1..=n {
            let t = lo * (hi / lo).powf(k as f64 / n as f64);
            let cur = f.g(t);
            if (cur > 0.0) != (prev > 0.0) {
                count += 1;
            }
            prev = cur;
        }
        count
    }

    #[test]
    fn scalar_embedding_root_count_matches_dense_sampling() {
        let prm = Params::scalar(1.0, 2.5, 0.005).unwrap();
        let g = make_grid(20.0, 800).unwrap();
        let s = PairFn { u: g.sample(|r| (-r * r / 2.0).exp()), v: g.zeros() };
        let f = Functional::with_defaults(prm).state_terms(&s).fiber(&prm);
        assert!(f.b > 0.0 && f.c > 0.0);
        let proj = project_fiber(&f, DEFAULT_ZERO_BAND).unwrap();
        let found = proj.t_minus.is_some() as usize + proj.t_plus.is_some() as usize;
        assert_eq!(found, count_sign_changes(&f));
        assert_eq!(proj.report_minus.unwrap().class, FiberClass::Minus);
        assert_eq!(proj.report_plus.unwrap().class, FiberClass::Plus);
    }

    #[test]
    fn roots_are_accurate_and_ordered() {
        let prm = Params::new(1.0, 2.2, 0.05, 0.08, 0.03).unwrap();
        let s = gauss_state(&prm, 1.0);
        let proj = project_nehari(&s, &prm).unwrap();
        let f = Functional::with_defaults(prm).state_terms(&s).fiber(&prm);
        let (tm, tp) = (proj.t_minus.unwrap(), proj.t_plus.unwrap());
        assert!(tm < tp);
        for t in [tm, tp] {
            assert!(f.h1(t).abs() < 1e-12 * t * f.a, "h'({t}) = {}", f.h1(t));
        }
    }

    #[test]
    fn negative_coupling_has_one_root() {
        // μ₁₂ large against the diagonal makes B < 0 for an equal-profile pair.
        let prm = Params::new(1.0, 2.0, 0.1, 0.1, 1.0).unwrap();
        let s = gauss_state(&prm, 1.0);
        let f = Functional::with_defaults(prm).state_terms(&s).fiber(&prm);
        assert!(f.b < 0.0);
        let proj = project_fiber(&f, DEFAULT_ZERO_BAND).unwrap();
        assert!(proj.t_minus.is_some() && proj.t_plus.is_none());
        assert_eq!(count_sign_changes(&f), 1);
    }

    #[test]
    fn state_on_minus_branch_projects_to_one() {
        let prm = Params::new(1.0, 2.5, 0.05, 0.1, 0.05).unwrap();
        let s = gauss_state(&prm, 1.0);
        let tm = project_nehari(&s, &prm).unwrap().t_minus.unwrap();
        let on = s.scaled(tm);
        let again = project_nehari(&on, &prm).unwrap();
        assert!((again.t_minus.unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn no_projection_for_zero_or_hopeless_rays() {
        let prm = Params::new(1.0, 2.5, 0.05, 0.1, 0.05).unwrap();
        let g = make_grid(20.0, 800).unwrap();
        assert_eq!(project_nehari(&PairFn::zeros(&g), &prm).unwrap_err(), Error::NoProjection);
        // Tiny nonlinearity against a large positive Hartree part: g > 0 everywhere.
        let f = Fiber { a: 1.0, b: 1e3, c: 1e-3, p: 2.5 };
        assert_eq!(project_fiber(&f, DEFAULT_ZERO_BAND).unwrap_err(), Error::NoProjection);
    }

    #[test]
    fn extremal_property_of_roots() {
        let prm = Params::new(1.0, 2.2, 0.05, 0.08, 0.03).unwrap();
        let s = gauss_state(&prm, 1.0);
        let f = Functional::with_defaults(prm).state_terms(&s).fiber(&prm);
        let proj = project_fiber(&f, DEFAULT_ZERO_BAND).unwrap();
        let (tm, tp) = (proj.t_minus.unwrap(), proj.t_plus.unwrap());
        let (hm, hp) = (f.h(tm), f.h(tp));
        for k in 0..=4000 {
            let t = tp * k as f64 / 4000.0;
            assert!(f.h(t) <= hm * (1.0 + 1e-12) + 1e-12);
            let t2 = tm + (20.0 * tp - tm) * k as f64 / 4000.0;
            assert!(f.h(t2) >= hp - 1e-12 * hp.abs());
        }
    }

    #[test]
    fn seed_mixing() {
        let g = make_grid(10.0, 100).unwrap();
        let w = g.sample(|r| (-r).exp());
        let prm = Params::new(1.0, 2.0, 1.0, 1.0, 1.0).unwrap();
        let s = seed_pair(&w, &prm);
        assert_eq!(s.u.values(), s.v.values());
        let prm = Params::new(1.0, 2.0, 1.0, 2.0, 1.0).unwrap();
        let s = seed_pair(&w, &prm);
        for ((a, b), x) in s.u.values().iter().zip(s.v.values()).zip(w.values()) {
            assert!((a - 0.6f64.sqrt() * x).abs() < 1e-15);
            assert!((b - 0.4f64.sqrt() * x).abs() < 1e-15);
        }
    }

    #[test]
    fn seed_coupling_is_g_min_times_self_energy() {
        let g = make_grid(20.0, 800).unwrap();
        let w = g.sample(|r| 2.0 * (-r * r / 3.0).exp());
        let prm = Params::new(1.0, 2.0, 0.3, 0.7, 0.2).unwrap();
        let s = seed_pair(&w, &prm);
        let b = Functional::with_defaults(prm).state_terms(&s).b(&prm);
        let (_, gmin) = constants::s_min_and_g(&prm);
        let self_e = crate::hartree::hartree_pairing(&w, &w).unwrap();
        assert!((b - gmin * self_e).abs() < 1e-9 * (gmin * self_e).abs());
    }

    #[test]
    fn sublevel_requires_manifold_and_energy() {
        let prm = Params::new(1.0, 2.5, 0.05, 0.1, 0.05).unwrap();
        let s = gauss_state(&prm, 1.0);
        assert!(matches!(classify_sublevel(&s.scaled(0.5), &prm, 2.8), Err(Error::NotOnManifold(_))));
        let on = s.scaled(project_nehari(&s, &prm).unwrap().t_minus.unwrap());
        // A tiny Sobolev constant makes D₀ tiny, so nothing lies below it.
        assert_eq!(classify_sublevel(&on, &prm, 0.1).unwrap(), Sublevel::Neither);
    }
}
