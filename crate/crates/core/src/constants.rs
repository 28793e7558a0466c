//! Closed-form thresholds and levels, plus the numerically computed Sobolev
//! constant they depend on.
//!
//! Sobolev convention: `S = inf ‖u‖_{H¹_λ} / ‖u‖_{L^{p+1}}` over radial
//! `u ≠ 0`, with `‖u‖²_{H¹_λ} = ∫ |∇u|² + λu²`. The infimum is attained by the
//! positive solution `Q` of `−ΔQ + λQ = Q^p`, where it equals
//! `(∫ Q^{p+1})^{(p−1)/(2(p+1))}`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{OnceLock, RwLock};

use serde::{Deserialize, Serialize, Serializer};

use crate::descent::SolverOptions;
use crate::error::{Error, Result};
use crate::functional::Params;
use crate::grid::make_grid;
use crate::scalar::{solve_scalar, Branch};

fn sqrt3() -> f64 {
    3f64.sqrt()
}

/// `(√73 − 2)/3`, above which `Λ̄₀` is infinite.
pub fn p_bar() -> f64 {
    (73f64.sqrt() - 2.0) / 3.0
}

fn check_p(p: f64) -> Result<()> {
    if p > 1.0 && p < 3.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("p must lie in (1, 3), got {p}")))
    }
}

fn check_pos(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive, got {x}")))
    }
}

pub fn a_of_p(p: f64) -> Result<f64> {
    check_p(p)?;
    Ok(if p <= 2.0 { ((3.0 - p) / 2.0).powf(1.0 / (p - 1.0)) } else { 0.5 })
}

/// `((3−p)/(2S^{p+1}))^{2/(p−1)}`, shared by `Λ₀` and `Λ̄₀`.
fn sobolev_factor(p: f64, s: f64) -> f64 {
    ((3.0 - p) / (2.0 * s.powf(p + 1.0))).powf(2.0 / (p - 1.0))
}

pub fn lambda0(p: f64, lambda: f64, s: f64) -> Result<f64> {
    check_p(p)?;
    check_pos("lambda", lambda)?;
    check_pos("S", s)?;
    let lead = 3.0 * sqrt3() * (p - 1.0) * PI * lambda.powf(1.5) / (32.0 * (3.0 - p) * a_of_p(p)?);
    Ok(lead * sobolev_factor(p, s))
}

/// Infinite for `p ≥ (√73 − 2)/3`.
pub fn lambda0_bar(p: f64, lambda: f64, s: f64) -> Result<f64> {
    if !(2.0..3.0).contains(&p) {
        return Err(Error::Domain(format!("the ground-state threshold needs 2 ≤ p < 3, got {p}")));
    }
    check_pos("lambda", lambda)?;
    check_pos("S", s)?;
    if p >= p_bar() {
        return Ok(f64::INFINITY);
    }
    let lead = 3.0 * sqrt3() * (p + 1.0).powi(2) * (p - 1.0).sqrt() * PI * lambda.powf(1.5)
        / (8.0 * (5.0 - p).powi(2) * (3.0 - p).sqrt());
    Ok(lead * sobolev_factor(p, s))
}

/// Energy level `D₀ = (A(p)(p−1)/(2(p+1))) (2S^{p+1}/(3−p))^{2/(p−1)}`.
pub fn d0_level(p: f64, s: f64) -> Result<f64> {
    check_p(p)?;
    check_pos("S", s)?;
    Ok(a_of_p(p)? * (p - 1.0) / (2.0 * (p + 1.0))
        * (2.0 * s.powf(p + 1.0) / (3.0 - p)).powf(2.0 / (p - 1.0)))
}

/// `(3√3(p−1)πλ^{3/2}/(16μ(3−p)))^{1/2}`, the norm split of the sublevel set.
pub fn norm_threshold(p: f64, lambda: f64, mu: f64) -> Result<f64> {
    check_p(p)?;
    check_pos("lambda", lambda)?;
    check_pos("mu", mu)?;
    Ok((3.0 * sqrt3() * (p - 1.0) * PI * lambda.powf(1.5) / (16.0 * mu * (3.0 - p))).sqrt())
}

/// `16/(3√3 π λ^{3/2})`, the constant in `∫φ_w w² ≤ c (∫λw²)^{3/2} (∫|∇w|²)^{1/2}`.
pub fn hartree_bound_constant(lambda: f64) -> f64 {
    16.0 / (3.0 * sqrt3() * PI * lambda.powf(1.5))
}

/// `256/(27π²λ³)`, the constant in `z₃² + z₄² ≤ c z₂³ z₁`.
pub fn z_constraint_constant(lambda: f64) -> f64 {
    256.0 / (27.0 * PI * PI * lambda.powi(3))
}

/// `f_d(s) = λ − 2^p s^{p−1} + d s`.
pub fn f_d(p: f64, lambda: f64, d: f64, s: f64) -> f64 {
    lambda - 2f64.powf(p) * s.powf(p - 1.0) + d * s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdThresholds {
    pub d_lambda: f64,
    /// Minimizer of `f_d`.
    pub s0: f64,
    /// Open interval where `f_d < 0`, present when `d < d_λ`.
    pub negative_interval: Option<(f64, f64)>,
}

fn fd_core(p: f64, lambda: f64) -> f64 {
    2f64.powf(p) * (2.0 - p).powf(2.0 - p) / lambda.powf(2.0 - p)
}

pub fn fd_thresholds(p: f64, lambda: f64, d: f64) -> Result<FdThresholds> {
    if !(p > 1.0 && p < 2.0) {
        return Err(Error::Domain(format!("needs 1 < p < 2, got {p}")));
    }
    check_pos("lambda", lambda)?;
    check_pos("d", d)?;
    let d_lambda = (p - 1.0) * fd_core(p, lambda).powf(1.0 / (p - 1.0));
    let s0 = (2f64.powf(p) * (p - 1.0) / d).powf(1.0 / (2.0 - p));
    let f = |s: f64| f_d(p, lambda, d, s);
    let negative_interval = if d < d_lambda * (1.0 - 1e-12) && f(s0) < 0.0 {
        // f_d → λ > 0 at 0⁺ and → +∞ at ∞, with a single interior minimum at s0.
        let bisect = |mut lo: f64, mut hi: f64| {
            let lo_pos = f(lo) > 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if (f(mid) > 0.0) == lo_pos {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let mut hi = 2.0 * s0;
        while f(hi) <= 0.0 {
            hi *= 2.0;
        }
        Some((bisect(0.0, s0), bisect(s0, hi)))
    } else {
        None
    };
    Ok(FdThresholds { d_lambda, s0, negative_interval })
}

/// Minimizer and minimum of `g(s) = μ₁₁s² + μ₂₂(1−s)² − 2μ₁₂ s(1−s)` on `[0, 1]`.
pub fn s_min_and_g(prm: &Params) -> (f64, f64) {
    let denom = prm.mu11 + prm.mu22 + 2.0 * prm.mu12;
    ((prm.mu22 + prm.mu12) / denom, prm.det() / denom)
}

/// Right-hand side of the nonexistence condition on `det(μ)/(μ₁₁+μ₂₂)`.
pub fn nonexist_threshold(p: f64, lambda: f64) -> Result<f64> {
    check_pos("lambda", lambda)?;
    if p == 2.0 {
        return Ok(4.0);
    }
    if !(p > 1.0 && p < 2.0) {
        return Err(Error::Domain(format!("nonexistence threshold needs 1 < p ≤ 2, got {p}")));
    }
    Ok((p - 1.0).powi(2) / 4.0 * fd_core(p, lambda).powf(2.0 / (p - 1.0)))
}

/// Exponent `e` with `S(λ) = S(1) λ^e`.
pub fn sobolev_lambda_exponent(p: f64) -> f64 {
    0.5 - 3.0 * (p - 1.0) / (4.0 * (p + 1.0))
}

type CacheKey = [u64; 4];

fn cache() -> &'static RwLock<HashMap<CacheKey, f64>> {
    static CACHE: OnceLock<RwLock<HashMap<CacheKey, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Sobolev constant on the default grid.
pub fn sobolev_constant(p: f64, lambda: f64) -> Result<f64> {
    sobolev_constant_on(p, lambda, crate::io::DEFAULT_R_MAX, crate::io::DEFAULT_N, &SolverOptions::default())
}

/// Sobolev constant from the discrete ground state on a `(r_max, n)` grid.
/// Cached per `(p, λ, r_max, n)`.
pub fn sobolev_constant_on(p: f64, lambda: f64, r_max: f64, n: usize, opts: &SolverOptions) -> Result<f64> {
    check_p(p)?;
    check_pos("lambda", lambda)?;
    let key = [p.to_bits(), lambda.to_bits(), r_max.to_bits(), n as u64];
    if let Some(&s) = cache().read().expect("sobolev cache poisoned").get(&key) {
        return Ok(s);
    }
    let grid = make_grid(r_max, n)?;
    let prm = Params::scalar(lambda, p, 0.0)?;
    let sol = solve_scalar(&grid, &prm, 0.0, Branch::Minus, opts)?;
    let lp = crate::grid::integrate_ball(&sol.w.map(|x| x.abs().powf(p + 1.0)));
    let s = lp.powf((p - 1.0) / (2.0 * (p + 1.0)));
    cache().write().expect("sobolev cache poisoned").insert(key, s);
    Ok(s)
}

/// Serializes an infinite threshold as the string `"inf"`.
fn ser_extended<S: Serializer>(x: &Option<f64>, ser: S) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(v) if v.is_infinite() => ser.serialize_str("inf"),
        Some(v) => ser.serialize_f64(*v),
        None => ser.serialize_none(),
    }
}

/// Every named constant for one parameter set and Sobolev value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantsBundle {
    pub p: f64,
    pub lambda: f64,
    pub sobolev: f64,
    pub sobolev_source: String,
    pub lambda0: f64,
    /// Defined for `2 ≤ p < 3`; `"inf"` above `(√73 − 2)/3`.
    #[serde(serialize_with = "ser_extended")]
    pub lambda0_bar: Option<f64>,
    pub a_p: f64,
    pub d0_level: f64,
    pub s_min: Option<f64>,
    pub g_min: Option<f64>,
    pub d_lambda: Option<f64>,
    pub nonexist_threshold: Option<f64>,
    pub norm_threshold_mu22: Option<f64>,
}

impl ConstantsBundle {
    /// `mu` may be omitted for the parameter-free constants.
    pub fn new(p: f64, lambda: f64, sobolev: f64, source: &str, mu: Option<&Params>) -> Result<Self> {
        check_p(p)?;
        check_pos("lambda", lambda)?;
        check_pos("S", sobolev)?;
        let (s_min, g_min) = match mu {
            Some(m) => {
                let (s, g) = s_min_and_g(m);
                (Some(s), Some(g))
            }
            None => (None, None),
        };
        Ok(Self {
            p,
            lambda,
            sobolev,
            sobolev_source: source.to_string(),
            lambda0: lambda0(p, lambda, sobolev)?,
            lambda0_bar: if p >= 2.0 { Some(lambda0_bar(p, lambda, sobolev)?) } else { None },
            a_p: a_of_p(p)?,
            d0_level: d0_level(p, sobolev)?,
            s_min,
            g_min,
            d_lambda: if p < 2.0 { Some(fd_thresholds(p, lambda, 1.0)?.d_lambda) } else { None },
            nonexist_threshold: if p <= 2.0 { Some(nonexist_threshold(p, lambda)?) } else { None },
            norm_threshold_mu22: match mu {
                Some(m) => Some(norm_threshold(p, lambda, m.mu22)?),
                None => None,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn a_of_p_values() {
        assert_eq!(a_of_p(2.0).unwrap(), 0.5);
        assert!((a_of_p(1.5).unwrap() - 0.5625).abs() < 1e-15);
        assert_eq!(a_of_p(2.5).unwrap(), 0.5);
        assert!((a_of_p(2.0 - 1e-9).unwrap() - 0.5).abs() < 1e-8);
        assert!(a_of_p(3.0).is_err());
        assert!(a_of_p(1.0).is_err());
    }

    #[test]
    fn lambda0_unit_sobolev() {
        let exact = 3.0 * sqrt3() * PI / 64.0;
        assert!((lambda0(2.0, 1.0, 1.0).unwrap() - exact).abs() < 1e-15);
        assert!((exact - 0.255_066).abs() < 1e-6);
        for &p in &[1.3, 2.0, 2.7] {
            let a = lambda0(p, 1.0, 1.7).unwrap();
            let b = lambda0(p, 4.0, 1.7).unwrap();
            assert!((b - 8.0 * a).abs() < 1e-13 * b);
        }
        assert!(lambda0(2.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn lambda0_bar_values() {
        let exact = 3.0 * sqrt3() * PI / 32.0;
        assert!((lambda0_bar(2.0, 1.0, 1.0).unwrap() - exact).abs() < 1e-15);
        assert!((exact - 0.510_131).abs() < 1e-6);
        assert_eq!(lambda0_bar(2.5, 1.0, 1.0).unwrap(), f64::INFINITY);
        assert!(lambda0_bar(1.9, 1.0, 1.0).is_err());
        for &p in &[2.0, 2.05, 2.1, 2.15, 2.18] {
            for &s in &[0.5, 1.0, 2.5] {
                assert!(lambda0_bar(p, 1.0, s).unwrap() > lambda0(p, 1.0, s).unwrap(), "p={p} S={s}");
            }
        }
    }

    #[test]
    fn fd_fixed_point() {
        let l = fd_thresholds(1.5, 1.0, 2.0).unwrap();
        assert!((l.d_lambda - 2.0).abs() < 1e-14);
        assert!((l.s0 - 0.5).abs() < 1e-14);
        assert!(f_d(1.5, 1.0, l.d_lambda, l.s0).abs() < 1e-14);
        assert!(l.negative_interval.is_none());

        let l = fd_thresholds(1.5, 1.0, 3.0).unwrap();
        for k in 1..20_000 {
            let s = k as f64 * 1e-3;
            assert!(f_d(1.5, 1.0, 3.0, s) > 0.0);
        }
        assert!(l.negative_interval.is_none());

        let l = fd_thresholds(1.5, 1.0, 1.0).unwrap();
        let (eta, xi) = l.negative_interval.unwrap();
        assert!(eta < l.s0 && l.s0 < xi);
        for k in 1..1000 {
            let s = eta + (xi - eta) * k as f64 / 1000.0;
            assert!(f_d(1.5, 1.0, 1.0, s) < 0.0);
        }
        assert!(fd_thresholds(2.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn s_min_values() {
        let p = Params::new(1.0, 2.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(s_min_and_g(&p), (0.5, 0.0));
        let p = Params::new(1.0, 2.0, 1.0, 2.0, 1.0).unwrap();
        let (s, g) = s_min_and_g(&p);
        assert_eq!(s, 0.6);
        assert_eq!(g, 0.2);
        let gs = |s: f64| p.mu11 * s * s + p.mu22 * (1.0 - s).powi(2) - 2.0 * p.mu12 * s * (1.0 - s);
        assert!((gs(0.6) - 0.2).abs() < 1e-15);
        for k in 0..=1000 {
            assert!(gs(k as f64 / 1000.0) >= g - 1e-15);
        }
    }

    #[test]
    fn nonexistence_thresholds() {
        assert_eq!(nonexist_threshold(2.0, 0.3).unwrap(), 4.0);
        assert!((nonexist_threshold(1.5, 1.0).unwrap() - 1.0).abs() < 1e-14);
        let d = fd_thresholds(1.5, 1.0, 1.0).unwrap().d_lambda;
        assert!((nonexist_threshold(1.5, 1.0).unwrap() - d * d / 4.0).abs() < 1e-14);
        let a = nonexist_threshold(1.5, 0.5).unwrap();
        let b = nonexist_threshold(1.5, 1.0).unwrap();
        let c = nonexist_threshold(1.5, 2.0).unwrap();
        assert!(a > b && b > c);
        assert!(nonexist_threshold(2.5, 1.0).is_err());
    }

    #[test]
    fn bundle_is_deterministic_and_serializes_infinity() {
        let prm = Params::new(1.0, 2.5, 0.05, 0.1, 0.05).unwrap();
        let a = ConstantsBundle::new(2.5, 1.0, 2.83, "override", Some(&prm)).unwrap();
        let b = ConstantsBundle::new(2.5, 1.0, 2.83, "override", Some(&prm)).unwrap();
        assert_eq!(a, b);
        let json = serde_json::to_string(&a).unwrap();
        assert!(json.contains("\"lambda0_bar\":\"inf\""));
        let c = ConstantsBundle::new(1.5, 1.0, 1.0, "override", None).unwrap();
        assert_eq!(c.lambda0_bar, None);
        assert!((c.d_lambda.unwrap() - 2.0).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn g_min_below_diagonal(m11 in 0.01f64..10.0, m22 in 0.01f64..10.0, m12 in 0.01f64..10.0) {
            let prm = Params::new(1.0, 2.0, m11, m22, m12).unwrap();
            let (s, g) = s_min_and_g(&prm);
            prop_assert!(s > 0.0 && s < 1.0);
            prop_assert!(g < m11.min(m22));
        }

        #[test]
        fn lambda0_positive(p in 1.05f64..2.95, lambda in 0.1f64..5.0, s in 0.3f64..4.0) {
            prop_assert!(lambda0(p, lambda, s).unwrap() > 0.0);
        }
    }
}
