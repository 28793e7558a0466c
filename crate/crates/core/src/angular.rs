//! θ-averaged power nonlinearity `(1/2π) ∫ |a + e^{iθ} b|^{p+1} dθ` and its
//! partial derivatives.
//!
//! The integrand depends on θ only through `cos θ`, so the periodic trapezoid
//! rule folds onto the half range `[0, π]`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const DEFAULT_THETA_NODES: usize = 128;
const ADAPTIVE_TOL: f64 = 1e-10;
const ADAPTIVE_MAX_NODES: usize = 1 << 16;

/// Periodic trapezoid rule with `m` nodes on `[0, 2π)`.
#[derive(Debug, Clone)]
pub struct ThetaQuadrature {
    m: usize,
    cos: Vec<f64>,
    weights: Vec<f64>,
}

/// Value and partial derivatives of the averaged power at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaEval {
    /// `(1/2π) ∫ (a² + 2ab cos θ + b²)^{(p+1)/2} dθ`
    pub power: f64,
    /// `(1/2π) ∫ (…)^{(p−1)/2} (a + b cos θ) dθ`, which is `∂_a power / (p+1)`
    pub force_a: f64,
    pub force_b: f64,
}

impl ThetaQuadrature {
    pub fn new(m: usize) -> Result<Self> {
        if m < 16 || m % 2 != 0 {
            return Err(Error::Config(format!("theta nodes must be even and at least 16, got {m}")));
        }
        let half = m / 2;
        let cos = (0..=half).map(|k| (2.0 * PI * k as f64 / m as f64).cos()).collect();
        let weights = (0..=half)
            .map(|k| if k == 0 || k == half { 1.0 / m as f64 } else { 2.0 / m as f64 })
            .collect();
        Ok(Self { m, cos, weights })
    }

    pub fn nodes(&self) -> usize {
        self.m
    }

    pub fn eval(&self, a: f64, b: f64, p: f64) -> ThetaEval {
        if b == 0.0 || a == 0.0 {
            let c = if b == 0.0 { a } else { b };
            let mag = c.abs();
            let power = mag.powf(p + 1.0);
            let force = if mag == 0.0 { 0.0 } else { mag.powf(p - 1.0) * c };
            return if b == 0.0 {
                ThetaEval { power, force_a: force, force_b: 0.0 }
            } else {
                ThetaEval { power, force_a: 0.0, force_b: force }
            };
        }
        let e = 0.5 * (p - 1.0);
        let r2 = a * a + b * b;
        let two_ab = 2.0 * a * b;
        let (mut t, mut fa, mut fb) = (0.0, 0.0, 0.0);
        for (&c, &w) in self.cos.iter().zip(&self.weights) {
            let x = (r2 + two_ab * c).max(0.0);
            let y = if x > 0.0 { w * x.powf(e) } else { 0.0 };
            t += y * x;
            fa += y * (a + b * c);
            fb += y * (b + a * c);
        }
        ThetaEval { power: t, force_a: fa, force_b: fb }
    }
}

/// Doubles `m` from the default until two successive values agree to 1e−10.
fn adaptive<F: Fn(&ThetaQuadrature) -> f64>(f: F) -> f64 {
    let mut m = DEFAULT_THETA_NODES;
    let mut prev = f(&ThetaQuadrature::new(m).expect("valid node count"));
    while m < ADAPTIVE_MAX_NODES {
        m *= 2;
        let next = f(&ThetaQuadrature::new(m).expect("valid node count"));
        if (next - prev).abs() <= ADAPTIVE_TOL * next.abs().max(1.0) {
            return next;
        }
        prev = next;
    }
    prev
}

/// `(1/2π) ∫₀^{2π} (a² + 2ab cos θ + b²)^{(p+1)/2} dθ`.
pub fn theta_avg_power(a: f64, b: f64, p: f64) -> f64 {
    adaptive(|q| q.eval(a, b, p).power)
}

/// The two force integrals, i.e. the partial derivatives of
/// [`theta_avg_power`] divided by `p + 1`.
pub fn theta_avg_force(a: f64, b: f64, p: f64) -> (f64, f64) {
    let fa = adaptive(|q| q.eval(a, b, p).force_a);
    let fb = adaptive(|q| q.eval(a, b, p).force_b);
    (fa, fb)
}

/// `(1/2π) ∫₀^{2π} (1 + 2√(s(1−s)) cos θ)^{(p+1)/2} dθ`.
pub fn jensen_factor(s: f64, p: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Domain(format!("mixing fraction must lie in (0, 1), got {s}")));
    }
    // Equal to theta_avg_power(√s, √(1−s), p).
    Ok(theta_avg_power(s.sqrt(), (1.0 - s).sqrt(), p))
}
