//! The six integrals `z₁…z₆` of a state, the Nehari and Pohozaev identities
//! they satisfy at solutions, and the four-parameter decomposition
//!
//! ```text
//! z = θ [1, 3, 0, 0, 2/μ₁₂, 0] + s [0, 0, 0, 1/μ₂₂, 1/(2μ₁₂), 0]
//!   + t [0, 0, 1/μ₁₁, 0, 1/(2μ₁₂), 0] + w [p−1, −2(p−2), 0, 0, −(p−1)/μ₁₂, p+1]
//! ```
//!
//! of every `z` that satisfies both identities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{Functional, PairFn, Params, Terms};

const EPS: f64 = 1e-300;
pub const DEFAULT_DECOMPOSE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZVector {
    pub z1: f64,
    pub z2: f64,
    pub z3: f64,
    pub z4: f64,
    pub z5: f64,
    pub z6: f64,
}

impl ZVector {
    pub fn from_array(z: [f64; 6]) -> Self {
        Self { z1: z[0], z2: z[1], z3: z[2], z4: z[3], z5: z[4], z6: z[5] }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.z1, self.z2, self.z3, self.z4, self.z5, self.z6]
    }

    pub fn from_terms(t: &Terms, prm: &Params) -> Self {
        Self { z1: t.grad, z2: prm.lambda * t.mass, z3: t.z3, z4: t.z4, z5: t.z5, z6: t.z6 }
    }

    /// `μ₁₁z₃ + μ₂₂z₄ − 2μ₁₂z₅`
    pub fn coupling(&self, prm: &Params) -> f64 {
        prm.mu11 * self.z3 + prm.mu22 * self.z4 - 2.0 * prm.mu12 * self.z5
    }

    fn scale(&self) -> f64 {
        (self.z1 + self.z2).max(EPS)
    }

    /// Nehari row: `z₁ + z₂ + B − z₆`.
    pub fn nehari_row(&self, prm: &Params) -> f64 {
        self.z1 + self.z2 + self.coupling(prm) - self.z6
    }

    /// Pohozaev row: `½z₁ + (3/2)z₂ + (5/4)B − (3/(p+1))z₆`.
    pub fn pohozaev_row(&self, prm: &Params) -> f64 {
        0.5 * self.z1 + 1.5 * self.z2 + 1.25 * self.coupling(prm) - 3.0 / (prm.p + 1.0) * self.z6
    }

    /// Energy row: `½(z₁ + z₂) + ¼B − z₆/(p+1)`.
    pub fn energy(&self, prm: &Params) -> f64 {
        0.5 * (self.z1 + self.z2) + 0.25 * self.coupling(prm) - self.z6 / (prm.p + 1.0)
    }

    /// `−(p−1)(z₁+z₂) + (3−p)B`, negative exactly on the `h″(1) < 0` side.
    pub fn c1_value(&self, prm: &Params) -> f64 {
        -(prm.p - 1.0) * (self.z1 + self.z2) + (3.0 - prm.p) * self.coupling(prm)
    }
}

pub fn z_vector(state: &PairFn, prm: &Params) -> ZVector {
    ZVector::from_terms(&Functional::with_defaults(*prm).state_terms(state), prm)
}

/// Relative Nehari and Pohozaev residuals of a state.
pub fn check_identities(state: &PairFn, prm: &Params) -> (f64, f64) {
    identity_residuals(&z_vector(state, prm), prm)
}

pub fn identity_residuals(z: &ZVector, prm: &Params) -> (f64, f64) {
    (z.nehari_row(prm).abs() / z.scale(), z.pohozaev_row(prm).abs() / z.scale())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoeffDecomp {
    pub theta: f64,
    pub s: f64,
    pub t: f64,
    pub w: f64,
}

impl CoeffDecomp {
    pub fn reconstruct(&self, prm: &Params) -> ZVector {
        let (p, m12) = (prm.p, prm.mu12);
        ZVector {
            z1: self.theta + (p - 1.0) * self.w,
            z2: 3.0 * self.theta - 2.0 * (p - 2.0) * self.w,
            z3: self.t / prm.mu11,
            z4: self.s / prm.mu22,
            z5: 2.0 * self.theta / m12 + (self.s + self.t) / (2.0 * m12) - (p - 1.0) * self.w / m12,
            z6: (p + 1.0) * self.w,
        }
    }
}

/// Largest mismatch between `z` and its reconstruction, in energy units
/// relative to `z₁ + z₂`.
fn reconstruction_error(z: &ZVector, d: &CoeffDecomp, prm: &Params) -> f64 {
    let r = d.reconstruct(prm);
    let errs = [
        (r.z1 - z.z1).abs(),
        (r.z2 - z.z2).abs(),
        prm.mu11 * (r.z3 - z.z3).abs(),
        prm.mu22 * (r.z4 - z.z4).abs(),
        2.0 * prm.mu12 * (r.z5 - z.z5).abs(),
        (r.z6 - z.z6).abs(),
    ];
    errs.iter().cloned().fold(0.0, f64::max) / z.scale()
}

/// Coefficients `(θ, s, t, w)`; fails when `z` is not reproduced to `tol`.
pub fn decompose(z: &ZVector, prm: &Params) -> Result<CoeffDecomp> {
    decompose_tol(z, prm, DEFAULT_DECOMPOSE_TOL)
}

pub fn decompose_tol(z: &ZVector, prm: &Params, tol: f64) -> Result<CoeffDecomp> {
    let (d, err) = decompose_unchecked(z, prm);
    if err > tol || !err.is_finite() {
        return Err(Error::InconsistentZ(err));
    }
    Ok(d)
}

/// Coefficients from the closed-form inverse and the reconstruction error.
pub fn decompose_unchecked(z: &ZVector, prm: &Params) -> (CoeffDecomp, f64) {
    let p = prm.p;
    let d = CoeffDecomp {
        theta: ((p - 1.0) * z.z2 + (p - 2.0) * z.coupling(prm)) / (5.0 - p),
        s: prm.mu22 * z.z4,
        t: prm.mu11 * z.z3,
        w: z.z6 / (p + 1.0),
    };
    let err = reconstruction_error(z, &d, prm);
    (d, err)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GroundStateVerdict {
    InMMinus,
    Violated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundStateCheck {
    pub verdict: GroundStateVerdict,
    pub c1_value: f64,
    /// `w < 8θ/((p−1)(3−p))`
    pub w_bound: bool,
    /// `w < 3θ/(2p−4)`, only meaningful for `p > 2`.
    pub w_bound_upper: Option<bool>,
    /// `3θ − 2w(p−2) > 0`, `4θ + s + t − 2w(p−1) > 0` and `s, t, w > 0`.
    pub feasible: bool,
    pub decomposition: CoeffDecomp,
}

pub fn check_ground_state_condition(z: &ZVector, prm: &Params) -> Result<GroundStateCheck> {
    check_ground_state_condition_tol(z, prm, DEFAULT_DECOMPOSE_TOL)
}

pub fn check_ground_state_condition_tol(z: &ZVector, prm: &Params, tol: f64) -> Result<GroundStateCheck> {
    let d = decompose_tol(z, prm, tol)?;
    let p = prm.p;
    let c1 = z.c1_value(prm);
    Ok(GroundStateCheck {
        verdict: if c1 < 0.0 { GroundStateVerdict::InMMinus } else { GroundStateVerdict::Violated },
        c1_value: c1,
        w_bound: d.w < 8.0 * d.theta / ((p - 1.0) * (3.0 - p)),
        w_bound_upper: (p > 2.0).then(|| d.w < 3.0 * d.theta / (2.0 * p - 4.0)),
        feasible: feasibility(&d, p),
        decomposition: d,
    })
}

pub fn feasibility(d: &CoeffDecomp, p: f64) -> bool {
    3.0 * d.theta - 2.0 * d.w * (p - 2.0) > 0.0
        && 4.0 * d.theta + d.s + d.t - 2.0 * d.w * (p - 1.0) > 0.0
        && d.s > 0.0
        && d.t > 0.0
        && d.w > 0.0
}

/// JSON record for one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub z: [f64; 6],
    pub energy: f64,
    pub theta: f64,
    pub s: f64,
    pub t: f64,
    pub w: f64,
    /// `|θ − J| / (z₁ + z₂)`
    pub theta_energy_gap: f64,
    pub decomposition_error: f64,
    pub nehari_residual: f64,
    pub pohozaev_residual: f64,
    pub c1: bool,
    pub c1_value: f64,
}

impl IdentityReport {
    pub fn from_z(z: &ZVector, prm: &Params) -> Self {
        let (d, err) = decompose_unchecked(z, prm);
        let (neh, poh) = identity_residuals(z, prm);
        let energy = z.energy(prm);
        let c1 = z.c1_value(prm);
        Self {
            z: z.to_array(),
            energy,
            theta: d.theta,
            s: d.s,
            t: d.t,
            w: d.w,
            theta_energy_gap: (d.theta - energy).abs() / z.scale(),
            decomposition_error: err,
            nehari_residual: neh,
            pohozaev_residual: poh,
            c1: c1 < 0.0,
            c1_value: c1,
        }
    }

    pub fn from_state(state: &PairFn, prm: &Params) -> Self {
        Self::from_z(&z_vector(state, prm), prm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use proptest::prelude::*;

    fn unit(p: f64) -> Params {
        Params::new(1.0, p, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn zero_state_is_all_zero() {
        let g = make_grid(10.0, 100).unwrap();
        let prm = unit(2.0);
        let z = z_vector(&PairFn::zeros(&g), &prm);
        assert_eq!(z.to_array(), [0.0; 6]);
        assert_eq!(check_identities(&PairFn::zeros(&g), &prm), (0.0, 0.0));
    }

    #[test]
    fn semitrivial_state_has_no_v_terms() {
        let g = make_grid(10.0, 200).unwrap();
        let s = PairFn::new(g.sample(|r| (-r).exp()), g.zeros()).unwrap();
        let z = z_vector(&s, &unit(2.0));
        assert_eq!((z.z4, z.z5), (0.0, 0.0));
        assert!(z.z1 > 0.0 && z.z2 > 0.0 && z.z3 > 0.0 && z.z6 > 0.0);
    }

    #[test]
    fn synthetic_solution_round_trip() {
        let prm = unit(2.5);
        let z = ZVector::from_array([1.0, 3.0, 1.0, 1.0, 3.0, 0.0]);
        assert_eq!(z.nehari_row(&prm), 0.0);
        assert_eq!(z.pohozaev_row(&prm), 0.0);
        let d = decompose(&z, &prm).unwrap();
        assert!((d.theta - 1.0).abs() < 1e-15);
        assert_eq!((d.s, d.t, d.w), (1.0, 1.0, 0.0));
        assert_eq!(d.reconstruct(&prm).to_array(), z.to_array());
        assert!((z.energy(&prm) - d.theta).abs() < 1e-15);
    }

    #[test]
    fn inconsistent_z_is_rejected() {
        let prm = unit(2.5);
        let z = ZVector::from_array([1.0, 3.0, 1.0, 1.0, 2.0, 0.0]);
        assert!(matches!(decompose(&z, &prm), Err(Error::InconsistentZ(_))));
        assert!(matches!(check_ground_state_condition(&z, &prm), Err(Error::InconsistentZ(_))));
    }

    #[test]
    fn w_above_bound_violates() {
        let prm = Params::new(1.0, 2.5, 0.3, 0.5, 0.2).unwrap();
        let p = prm.p;
        let theta = 1.0;
        let w = 1.5 * 8.0 * theta / ((p - 1.0) * (3.0 - p));
        let z = CoeffDecomp { theta, s: 0.7, t: 0.4, w }.reconstruct(&prm);
        let chk = check_ground_state_condition(&z, &prm).unwrap();
        assert_eq!(chk.verdict, GroundStateVerdict::Violated);
        assert!(!chk.w_bound);

        let w = 0.5 * 8.0 * theta / ((p - 1.0) * (3.0 - p));
        let z = CoeffDecomp { theta, s: 0.7, t: 0.4, w }.reconstruct(&prm);
        let chk = check_ground_state_condition(&z, &prm).unwrap();
        assert_eq!(chk.verdict, GroundStateVerdict::InMMinus);
        assert!(chk.w_bound);
    }

    #[test]
    fn report_serializes_expected_fields() {
        let prm = unit(2.5);
        let z = ZVector::from_array([1.0, 3.0, 1.0, 1.0, 3.0, 0.0]);
        let json = serde_json::to_value(IdentityReport::from_z(&z, &prm)).unwrap();
        for key in ["z", "theta", "s", "t", "w", "nehari_residual", "pohozaev_residual", "c1"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
    }

    proptest! {
        #[test]
        fn decomposition_round_trip(
            theta in 0.1f64..10.0, s in 0.01f64..5.0, t in 0.01f64..5.0, w in 0.01f64..5.0,
            p in 1.1f64..2.9, m11 in 0.05f64..2.0, m22 in 0.05f64..2.0, m12 in 0.05f64..2.0,
        ) {
            let prm = Params::new(1.0, p, m11, m22, m12).unwrap();
            let d = CoeffDecomp { theta, s, t, w };
            let z = d.reconstruct(&prm);
            let scale = z.z1.abs() + z.z2.abs();
            prop_assert!(z.nehari_row(&prm).abs() <= 1e-12 * scale.max(1.0) * (1.0 + 1.0 / m12));
            prop_assert!(z.pohozaev_row(&prm).abs() <= 1e-12 * scale.max(1.0) * (1.0 + 1.0 / m12));
            let (back, _) = decompose_unchecked(&z, &prm);
            for (a, b) in [(back.theta, theta), (back.s, s), (back.t, t), (back.w, w)] {
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()) * (1.0 + 1.0 / m12));
            }
            // c1 agrees with the w-bound for every consistent z.
            let c1_neg = z.c1_value(&prm) < 0.0;
            prop_assert_eq!(c1_neg, w < 8.0 * theta / ((p - 1.0) * (3.0 - p)));
        }
    }
}
