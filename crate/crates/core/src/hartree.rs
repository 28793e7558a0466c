//! Newtonian potential of a radial density and its pairing energies.
//!
//! For a radial `w` the potential `φ_w(x) = ∫ w(y)²/|x − y| dy` reduces to
//! the shell formula
//!
//! ```text
//! φ(r) = 4π [ (1/r) ∫₀^r s² w² ds + ∫_r^∞ s w² ds ]
//! ```
//!
//! which is evaluated with the grid weights as the symmetric sum
//! `φ_i = 4π Σ_j w_j a_j² / max(r_i, r_j)`. The symmetric kernel makes
//! `∫ φ_a b² = ∫ φ_b a²` hold to roundoff.

use crate::error::{Error, Result};
use crate::grid::{RadialFn, RadialGrid, FOUR_PI};

/// Potential `φ_w` sampled on the grid of `w`.
#[derive(Debug, Clone)]
pub struct HartreePotential {
    pub phi: RadialFn,
}

pub fn hartree_potential(w: &RadialFn) -> HartreePotential {
    let phi = potential_values(w.grid(), w.values());
    HartreePotential { phi: RadialFn::from_parts(w.grid().clone(), phi) }
}

/// `∫ φ_{w1} w2² dx`.
pub fn hartree_pairing(w1: &RadialFn, w2: &RadialFn) -> Result<f64> {
    if !w1.same_grid(w2) {
        return Err(Error::GridMismatch);
    }
    let phi = potential_values(w1.grid(), w1.values());
    Ok(pairing_with(w1.grid(), &phi, w2.values()))
}

/// `∫ φ b² dx` for a precomputed potential.
pub(crate) fn pairing_with(grid: &RadialGrid, phi: &[f64], b: &[f64]) -> f64 {
    let s: f64 = phi.iter().zip(b).zip(grid.weights()).map(|((f, b), w)| f * b * b * w).sum();
    FOUR_PI * s
}

/// Potential values from raw samples in O(n).
pub(crate) fn potential_values(grid: &RadialGrid, a: &[f64]) -> Vec<f64> {
    let r = grid.nodes();
    let w = grid.weights();
    let n = r.len();
    let mut phi = vec![0.0; n];

    // Outer tail Σ_{j>i} w_j a_j² / r_j, accumulated from the outside in.
    let mut tail = 0.0;
    for i in (0..n).rev() {
        phi[i] = tail;
        tail += w[i] * a[i] * a[i] / r[i];
    }
    let mut inner = 0.0;
    for i in 0..n {
        inner += w[i] * a[i] * a[i];
        phi[i] = FOUR_PI * (inner / r[i] + phi[i]);
    }
    phi
}
