//! Radial variational solver and identity checker for the coupled
//! Schrödinger–Poisson system
//!
//! ```text
//! −Δu + λu + (μ₁₁φ_u − μ₁₂φ_v) u = ⟨|u + e^{iθ}v|^{p−1}(u + e^{iθ}v)⟩_θ
//! −Δv + λv + (μ₂₂φ_v − μ₁₂φ_u) v = ⟨|v + e^{iθ}u|^{p−1}(v + e^{iθ}u)⟩_θ
//! ```
//!
//! with `φ_w = |x|⁻¹ ∗ w²`, restricted to radial states on a truncated ball.

pub mod angular;
pub mod constants;
pub mod descent;
pub mod driver;
pub mod error;
pub mod functional;
pub mod grid;
pub mod hartree;
pub mod identities;
pub mod io;
pub mod manifold;
pub mod scalar;

pub use error::{Error, Result};
pub use functional::{PairFn, Params};
pub use grid::{make_grid, RadialFn, RadialGrid};
