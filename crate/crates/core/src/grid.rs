//! Radial discretization of R³ for radially symmetric functions.
//!
//! Nodes sit at `r_i = (i + 1) h`, `i = 0..n`, with `h = r_max / n`, so the
//! origin is not a node and the last node is `r_max`. Regularity at the
//! origin (`f'(0) = 0`) is imposed by reflecting onto a ghost node at `r = 0`
//! carrying the first sample; the first cell then carries no gradient.
//!
//! Ball integrals use end-corrected (Gregory) trapezoid weights for the
//! measure `r² dr`, exact for cubic `f·r²`. Gradient energies use exact
//! cell moments `∫ r² dr` times the squared difference quotient, which keeps
//! the discrete `-Δ` symmetric with respect to the quadrature.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use crate::error::{Error, Result};

pub const FOUR_PI: f64 = 4.0 * PI;

/// Gregory end corrections for the trapezoid rule on `n + 1` equispaced points.
const GREGORY: [f64; 3] = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];

#[derive(Debug, Clone)]
pub struct RadialGrid {
    r_max: f64,
    h: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Cell coefficient `∫_{r_i}^{r_{i+1}} r² dr / h²` for the cell right of node `i`.
    stiffness: Vec<f64>,
}

impl PartialEq for RadialGrid {
    fn eq(&self, other: &Self) -> bool {
        self.r_max == other.r_max && self.nodes.len() == other.nodes.len()
    }
}

impl RadialGrid {
    pub const MIN_NODES: usize = 16;

    pub fn new(r_max: f64, n: usize) -> Result<Self> {
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(Error::Config(format!("r_max must be positive, got {r_max}")));
        }
        if n < Self::MIN_NODES {
            return Err(Error::Config(format!(
                "grid needs at least {} nodes, got {n}",
                Self::MIN_NODES
            )));
        }
        let h = r_max / n as f64;
        let nodes: Vec<f64> = (1..=n).map(|i| i as f64 * h).collect();

        // Coefficients indexed over the full point set r_0 = 0, ..., r_n.
        let coeff = |k: usize| -> f64 {
            if k < 3 {
                GREGORY[k]
            } else if n - k < 3 {
                GREGORY[n - k]
            } else {
                1.0
            }
        };
        let weights: Vec<f64> = nodes
            .iter()
            .enumerate()
            .map(|(i, &r)| coeff(i + 1) * h * r * r)
            .collect();

        let stiffness: Vec<f64> = nodes
            .windows(2)
            .map(|w| (w[1].powi(3) - w[0].powi(3)) / (3.0 * h * h))
            .collect();

        Ok(Self { r_max, h, nodes, weights, stiffness })
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Quadrature weights for `∫_0^{r_max} f(r) r² dr`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `4π Σ w_i f_i`, the ball integral of sampled values.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n());
        FOUR_PI * self.weights.iter().zip(values).map(|(w, f)| w * f).sum::<f64>()
    }

    /// `∫ |∇f|² dx` with difference quotients on every cell.
    pub fn gradient_sq(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n());
        let s: f64 = self
            .stiffness
            .iter()
            .zip(values.windows(2))
            .map(|(c, f)| {
                let d = f[1] - f[0];
                c * d * d
            })
            .sum();
        FOUR_PI * s
    }

    /// Nodal derivative of `½ ∫|∇f|² dx`, divided by 4π.
    pub(crate) fn stiffness_apply(&self, values: &[f64], out: &mut [f64]) {
        let n = self.n();
        out[..n].iter_mut().for_each(|o| *o = 0.0);
        for (i, c) in self.stiffness.iter().enumerate() {
            let flux = c * (values[i + 1] - values[i]);
            out[i] -= flux;
            out[i + 1] += flux;
        }
    }

    /// Solve `(K + λW) x = rhs` on all nodes but the last, which is held at 0.
    ///
    /// `K` is the stiffness matrix and `W` the diagonal of weights; this is the
    /// Gram matrix of the H¹_λ inner product divided by 4π.
    pub fn solve_gram(&self, lambda: f64, rhs: &[f64]) -> Vec<f64> {
        let n = self.n();
        let m = n - 1;
        let c = &self.stiffness;
        let diag = |k: usize| -> f64 {
            let left = if k > 0 { c[k - 1] } else { 0.0 };
            left + c[k] + lambda * self.weights[k]
        };
        // Thomas algorithm; off-diagonals are -c[k].
        let mut cp = vec![0.0; m];
        let mut dp = vec![0.0; m];
        let b0 = diag(0);
        cp[0] = -c[0] / b0;
        dp[0] = rhs[0] / b0;
        for k in 1..m {
            let a = -c[k - 1];
            let denom = diag(k) - a * cp[k - 1];
            cp[k] = if k + 1 < m { -c[k] / denom } else { 0.0 };
            dp[k] = (rhs[k] - a * dp[k - 1]) / denom;
        }
        let mut x = vec![0.0; n];
        x[m - 1] = dp[m - 1];
        for k in (0..m - 1).rev() {
            x[k] = dp[k] - cp[k] * x[k + 1];
        }
        x
    }

    /// Samples `f` at the nodes.
    pub fn sample(self: &Arc<Self>, f: impl Fn(f64) -> f64) -> RadialFn {
        RadialFn { grid: Arc::clone(self), values: self.nodes.iter().map(|&r| f(r)).collect() }
    }

    pub fn zeros(self: &Arc<Self>) -> RadialFn {
        RadialFn { grid: Arc::clone(self), values: vec![0.0; self.n()] }
    }
}

/// Uniform grid with `n` nodes on `(0, r_max]`.
pub fn make_grid(r_max: f64, n: usize) -> Result<Arc<RadialGrid>> {
    RadialGrid::new(r_max, n).map(Arc::new)
}

/// A radial function sampled on a grid.
#[derive(Debug, Clone)]
pub struct RadialFn {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl RadialFn {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::Config(format!(
                "expected {} samples, got {}",
                grid.n(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Config(format!("non-finite sample {bad}")));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_parts(grid: Arc<RadialGrid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_grid(&self, other: &RadialFn) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn scaled(&self, c: f64) -> RadialFn {
        RadialFn { grid: Arc::clone(&self.grid), values: self.values.iter().map(|v| c * v).collect() }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> RadialFn {
        RadialFn { grid: Arc::clone(&self.grid), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// `∫ f² dx`.
    pub fn l2_norm_sq(&self) -> f64 {
        let sq: Vec<f64> = self.values.iter().map(|v| v * v).collect();
        self.grid.integrate(&sq)
    }

    /// Writes `r,value` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["r", "value"])?;
        for (r, v) in self.grid.nodes.iter().zip(&self.values) {
            w.write_record([format!("{r:.16e}"), format!("{v:.16e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a CSV written by [`RadialFn::write_csv`] onto `grid`.
    pub fn read_csv<R: Read>(grid: Arc<RadialGrid>, reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["r", "value"] {
            return Err(Error::Io(format!("unexpected CSV header {headers:?}")));
        }
        let mut values = Vec::with_capacity(grid.n());
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |k: usize| -> Result<f64> {
                rec.get(k)
                    .ok_or_else(|| Error::Io(format!("row {i}: missing column {k}")))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Io(format!("row {i}: {e}")))
            };
            let r = parse(0)?;
            let node = grid.nodes.get(i).copied().unwrap_or(f64::NAN);
            if (r - node).abs() > 1e-12 * grid.r_max {
                return Err(Error::GridMismatch);
            }
            values.push(parse(1)?);
        }
        RadialFn::new(grid, values)
    }
}

/// `∫ f dx` over the ball of radius `r_max`.
pub fn integrate_ball(f: &RadialFn) -> f64 {
    f.grid.integrate(&f.values)
}

/// `∫ |∇f|² + λ f² dx`.
pub fn h1_norm_sq(f: &RadialFn, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::Config(format!("lambda must be positive, got {lambda}")));
    }
    Ok(f.grid.gradient_sq(&f.values) + lambda * f.l2_norm_sq())
}
