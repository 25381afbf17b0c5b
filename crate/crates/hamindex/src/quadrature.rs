//! Composite Gauss-Legendre quadrature on [0,1].
//!
//! The rule uses 4 Gauss points per panel on a uniform panel decomposition;
//! a grid of N nodes means N/4 panels. All L² inner products, Gram matrices
//! and functional integrals in the crate are taken with respect to this rule,
//! so sampled functions live exactly at the quadrature nodes.

use crate::error::{Error, Result};
use nalgebra::DVector;

/// 4-point Gauss-Legendre abscissae on [-1,1].
const GL4_X: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
/// Matching weights (sum to 2).
const GL4_W: [f64; 4] = [
    0.347_854_845_137_453_86,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_86,
];

/// Quadrature nodes and weights for a given grid size.
#[derive(Debug, Clone)]
pub struct Quadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    /// Build the composite rule. `grid` is the total node count; it must be
    /// at least 64 and is rounded up to a multiple of 4.
    pub fn new(grid: usize) -> Result<Self> {
        if grid < 64 {
            return Err(Error::spec(format!("grid must be >= 64, got {grid}")));
        }
        let grid = grid.div_ceil(4) * 4;
        let panels = grid / 4;
        let h = 1.0 / panels as f64;
        let mut nodes = Vec::with_capacity(grid);
        let mut weights = Vec::with_capacity(grid);
        for k in 0..panels {
            let mid = (k as f64 + 0.5) * h;
            for i in 0..4 {
                nodes.push(mid + 0.5 * h * GL4_X[i]);
                weights.push(0.5 * h * GL4_W[i]);
            }
        }
        Ok(Quadrature { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integral of a scalar function sampled at the nodes.
    pub fn integrate(&self, samples: &[f64]) -> f64 {
        debug_assert_eq!(samples.len(), self.len());
        self.weights
            .iter()
            .zip(samples)
            .map(|(w, s)| w * s)
            .sum()
    }

    /// Weights expanded to d components per node, as needed for inner
    /// products of vector-valued samples stored node-major.
    pub fn expanded_weights(&self, d: usize) -> DVector<f64> {
        let mut w = DVector::zeros(self.len() * d);
        for (q, wq) in self.weights.iter().enumerate() {
            for c in 0..d {
                w[q * d + c] = *wq;
            }
        }
        w
    }

    /// Discrete L² inner product of two vector-valued samples (node-major,
    /// d components per node).
    pub fn inner(&self, d: usize, f: &[f64], g: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.len() * d);
        debug_assert_eq!(g.len(), self.len() * d);
        let mut acc = 0.0;
        for (q, wq) in self.weights.iter().enumerate() {
            let mut dot = 0.0;
            for c in 0..d {
                dot += f[q * d + c] * g[q * d + c];
            }
            acc += wq * dot;
        }
        acc
    }

    /// Discrete L² norm.
    pub fn norm(&self, d: usize, f: &[f64]) -> f64 {
        self.inner(d, f, f).max(0.0).sqrt()
    }
}

/// Differentiation of smooth node-sampled data by sliding local polynomial
/// fits (degree 9 through 10 consecutive nodes). Used only as an independent
/// check of ODE residuals; accuracy degrades for very oscillatory data.
pub fn differentiate(quad: &Quadrature, samples: &[f64]) -> Vec<f64> {
    let n = quad.len();
    debug_assert_eq!(samples.len(), n);
    let stencil = 10.min(n);
    let deg = stencil - 1;
    let mut out = vec![0.0; n];
    for i in 0..n {
        let lo = i.saturating_sub(stencil / 2).min(n - stencil);
        let t0 = quad.nodes[i];
        // Solve the Vandermonde least-squares fit centred at t0 and take the
        // linear coefficient.
        let mut a = nalgebra::DMatrix::zeros(stencil, deg + 1);
        let mut b = DVector::zeros(stencil);
        for r in 0..stencil {
            let dt = quad.nodes[lo + r] - t0;
            let mut p = 1.0;
            for c in 0..=deg {
                a[(r, c)] = p;
                p *= dt;
            }
            b[r] = samples[lo + r];
        }
        let coeffs = a
            .svd(true, true)
            .solve(&b, 1e-300)
            .expect("lstsq differentiation");
        out[i] = coeffs[1];
    }
    out
}
