//! Spectral model of the operator: eigenvalue scan, ε-shifted and β-split
//! truncated eigenbasis, and Gram matrices of matrix coefficients against
//! that basis.
//!
//! The shifted operator A_ε = A + εI is invertible with ||A_ε⁻¹|| ≤ 1/ε;
//! its spectrum splits the truncated basis into
//!   Jplus  = {λ' > 0},  Jzero = {-β < λ' < 0},  Jminus = {λ' < -β},
//! and the scalings s_j = |λ'_j|^{-1/2} realise |A_ε|^{-1/2} on the span.

use crate::error::{Error, Result};
use crate::operator::{OperatorSpec, Order};
use crate::path::MatrixPath;
use crate::quadrature::Quadrature;
use crate::scan;
use crate::shoot;
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

/// Default tolerance for locating eigenvalues by bisection of the boundary
/// map's smallest singular value.
pub const EIGEN_TOL: f64 = 1e-10;
/// Minimal admissible distance of ε-shifted eigenvalues from 0 and -β.
pub const GAP_TOL: f64 = 1e-6;
/// Base scan step for eigenvalue sweeps.
const SCAN_STEP: f64 = 0.05;

/// One eigenvalue of A with its orthonormalized kernel eigenfunctions
/// sampled at the quadrature nodes (node-major, `dim` components per node).
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda: f64,
    pub multiplicity: usize,
    pub functions: Vec<DVector<f64>>,
    /// Companion-space initial states generating the eigenfunctions.
    pub init_states: Vec<DVector<f64>>,
}

/// Locate every eigenvalue of A in `[lo, hi]`, each to |Δλ| ≤ tol, with
/// multiplicities and discretely orthonormalized eigenfunctions.
pub fn eigen_scan(op: &OperatorSpec, window: (f64, f64), tol: f64) -> Result<Vec<EigenPair>> {
    let quad = Arc::new(Quadrature::new(op.grid)?);
    eigen_scan_on(op, window, tol, &quad)
}

/// Locate eigenvalues only: (λ, multiplicity) pairs, ascending.
pub fn eigenvalues_in(
    op: &OperatorSpec,
    (lo, hi): (f64, f64),
    tol: f64,
) -> Result<Vec<(f64, usize)>> {
    if !(lo < hi) {
        return Err(Error::spec(format!("bad scan window [{lo}, {hi}]")));
    }
    let d = op.dim();
    let indicator =
        |lam: f64| -> Result<f64> { shoot::crossing_indicator(op, &MatrixPath::scalar(d, lam)) };
    let nullity_at = |lam: f64| -> Result<usize> {
        Ok(shoot::map_nullity(&shoot::boundary_map_for(
            op,
            &MatrixPath::scalar(d, lam),
        )?))
    };
    let n_samples = (((hi - lo) / SCAN_STEP).ceil() as usize).max(64);
    let result = scan::scan_dips(lo, hi, n_samples, tol, indicator, nullity_at)?;
    Ok(result
        .crossings
        .into_iter()
        .map(|c| (c.lambda, c.nullity))
        .collect())
}

/// As `eigen_scan` but sampling eigenfunctions on a caller-supplied rule.
pub fn eigen_scan_on(
    op: &OperatorSpec,
    window: (f64, f64),
    tol: f64,
    quad: &Arc<Quadrature>,
) -> Result<Vec<EigenPair>> {
    let located = eigenvalues_in(op, window, tol)?;
    let mut pairs = Vec::with_capacity(located.len());
    for (lambda, _) in &located {
        pairs.push(eigenpair_at(op, *lambda, quad)?);
    }
    Ok(pairs)
}

/// Build the eigenpair at a located eigenvalue.
fn eigenpair_at(op: &OperatorSpec, lambda: f64, quad: &Arc<Quadrature>) -> Result<EigenPair> {
    let d = op.dim();
    let path = MatrixPath::scalar(d, lambda);
    let map = shoot::boundary_map_for(op, &path)?;
    let kernel = shoot::kernel_basis(&map);
    if kernel.is_empty() {
        return Err(Error::numerical(format!(
            "no kernel at located eigenvalue {lambda}"
        )));
    }
    let init_states: Vec<DVector<f64>> = match op.initial_subspace() {
        Some(l0) => kernel.iter().map(|v| &l0 * v).collect(),
        None => kernel.clone(),
    };
    let psis = shoot::fundamental_samples(op, &path, &quad.nodes)?;
    let n = op.n;
    let mut functions = Vec::with_capacity(init_states.len());
    for y0 in &init_states {
        let mut f = DVector::zeros(quad.len() * d);
        for (q, psi) in psis.iter().enumerate() {
            let y = psi * y0;
            match op.order {
                Order::First => {
                    for c in 0..d {
                        f[q * d + c] = y[c];
                    }
                }
                Order::Second => {
                    for c in 0..n {
                        f[q * d + c] = y[c];
                    }
                }
            }
        }
        functions.push(f);
    }
    // modified Gram-Schmidt in the discrete L² inner product
    let mut ortho: Vec<DVector<f64>> = Vec::with_capacity(functions.len());
    for mut f in functions {
        for g in &ortho {
            let proj = quad.inner(d, f.as_slice(), g.as_slice());
            f -= g * proj;
        }
        let norm = quad.norm(d, f.as_slice());
        if norm < 1e-8 {
            // kernel vectors were linearly dependent after sampling
            continue;
        }
        ortho.push(f / norm);
    }
    Ok(EigenPair {
        lambda,
        multiplicity: ortho.len(),
        functions: ortho,
        init_states,
    })
}

/// Tunable inputs to `build_spectral_model`; `None` selects the defaults.
#[derive(Debug, Clone, Default)]
pub struct SpectralConfig {
    pub epsilon: Option<f64>,
    pub beta: Option<f64>,
    pub window: Option<f64>,
    /// Sup-norm bound on the Hessian of the intended nonlinearity (or on the
    /// comparison coefficient for linear runs); drives the β default 10·(M+ε).
    pub hessian_bound: Option<f64>,
}

impl SpectralConfig {
    pub fn with_bound(m: f64) -> Self {
        SpectralConfig {
            hessian_bound: Some(m),
            ..Default::default()
        }
    }
}

/// Truncated ε-shifted, β-split eigen-decomposition of A_ε.
#[derive(Debug, Clone)]
pub struct SpectralModel {
    pub op: OperatorSpec,
    pub epsilon: f64,
    pub beta: f64,
    pub window: f64,
    pub quad: Arc<Quadrature>,
    /// Component dimension of the basis functions.
    pub dim: usize,
    pub eigs: Vec<EigenPair>,
    /// Eigenvalue of A per basis function, ascending, with multiplicity.
    pub lambda_a: DVector<f64>,
    /// Shifted eigenvalues λ' = λ + ε of A_ε.
    pub lambda_eps: DVector<f64>,
    /// Scalings s_j = |λ'_j|^{-1/2}.
    pub scalings: DVector<f64>,
    /// Basis sample matrix, (quad.len()·dim) × m, node-major rows.
    pub basis: DMatrix<f64>,
    pub jplus: Vec<usize>,
    pub jzero: Vec<usize>,
    pub jminus: Vec<usize>,
}

/// Assemble the spectral model. Defaults: ε = ½·min(1, dist(0, σ(A)\{0}))
/// (which also keeps (-2ε, 0) free of spectrum), β = 10·(M+ε) snapped to the
/// midpoint of the nearest spectral gap of A_ε below, window Λ = 4β, and a
/// quadrature refined enough to resolve products of the included modes.
pub fn build_spectral_model(op: &OperatorSpec, cfg: &SpectralConfig) -> Result<SpectralModel> {
    let epsilon = resolve_epsilon(op, cfg.epsilon)?;
    let m_bound = cfg.hessian_bound.unwrap_or(1.0);
    let beta = resolve_beta(op, epsilon, cfg.beta, m_bound)?;
    let window = match cfg.window {
        Some(w) => {
            if w < 2.0 * beta {
                return Err(Error::spec(format!(
                    "window {w} too small to contain beta {beta} with margin (need >= 2*beta)"
                )));
            }
            w
        }
        None => 4.0 * beta,
    };

    // refine the quadrature so pairwise mode products are resolved
    let max_freq = match op.order {
        Order::First => window,
        Order::Second => window.max(0.0).sqrt(),
    };
    let grid_eff = op.grid.max(((5.0 * max_freq).ceil() as usize).div_ceil(4) * 4);
    let quad = Arc::new(Quadrature::new(grid_eff.max(64))?);

    let eigs = eigen_scan_on(
        op,
        (-window - epsilon, window - epsilon),
        EIGEN_TOL,
        &quad,
    )?;

    let d = op.dim();
    let m: usize = eigs.iter().map(|e| e.multiplicity).sum();
    if m == 0 {
        return Err(Error::numerical(
            "truncation window contains no eigenvalues",
        ));
    }
    let mut lambda_a = DVector::zeros(m);
    let mut basis = DMatrix::zeros(quad.len() * d, m);
    let mut col = 0;
    for pair in &eigs {
        for f in &pair.functions {
            lambda_a[col] = pair.lambda;
            basis.set_column(col, f);
            col += 1;
        }
    }
    let lambda_eps = lambda_a.map(|l| l + epsilon);
    for &lp in lambda_eps.iter() {
        if lp.abs() < GAP_TOL {
            return Err(Error::numerical(format!(
                "eigenvalue of A_eps at {lp:.3e} is within {GAP_TOL:.0e} of 0; adjust epsilon"
            )));
        }
        if (lp + beta).abs() < GAP_TOL {
            return Err(Error::numerical(format!(
                "beta in spectrum: eigenvalue of A_eps at {lp:.6} within {GAP_TOL:.0e} of -beta"
            )));
        }
    }
    let scalings = lambda_eps.map(|l| 1.0 / l.abs().sqrt());
    let mut jplus = Vec::new();
    let mut jzero = Vec::new();
    let mut jminus = Vec::new();
    for (j, &lp) in lambda_eps.iter().enumerate() {
        if lp > 0.0 {
            jplus.push(j);
        } else if lp > -beta {
            jzero.push(j);
        } else {
            jminus.push(j);
        }
    }

    Ok(SpectralModel {
        op: op.clone(),
        epsilon,
        beta,
        window,
        quad,
        dim: d,
        eigs,
        lambda_a,
        lambda_eps,
        scalings,
        basis,
        jplus,
        jzero,
        jminus,
    })
}

fn resolve_epsilon(op: &OperatorSpec, explicit: Option<f64>) -> Result<f64> {
    if let Some(e) = explicit {
        if e <= 0.0 {
            return Err(Error::spec("epsilon must be positive"));
        }
        // -ε must not be an eigenvalue of A
        let near = eigen_scan(op, (-e - 0.5, -e + 0.5), EIGEN_TOL)?;
        for p in &near {
            if (p.lambda + e).abs() < GAP_TOL {
                return Err(Error::spec(format!(
                    "epsilon {e} collides with spectrum: eigenvalue at {:.9}",
                    p.lambda
                )));
            }
        }
        return Ok(e);
    }
    // distance from 0 to the nonzero spectrum
    let mut w = 2.0;
    loop {
        let pairs = eigen_scan(op, (-w, w), EIGEN_TOL)?;
        let dist = pairs
            .iter()
            .map(|p| p.lambda.abs())
            .filter(|a| *a > 1e-8)
            .fold(f64::INFINITY, f64::min);
        if dist.is_finite() {
            return Ok(0.5 * dist.min(1.0));
        }
        w *= 2.0;
        if w > 1e6 {
            return Err(Error::numerical(
                "could not locate any nonzero eigenvalue of A",
            ));
        }
    }
}

fn resolve_beta(op: &OperatorSpec, epsilon: f64, explicit: Option<f64>, m_bound: f64) -> Result<f64> {

    let check_not_in_spectrum = |beta: f64| -> Result<()> {
        let near = eigen_scan(op, (-beta - epsilon - 0.5, -beta - epsilon + 0.5), EIGEN_TOL)?;
        for p in &near {
            if (p.lambda + epsilon + beta).abs() < GAP_TOL {
                return Err(Error::spec(format!(
                    "beta in spectrum: eigenvalue of A_eps at {:.9}",
                    p.lambda + epsilon
                )));
            }
        }
        Ok(())
    };
    if let Some(b) = explicit {
        if b <= 0.0 {
            return Err(Error::spec("beta must be positive"));
        }
        check_not_in_spectrum(b)?;
        return Ok(b);
    }
    let beta0 = 10.0 * (m_bound + epsilon);
    // find the two eigenvalues of A_eps straddling the gap below -beta0
    let mut lo = -beta0 - epsilon - 20.0;
    let hi = -beta0 - epsilon + 0.0;
    for _ in 0..8 {
        let pairs = eigen_scan(op, (lo, hi), EIGEN_TOL)?;
        let below: Vec<f64> = pairs
            .iter()
            .map(|p| p.lambda + epsilon)
            .filter(|lp| *lp <= -beta0)
            .collect();
        if below.len() >= 2 {
            let top = below[below.len() - 1];
            let next = below[below.len() - 2];
            return Ok(-(top + next) / 2.0);
        }
        if below.is_empty() && lo < -beta0 - epsilon - 320.0 {
            // bounded below: nothing down here, keep the unsnapped default
            check_not_in_spectrum(beta0)?;
            return Ok(beta0);
        }
        lo -= 40.0 * (lo.abs() / beta0.max(1.0)).max(1.0);
    }
    check_not_in_spectrum(beta0)?;
    Ok(beta0)
}

impl SpectralModel {
    /// Number of basis functions.
    pub fn len(&self) -> usize {
        self.lambda_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda_a.len() == 0
    }

    /// Indices of the E = X⁺ ⊕ X⁰ block, ascending.
    pub fn e_indices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.jplus.iter().chain(self.jzero.iter()).cloned().collect();
        v.sort_unstable();
        v
    }

    /// +1 for Jplus members, -1 for Jzero, indexed like `e_indices`.
    pub fn e_signs(&self) -> Vec<f64> {
        self.e_indices()
            .iter()
            .map(|&j| if self.lambda_eps[j] > 0.0 { 1.0 } else { -1.0 })
            .collect()
    }

    /// Trajectory samples x = Σ c_j s_j e_j (node-major, dim components).
    pub fn trajectory(&self, coeffs: &DVector<f64>) -> DVector<f64> {
        assert_eq!(coeffs.len(), self.len());
        let scaled = coeffs.component_mul(&self.scalings);
        &self.basis * scaled
    }

    /// Coefficients ∫(f, e_j) dt for all j, for node-major samples f.
    pub fn project(&self, samples: &DVector<f64>) -> DVector<f64> {
        let w = self.quad.expanded_weights(self.dim);
        self.basis.transpose() * samples.component_mul(&w)
    }

    /// Gram matrix G_ij = ∫ ((B(t) + shift·I) e_j(t), e_i(t)) dt.
    pub fn gram(&self, b: &MatrixPath, shift: f64) -> Result<DMatrix<f64>> {
        gram_matrix(self, b, shift)
    }

    /// The matrix T = D·G·D with D = diag(s_j): the truncated form of
    /// |A_ε|^{-1/2} (B + shift) |A_ε|^{-1/2}.
    pub fn scaled_gram(&self, b: &MatrixPath, shift: f64) -> Result<DMatrix<f64>> {
        let mut g = self.gram(b, shift)?;
        let s = &self.scalings;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                g[(i, j)] *= s[i] * s[j];
            }
        }
        Ok(g)
    }
}

/// Gram matrix of a coefficient path against the model basis.
pub fn gram_matrix(model: &SpectralModel, b: &MatrixPath, shift: f64) -> Result<DMatrix<f64>> {
    let d = model.dim;
    if b.dim() != d {
        return Err(Error::spec(format!(
            "matrix path dimension {} does not match model dimension {d}",
            b.dim()
        )));
    }
    let values = b.eval_nodes(&model.quad);
    gram_from_values(model, &values, shift)
}

/// Gram matrix from coefficient values already evaluated at the model's
/// quadrature nodes.
pub fn gram_from_values(
    model: &SpectralModel,
    values: &[DMatrix<f64>],
    shift: f64,
) -> Result<DMatrix<f64>> {
    let d = model.dim;
    let nq = model.quad.len();
    if values.len() != nq {
        return Err(Error::spec(format!(
            "grid mismatch: {} coefficient samples for {} quadrature nodes",
            values.len(),
            nq
        )));
    }
    let m = model.len();
    // Y[q-block] = w_q (B_q + shift) E[q-block]
    let mut y = DMatrix::zeros(nq * d, m);
    let eye = DMatrix::identity(d, d);
    for q in 0..nq {
        let wq = model.quad.weights[q];
        let bq = &values[q] + &eye * shift;
        let eblock = model.basis.view((q * d, 0), (d, m));
        y.view_mut((q * d, 0), (d, m)).copy_from(&(bq * eblock * wq));
    }
    let g = model.basis.transpose() * y;
    let scale = g.norm().max(1.0);
    let defect = (&g - g.transpose()).norm();
    if defect > 1e-12 * scale {
        return Err(Error::numerical(format!(
            "gram matrix asymmetric: defect {defect:.3e}"
        )));
    }
    Ok(0.5 * (&g + g.transpose()))
}
