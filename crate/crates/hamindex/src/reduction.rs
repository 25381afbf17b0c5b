//! Saddle-point reduction.
//!
//! The strongly negative spectral block u⁻ (coefficients over Jminus) is
//! eliminated by a Picard fixed point: with x(t) = Σ c_k s_k e_k(t),
//!
//!   c_j ← -s_j ∫ (H'(t, x(t)) + ε x(t), e_j(t)) dt,   j ∈ Jminus,
//!
//! a contraction of rate at most (M+ε)/β. The reduced functional on the
//! remaining coefficients u* = (u⁺, u⁰) is
//!
//!   a(u*) = ½ Σ_{J⁺} c² - ½ Σ_{J⁰} c² - ½ Σ_{J⁻} c²
//!           - ∫ H(t, x) dt - (ε/2) ∫ |x|² dt,
//!
//! with gradient ±c_j - s_j ∫ (H' + εx, e_j) and Hessian
//! diag(±1) - T_EE + T_EM (I + T_MM)⁻¹ T_ME where T = D·G(H''(·,x)+εI)·D.
//! Critical points of `a` correspond to solutions of the original equation;
//! `recover_solution` reassembles the trajectory and reports the Galerkin
//! residual plus a truncation-tail estimate.

use crate::error::{Error, Result};
use crate::index::submatrix;
use crate::operator::OperatorSpec;
use crate::path::MatrixPath;
use crate::spectral::{gram_from_values, SpectralModel};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

pub const FP_TOL: f64 = 1e-12;
pub const MAX_PICARD_ITERS: usize = 200;

type ScalarFn = dyn Fn(f64, &[f64]) -> f64 + Send + Sync;
type VectorFn = dyn Fn(f64, &[f64]) -> DVector<f64> + Send + Sync;
type MatrixFn = dyn Fn(f64, &[f64]) -> DMatrix<f64> + Send + Sync;

/// Comparison data for the asymptotic-linearity hypotheses.
#[derive(Debug, Clone)]
pub struct ComparisonData {
    pub b0: MatrixPath,
    pub b1: MatrixPath,
    pub b2: MatrixPath,
}

/// A nonlinearity H(t,x) with its gradient and Hessian evaluators, a sup-norm
/// bound M on the Hessian, and the asymptotic radius r.
#[derive(Clone)]
pub struct NonlinearProblem {
    pub op: OperatorSpec,
    h: Arc<ScalarFn>,
    grad: Arc<VectorFn>,
    hess: Arc<MatrixFn>,
    pub hessian_bound: f64,
    pub asymptotic_radius: f64,
    pub comparison: Option<ComparisonData>,
    pub name: String,
}

impl std::fmt::Debug for NonlinearProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "NonlinearProblem({}, M={}, r={})",
            self.name, self.hessian_bound, self.asymptotic_radius
        )
    }
}

impl NonlinearProblem {
    /// Build and validate. H is normalized so that H(t,0) = 0; the gradient
    /// must vanish at x = 0 and the Hessian must be symmetric and bounded by
    /// `hessian_bound` at probe points.
    pub fn new(
        op: OperatorSpec,
        name: impl Into<String>,
        h: Arc<ScalarFn>,
        grad: Arc<VectorFn>,
        hess: Arc<MatrixFn>,
        hessian_bound: f64,
        asymptotic_radius: f64,
    ) -> Result<Self> {
        let d = op.dim();
        let zero = vec![0.0; d];
        for k in 0..=8 {
            let t = k as f64 / 8.0;
            let g0 = grad(t, &zero);
            if g0.norm() > 1e-12 {
                return Err(Error::spec(format!(
                    "gradH(t,0) != 0 at t={t}: |gradH| = {:.3e}",
                    g0.norm()
                )));
            }
            // probes on a few rays
            for (i, scale) in [(0usize, 0.37), (d - 1, -1.21), (0, 2.9)] {
                let mut x = zero.clone();
                x[i] = scale;
                let hm = hess(t, &x);
                let defect = (&hm - hm.transpose()).norm();
                if defect > 1e-10 {
                    return Err(Error::spec(format!(
                        "hessH not symmetric at t={t}: defect {defect:.3e}"
                    )));
                }
                let norm = hm
                    .symmetric_eigen()
                    .eigenvalues
                    .iter()
                    .fold(0.0f64, |a, &v| a.max(v.abs()));
                if norm > hessian_bound * (1.0 + 1e-9) + 1e-12 {
                    return Err(Error::spec(format!(
                        "hessH exceeds the declared bound M={hessian_bound} at t={t}: {norm}"
                    )));
                }
            }
        }
        // normalize the additive constant so H(t,0) = 0
        let h_raw = h.clone();
        let zero2 = zero.clone();
        let h_norm: Arc<ScalarFn> = Arc::new(move |t, x| h_raw(t, x) - h_raw(t, &zero2));
        Ok(NonlinearProblem {
            op,
            h: h_norm,
            grad,
            hess,
            hessian_bound,
            asymptotic_radius,
            comparison: None,
            name: name.into(),
        })
    }

    pub fn with_comparison(mut self, b0: MatrixPath, b1: MatrixPath, b2: MatrixPath) -> Self {
        self.comparison = Some(ComparisonData { b0, b1, b2 });
        self
    }

    pub fn with_radius(mut self, r: f64) -> Self {
        self.asymptotic_radius = r;
        self
    }

    pub fn h_at(&self, t: f64, x: &[f64]) -> f64 {
        (self.h)(t, x)
    }

    pub fn grad_at(&self, t: f64, x: &[f64]) -> DVector<f64> {
        (self.grad)(t, x)
    }

    pub fn hess_at(&self, t: f64, x: &[f64]) -> DMatrix<f64> {
        (self.hess)(t, x)
    }

    /// The Hessian along a trajectory as a coefficient path (sampled on the
    /// model quadrature, interpolated in between).
    pub fn hessian_along(
        &self,
        quad: Arc<crate::quadrature::Quadrature>,
        x_samples: &DVector<f64>,
    ) -> Result<MatrixPath> {
        let d = self.op.dim();
        let values: Vec<DMatrix<f64>> = quad
            .nodes
            .iter()
            .enumerate()
            .map(|(q, &t)| self.hess_at(t, &x_samples.as_slice()[q * d..(q + 1) * d]))
            .collect();
        MatrixPath::from_samples(quad, values)
    }
}

/// Outcome of the u⁻ fixed-point solve.
#[derive(Debug, Clone)]
pub struct MinusSolve {
    /// Coefficients over Jminus (in the order of `model.jminus`).
    pub coeffs: DVector<f64>,
    /// Largest observed ratio of successive Picard increments.
    pub contraction_factor: f64,
    pub iterations: usize,
}

/// Contraction rate bound (M+ε)/β for the problem on this model.
pub fn contraction_bound(model: &SpectralModel, prob: &NonlinearProblem) -> f64 {
    (prob.hessian_bound + model.epsilon) / model.beta
}

fn full_coefficients(
    model: &SpectralModel,
    ustar: &DVector<f64>,
    uminus: &DVector<f64>,
) -> DVector<f64> {
    let e_idx = model.e_indices();
    assert_eq!(ustar.len(), e_idx.len(), "ustar length mismatch");
    assert_eq!(uminus.len(), model.jminus.len(), "uminus length mismatch");
    let mut c = DVector::zeros(model.len());
    for (k, &j) in e_idx.iter().enumerate() {
        c[j] = ustar[k];
    }
    for (k, &j) in model.jminus.iter().enumerate() {
        c[j] = uminus[k];
    }
    c
}

/// Samples of H'(t,x(t)) + ε x(t) at the quadrature nodes (node-major).
fn shifted_gradient_samples(
    model: &SpectralModel,
    prob: &NonlinearProblem,
    x: &DVector<f64>,
) -> DVector<f64> {
    let d = model.dim;
    let mut out = DVector::zeros(x.len());
    for (q, &t) in model.quad.nodes.iter().enumerate() {
        let xs = &x.as_slice()[q * d..(q + 1) * d];
        let g = prob.grad_at(t, xs);
        for c in 0..d {
            out[q * d + c] = g[c] + model.epsilon * xs[c];
        }
    }
    out
}

/// Solve the Jminus fixed-point equation for fixed u* coefficients.
pub fn solve_minus(
    model: &SpectralModel,
    prob: &NonlinearProblem,
    ustar: &DVector<f64>,
    fp_tol: f64,
) -> Result<MinusSolve> {
    let rate = contraction_bound(model, prob);
    if rate >= 1.0 {
        return Err(Error::numerical(format!(
            "contraction precondition violated: (M+eps)/beta = {rate} >= 1"
        )));
    }
    let n_minus = model.jminus.len();
    if n_minus == 0 {
        return Ok(MinusSolve {
            coeffs: DVector::zeros(0),
            contraction_factor: 0.0,
            iterations: 0,
        });
    }
    let mut cm = DVector::zeros(n_minus);
    let mut prev_delta: Option<f64> = None;
    let mut factor = 0.0f64;
    let stop = fp_tol * (1.0 - rate);
    for it in 1..=MAX_PICARD_ITERS {
        let c = full_coefficients(model, ustar, &cm);
        let x = model.trajectory(&c);
        let w = model.project(&shifted_gradient_samples(model, prob, &x));
        let mut cm_new = DVector::zeros(n_minus);
        for (k, &j) in model.jminus.iter().enumerate() {
            cm_new[k] = -model.scalings[j] * w[j];
        }
        let delta = (&cm_new - &cm).norm();
        if let Some(p) = prev_delta {
            if p > 1e-300 {
                factor = factor.max(delta / p);
            }
        }
        prev_delta = Some(delta);
        cm = cm_new;
        if delta <= stop {
            return Ok(MinusSolve {
                coeffs: cm,
                contraction_factor: factor,
                iterations: it,
            });
        }
    }
    Err(Error::numerical(format!(
        "u⁻ fixed point did not converge within {MAX_PICARD_ITERS} iterations"
    )))
}

/// Value of the reduced functional a(u*).
pub fn reduced_value(
    model: &SpectralModel,
    prob: &NonlinearProblem,
    ustar: &DVector<f64>,
) -> Result<f64> {
    let minus = solve_minus(model, prob, ustar, FP_TOL)?;
    let c = full_coefficients(model, ustar, &minus.coeffs);
    let x = model.trajectory(&c);
    let d = model.dim;
    let mut quadratic = 0.0;
    for &j in &model.jplus {
        quadratic += 0.5 * c[j] * c[j];
    }
    for &j in model.jzero.iter().chain(model.jminus.iter()) {
        quadratic -= 0.5 * c[j] * c[j];
    }
    let mut phi = 0.0;
    for (q, &t) in model.quad.nodes.iter().enumerate() {
        let xs = &x.as_slice()[q * d..(q + 1) * d];
        let x2: f64 = xs.iter().map(|v| v * v).sum();
        phi += model.quad.weights[q] * (prob.h_at(t, xs) + 0.5 * model.epsilon * x2);
    }
    Ok(quadratic - phi)
}

/// Gradient of the reduced functional over the E-block coefficients.
pub fn reduced_gradient(
    model: &SpectralModel,
    prob: &NonlinearProblem,
    ustar: &DVector<f64>,
) -> Result<DVector<f64>> {
    let minus = solve_minus(model, prob, ustar, FP_TOL)?;
    reduced_gradient_at(model, prob, ustar, &minus)
}

/// Gradient reusing an existing u⁻ solve.
pub fn reduced_gradient_at(
    model: &SpectralModel,
    prob: &NonlinearProblem,
    ustar: &DVector<f64>,
    minus: &MinusSolve,
) -> Result<DVector<f64>> {
    let c = full_coefficients(model, ustar, &minus.coeffs);
    let x = model.trajectory(&c);
    let w = model.project(&shifted_gradient_samples(model, prob, &x));
    let e_idx = model.e_indices();
    let signs = model.e_signs();
    let mut g = DVector::zeros(e_idx.len());
    for (k, &j) in e_idx.iter().enumerate() {
        g[k] = signs[k] * c[j] - model.scalings[j] * w[j];
    }
    Ok(g)
}

/// Hessian of the reduced functional over the E-block coefficients.
pub fn reduced_hessian(
    model: &SpectralModel,
    prob: &NonlinearProblem,
    ustar: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let minus = solve_minus(model, prob, ustar, FP_TOL)?;
    reduced_hessian_at(model, prob, ustar, &minus)
}

pub fn reduced_hessian_at(
    model: &SpectralModel,
    prob: &NonlinearProblem,
    ustar: &DVector<f64>,
    minus: &MinusSolve,
) -> Result<DMatrix<f64>> {
    let c = full_coefficients(model, ustar, &minus.coeffs);
    let x = model.trajectory(&c);
    let d = model.dim;
    let values: Vec<DMatrix<f64>> = model
        .quad
        .nodes
        .iter()
        .enumerate()
        .map(|(q, &t)| prob.hess_at(t, &x.as_slice()[q * d..(q + 1) * d]))
        .collect();
    let mut t_mat = gram_from_values(model, &values, model.epsilon)?;
    let s = &model.scalings;
    for i in 0..t_mat.nrows() {
        for j in 0..t_mat.ncols() {
            t_mat[(i, j)] *= s[i] * s[j];
        }
    }
    let e_idx = model.e_indices();
    let m_idx = &model.jminus;
    let tee = submatrix(&t_mat, &e_idx, &e_idx);
    let signs = model.e_signs();
    let mut h = -tee;
    for (k, sgn) in signs.iter().enumerate() {
        h[(k, k)] += sgn;
    }
    if !m_idx.is_empty() {
        let tem = submatrix(&t_mat, &e_idx, m_idx);
        let tmm = submatrix(&t_mat, m_idx, m_idx);
        let imm = DMatrix::identity(m_idx.len(), m_idx.len()) + &tmm;
        // the guaranteed bound ||T_MM|| <= (M+eps)/beta < 1 keeps this block
        // well conditioned; estimate and report if it degrades anyway
        let lu = imm.clone().lu();
        let solved = lu
            .solve(&tem.transpose())
            .ok_or_else(|| Error::numerical("minus-block solve failed (I + T_MM singular)"))?;
        let cond = condition_estimate(&imm);
        if cond > 1e8 {
            return Err(Error::numerical(format!(
                "minus-block solve ill-conditioned: estimated condition {cond:.3e}"
            )));
        }
        h += tem * solved;
    }
    let defect = (&h - h.transpose()).norm();
    if defect > 1e-10 * h.norm().max(1.0) {
        return Err(Error::numerical(format!(
            "reduced Hessian asymmetric: defect {defect:.3e}"
        )));
    }
    Ok(0.5 * (&h + h.transpose()))
}

fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0f64, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// A recovered trajectory with its Galerkin residual.
#[derive(Debug, Clone)]
pub struct Recovered {
    /// Node-major samples of x(t) on the model quadrature.
    pub x_samples: DVector<f64>,
    /// Norm of the projection of Ax - H'(·,x) onto the truncated basis.
    pub residual: f64,
    /// Truncation tail estimate M·||x|| / Λ.
    pub tail_estimate: f64,
    pub minus: MinusSolve,
}

/// Recover the trajectory for given u* and measure how well it solves the
/// original equation within the truncated span.
pub fn recover_solution(
    model: &SpectralModel,
    prob: &NonlinearProblem,
    ustar: &DVector<f64>,
) -> Result<Recovered> {
    let minus = solve_minus(model, prob, ustar, FP_TOL)?;
    let c = full_coefficients(model, ustar, &minus.coeffs);
    let x = model.trajectory(&c);
    let d = model.dim;
    let mut grad_samples = DVector::zeros(x.len());
    for (q, &t) in model.quad.nodes.iter().enumerate() {
        let xs = &x.as_slice()[q * d..(q + 1) * d];
        let g = prob.grad_at(t, xs);
        for cc in 0..d {
            grad_samples[q * d + cc] = g[cc];
        }
    }
    let w = model.project(&grad_samples);
    let mut sq = 0.0;
    for j in 0..model.len() {
        let r = model.lambda_a[j] * c[j] * model.scalings[j] - w[j];
        sq += r * r;
    }
    let xnorm = model.quad.norm(d, x.as_slice());
    let tail_estimate = (prob.hessian_bound + model.epsilon) * xnorm / model.window;
    Ok(Recovered {
        x_samples: x,
        residual: sq.sqrt(),
        tail_estimate,
        minus,
    })
}

/// The integral decomposition H'(t,x) = B(t,x)·x + C(t,x) with
/// B(t,x) = ∫₀¹ H''(t, θx) dθ for |x| ≥ r/δ and B(t,x) = B1(t) otherwise.
pub fn decompose_gradient(
    prob: &NonlinearProblem,
    x_probe: &DVector<f64>,
    t: f64,
    b1: &MatrixPath,
    delta: f64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if !(0.0 < delta && delta < 1.0) {
        return Err(Error::spec("delta must lie in (0,1)"));
    }
    let d = x_probe.len();
    let r = prob.asymptotic_radius;
    let bpart = if x_probe.norm() >= r / delta {
        let quad = crate::quadrature::Quadrature::new(64)?;
        let mut acc = DMatrix::zeros(d, d);
        for (q, &theta) in quad.nodes.iter().enumerate() {
            let xs: Vec<f64> = x_probe.iter().map(|v| theta * v).collect();
            acc += prob.hess_at(t, &xs) * quad.weights[q];
        }
        acc
    } else {
        b1.eval(t)
    };
    let cpart = prob.grad_at(t, x_probe.as_slice()) - &bpart * x_probe;
    Ok((bpart, cpart))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{build_operator, BoundaryCondition, Order};
    use crate::spectral::{build_spectral_model, SpectralConfig};
    use std::f64::consts::PI;

    fn zero_problem(op: &OperatorSpec) -> NonlinearProblem {
        let d = op.dim();
        NonlinearProblem::new(
            op.clone(),
            "zero",
            Arc::new(|_t, _x| 0.0),
            Arc::new(move |_t, _x| DVector::zeros(d)),
            Arc::new(move |_t, _x| DMatrix::zeros(d, d)),
            0.0,
            1.0,
        )
        .unwrap()
    }

    /// Second-order arctan spring: V(x) = (a/2)x² − b(x·atan x − ½log(1+x²)).
    fn arctan_spring(op: &OperatorSpec, a: f64, b: f64) -> NonlinearProblem {
        NonlinearProblem::new(
            op.clone(),
            "arctan_spring",
            Arc::new(move |_t, x: &[f64]| {
                let v = x[0];
                0.5 * a * v * v - b * (v * v.atan() - 0.5 * v.mul_add(v, 1.0).ln())
            }),
            Arc::new(move |_t, x: &[f64]| {
                DVector::from_element(1, a * x[0] - b * x[0].atan())
            }),
            Arc::new(move |_t, x: &[f64]| {
                DMatrix::from_element(1, 1, a - b / (1.0 + x[0] * x[0]))
            }),
            a.max((a - b).abs()),
            1.0,
        )
        .unwrap()
    }

    fn dirichlet_sl() -> OperatorSpec {
        build_operator(
            BoundaryCondition::sturm_liouville(0.0, PI).unwrap(),
            Order::Second,
            1,
            1024,
        )
        .unwrap()
    }

    fn bolza01() -> OperatorSpec {
        build_operator(
            BoundaryCondition::bolza(0.0, PI).unwrap(),
            Order::First,
            1,
            1024,
        )
        .unwrap()
    }

    /// First-order lifted arctan spring: H = V(x1) + x2²/2.
    fn lifted_arctan(op: &OperatorSpec, a: f64, b: f64) -> NonlinearProblem {
        NonlinearProblem::new(
            op.clone(),
            "arctan_spring_lifted",
            Arc::new(move |_t, x: &[f64]| {
                let v = x[0];
                0.5 * a * v * v - b * (v * v.atan() - 0.5 * v.mul_add(v, 1.0).ln())
                    + 0.5 * x[1] * x[1]
            }),
            Arc::new(move |_t, x: &[f64]| {
                DVector::from_vec(vec![a * x[0] - b * x[0].atan(), x[1]])
            }),
            Arc::new(move |_t, x: &[f64]| {
                DMatrix::from_row_slice(
                    2,
                    2,
                    &[a - b / (1.0 + x[0] * x[0]), 0.0, 0.0, 1.0],
                )
            }),
            a.max(1.0),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn zero_problem_minus_solve_is_zero() {
        let op = bolza01();
        let model = build_spectral_model(&op, &SpectralConfig::with_bound(1.0)).unwrap();
        let prob = zero_problem(&op);
        let e_len = model.e_indices().len();
        // the map is linear diagonal c ↦ -(ε/|λ'|)c with unique fixed point 0
        let mut ustar = DVector::zeros(e_len);
        let m = solve_minus(&model, &prob, &ustar, FP_TOL).unwrap();
        assert!(m.coeffs.norm() < 1e-14);
        ustar[0] = 1.0;
        let m = solve_minus(&model, &prob, &ustar, FP_TOL).unwrap();
        assert!(m.coeffs.norm() < 1e-12);
        assert!(m.contraction_factor <= contraction_bound(&model, &prob) + 1e-12);
    }

    #[test]
    fn reduced_value_single_mode_closed_form() {
        let op = bolza01();
        let model = build_spectral_model(&op, &SpectralConfig::with_bound(1.0)).unwrap();
        let prob = zero_problem(&op);
        let e_idx = model.e_indices();
        // pick a Jplus mode
        let (k, &j) = e_idx
            .iter()
            .enumerate()
            .find(|(_, &j)| model.lambda_eps[j] > 0.0)
            .unwrap();
        let mut ustar = DVector::zeros(e_idx.len());
        assert!(reduced_value(&model, &prob, &ustar).unwrap().abs() < 1e-14);
        ustar[k] = 1.0;
        let a = reduced_value(&model, &prob, &ustar).unwrap();
        let expected = model.lambda_a[j] / (2.0 * model.lambda_eps[j]);
        assert!(
            (a - expected).abs() < 1e-10,
            "a = {a}, closed form {expected}"
        );
        // gradient component (1 - eps/lambda')
        let g = reduced_gradient(&model, &prob, &ustar).unwrap();
        let expected_g = 1.0 - model.epsilon / model.lambda_eps[j];
        assert!((g[k] - expected_g).abs() < 1e-10);
    }

    #[test]
    fn reduced_hessian_diagonal_for_zero_problem() {
        let op = bolza01();
        let model = build_spectral_model(&op, &SpectralConfig::with_bound(1.0)).unwrap();
        let prob = zero_problem(&op);
        let e_idx = model.e_indices();
        let ustar = DVector::zeros(e_idx.len());
        let h = reduced_hessian(&model, &prob, &ustar).unwrap();
        for (k, &j) in e_idx.iter().enumerate() {
            let lp = model.lambda_eps[j];
            let expected = if lp > 0.0 {
                1.0 - model.epsilon / lp
            } else {
                -1.0 - model.epsilon / lp.abs() * (-1.0f64)
            };
            // for Jzero: -1 - s²·(ε·G₀)·(-1)... the T-term is ε/|λ'| on the
            // diagonal, so the entry is -1 - ε/|λ'| + correction-free value
            let expected = if lp > 0.0 { expected } else { -1.0 - model.epsilon / lp.abs() };
            assert!(
                (h[(k, k)] - expected).abs() < 1e-10,
                "diag {k}: {} vs {expected}",
                h[(k, k)]
            );
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let op = dirichlet_sl();
        let model = build_spectral_model(&op, &SpectralConfig::with_bound(25.5)).unwrap();
        let prob = arctan_spring(&op, 25.0, 20.0);
        let e_len = model.e_indices().len();
        let mut rng_state = 123456789u64;
        let mut next = move || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((rng_state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        for _ in 0..3 {
            let ustar = DVector::from_fn(e_len, |_, _| next());
            let g = reduced_gradient(&model, &prob, &ustar).unwrap();
            let h = 1e-6;
            for k in 0..e_len.min(4) {
                let mut up = ustar.clone();
                let mut dn = ustar.clone();
                up[k] += h;
                dn[k] -= h;
                let fd = (reduced_value(&model, &prob, &up).unwrap()
                    - reduced_value(&model, &prob, &dn).unwrap())
                    / (2.0 * h);
                let rel = (g[k] - fd).abs() / g[k].abs().max(1.0);
                assert!(rel <= 1e-6, "component {k}: grad {} fd {fd}", g[k]);
            }
        }
    }

    #[test]
    fn hessian_matches_fd_of_gradient() {
        let op = dirichlet_sl();
        let model = build_spectral_model(&op, &SpectralConfig::with_bound(25.5)).unwrap();
        let prob = arctan_spring(&op, 25.0, 20.0);
        let e_len = model.e_indices().len();
        let ustar = DVector::from_fn(e_len, |k, _| 0.3 / (k + 1) as f64);
        let hess = reduced_hessian(&model, &prob, &ustar).unwrap();
        let h = 1e-5;
        for k in 0..e_len.min(3) {
            let mut up = ustar.clone();
            let mut dn = ustar.clone();
            up[k] += h;
            dn[k] -= h;
            let gu = reduced_gradient(&model, &prob, &up).unwrap();
            let gd = reduced_gradient(&model, &prob, &dn).unwrap();
            for l in 0..e_len {
                let fd = (gu[l] - gd[l]) / (2.0 * h);
                let rel = (hess[(l, k)] - fd).abs() / hess[(l, k)].abs().max(1.0);
                assert!(rel <= 1e-5, "H[{l},{k}] = {} fd {fd}", hess[(l, k)]);
            }
        }
    }

    #[test]
    fn hessian_at_zero_matches_qform_operator() {
        // ties the reduction to the q-form machinery: a''(θ) = (I - 𝓑)_EE
        let op = bolza01();
        let a = 12.0;
        let b = 9.0;
        let model = build_spectral_model(&op, &SpectralConfig::with_bound(a)).unwrap();
        let prob = lifted_arctan(&op, a, b);
        let e_len = model.e_indices().len();
        let h = reduced_hessian(&model, &prob, &DVector::zeros(e_len)).unwrap();
        let b0 = crate::path::lift_diag_identity(&MatrixPath::scalar(1, a - b));
        let bb = crate::index::qform_operator(&model, &b0).unwrap();
        let diff = (&h - (DMatrix::identity(e_len, e_len) - &bb)).norm();
        assert!(diff <= 1e-9, "a''(0) vs I - B: {diff:.3e}");
    }

    #[test]
    fn lifted_contraction_within_bound() {
        let op = bolza01();
        let a = 12.0;
        let b = 9.0;
        let model = build_spectral_model(&op, &SpectralConfig::with_bound(a)).unwrap();
        let prob = lifted_arctan(&op, a, b);
        assert!(!model.jminus.is_empty());
        let bound = contraction_bound(&model, &prob);
        assert!(bound <= 0.1 + 1e-9, "bound {bound}");
        let e_len = model.e_indices().len();
        let ustar = DVector::from_fn(e_len, |k, _| if k < 6 { 1.5 / (k + 1) as f64 } else { 0.0 });
        let m = solve_minus(&model, &prob, &ustar, FP_TOL).unwrap();
        assert!(
            m.contraction_factor <= bound,
            "observed {} bound {bound}",
            m.contraction_factor
        );
        assert!(m.iterations <= MAX_PICARD_ITERS);
    }

    #[test]
    fn recover_zero_is_exact_and_nonzero_has_residual() {
        let op = dirichlet_sl();
        let model = build_spectral_model(&op, &SpectralConfig::with_bound(1.0)).unwrap();
        let prob = zero_problem(&op);
        let e_len = model.e_indices().len();
        let rec = recover_solution(&model, &prob, &DVector::zeros(e_len)).unwrap();
        assert!(rec.x_samples.norm() < 1e-14);
        assert!(rec.residual < 1e-14);
        let mut ustar = DVector::zeros(e_len);
        ustar[0] = 1.0;
        let rec = recover_solution(&model, &prob, &ustar).unwrap();
        assert!(rec.residual > 1e-3, "nonzero u* is not a solution of the homogeneous problem");
    }

    #[test]
    fn decompose_gradient_cases() {
        let op = dirichlet_sl();
        let prob = arctan_spring(&op, 25.0, 20.0).with_radius(0.7);
        let b1 = MatrixPath::scalar(1, 11.0);
        // x = 0: B-part is B1, C-part vanishes
        let (bp, cp) =
            decompose_gradient(&prob, &DVector::zeros(1), 0.3, &b1, 0.5).unwrap();
        assert!((bp[(0, 0)] - 11.0).abs() < 1e-14);
        assert!(cp.norm() < 1e-14);
        // large x: B-part = ∫V''(θx)dθ lies in the sandwich [5, 25]
        let x = DVector::from_element(1, 6.0);
        let (bp, cp) = decompose_gradient(&prob, &x, 0.3, &b1, 0.5).unwrap();
        assert!(bp[(0, 0)] > 5.0 && bp[(0, 0)] < 25.0);
        // consistency: H'(x) = B x + C exactly by construction
        let g = prob.grad_at(0.3, x.as_slice());
        assert!((g[0] - (bp[(0, 0)] * x[0] + cp[0])).abs() < 1e-12);
    }

    #[test]
    fn quadratic_hessian_constant_decomposition() {
        // H quadratic with Hessian K: B-part = K, C-part = 0 for large |x|
        let op = dirichlet_sl();
        let k = 15.0;
        let prob = NonlinearProblem::new(
            op.clone(),
            "quadratic",
            Arc::new(move |_t, x: &[f64]| 0.5 * k * x[0] * x[0]),
            Arc::new(move |_t, x: &[f64]| DVector::from_element(1, k * x[0])),
            Arc::new(move |_t, _x: &[f64]| DMatrix::from_element(1, 1, k)),
            k,
            1.0,
        )
        .unwrap();
        let x = DVector::from_element(1, 5.0);
        let (bp, cp) =
            decompose_gradient(&prob, &x, 0.5, &MatrixPath::scalar(1, 1.0), 0.5).unwrap();
        assert!((bp[(0, 0)] - k).abs() < 1e-12);
        assert!(cp.norm() < 1e-12);
    }
}
