//! Fundamental solutions and boundary maps.
//!
//! The matrizant Ψ(t) solves Ψ' = J·B(t)·Ψ, Ψ(0) = I for first-order
//! systems, and the companion analogue y = (x, x'), y' = [[0,I],[-B,0]]·y
//! for second-order ones. Nullities of the boundary value problems are
//! kernel dimensions of square boundary maps built from Ψ(1): C1·Ψ(1)·L0
//! for separated conditions and Ψ(1) - P for periodic ones.
//!
//! Constant coefficient paths take a matrix-exponential fast path; general
//! paths integrate with embedded Runge-Kutta at local tolerance 1e-12.

use crate::error::Result;
use crate::ode;
use crate::operator::{standard_symplectic, OperatorSpec, Order};
use crate::path::MatrixPath;
use nalgebra::{DMatrix, DVector};

/// Relative singular-value threshold below which boundary-map directions
/// count as kernel: multiplicity = #{σ_i < NULL_TOL · max(σ_max, 1)}.
pub const NULL_TOL: f64 = 1e-8;

/// Coefficient matrix of the first-order ODE system for a given B(t) value.
pub fn ode_coefficient(op: &OperatorSpec, b_at_t: &DMatrix<f64>) -> DMatrix<f64> {
    let n = op.n;
    match op.order {
        Order::First => standard_symplectic(n) * b_at_t,
        Order::Second => {
            let mut c = DMatrix::zeros(2 * n, 2 * n);
            for i in 0..n {
                c[(i, n + i)] = 1.0;
            }
            c.view_mut((n, 0), (n, n)).copy_from(&(-b_at_t));
            c
        }
    }
}

/// Fundamental matrix Ψ(t) with Ψ(0) = I.
pub fn fundamental_matrix(op: &OperatorSpec, b: &MatrixPath, t: f64) -> Result<DMatrix<f64>> {
    if let Some(bc) = b.constant_value() {
        let c = ode_coefficient(op, bc);
        return Ok((c * t).exp());
    }
    let rhs = |tau: f64| ode_coefficient(op, &b.eval(tau));
    ode::integrate_linear(
        &rhs,
        DMatrix::identity(op.ode_dim(), op.ode_dim()),
        0.0,
        t,
        ode::DEFAULT_TOL,
    )
}

/// Ψ at each of the (ascending) sample times.
pub fn fundamental_samples(
    op: &OperatorSpec,
    b: &MatrixPath,
    times: &[f64],
) -> Result<Vec<DMatrix<f64>>> {
    let dim = op.ode_dim();
    if let Some(bc) = b.constant_value() {
        let c = ode_coefficient(op, bc);
        let mut out = Vec::with_capacity(times.len());
        let mut m = DMatrix::identity(dim, dim);
        let mut t_prev = 0.0;
        for &t in times {
            m = (&c * (t - t_prev)).exp() * m;
            t_prev = t;
            out.push(m.clone());
        }
        return Ok(out);
    }
    let rhs = |tau: f64| ode_coefficient(op, &b.eval(tau));
    ode::integrate_linear_sampled(&rhs, DMatrix::identity(dim, dim), times, ode::DEFAULT_TOL)
}

/// The square boundary map whose kernel dimension is the nullity.
pub fn boundary_map(op: &OperatorSpec, psi1: &DMatrix<f64>) -> DMatrix<f64> {
    match (&op.bc, op.initial_subspace(), op.end_conditions()) {
        (crate::operator::BoundaryCondition::PPeriodic { p }, _, _) => psi1 - p,
        (_, Some(l0), Some(c1)) => c1 * psi1 * l0,
        _ => unreachable!("separated conditions always have L0 and C1"),
    }
}

pub fn boundary_map_for(op: &OperatorSpec, b: &MatrixPath) -> Result<DMatrix<f64>> {
    Ok(boundary_map(op, &fundamental_matrix(op, b, 1.0)?))
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().cloned().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Smallest singular value: the crossing indicator.
pub fn min_singular(m: &DMatrix<f64>) -> f64 {
    singular_values(m).last().cloned().unwrap_or(0.0)
}

/// Kernel dimension of the boundary map under the relative threshold.
pub fn map_nullity(m: &DMatrix<f64>) -> usize {
    let sv = singular_values(m);
    let scale = sv.first().cloned().unwrap_or(0.0).max(1.0);
    sv.iter().filter(|&&s| s < NULL_TOL * scale).count()
}

/// Orthonormal kernel basis of the boundary map (right singular vectors with
/// singular value below the relative threshold).
pub fn kernel_basis(m: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.expect("svd V^T");
    let sv = &svd.singular_values;
    let scale = sv.iter().cloned().fold(0.0f64, f64::max).max(1.0);
    let mut out = Vec::new();
    for i in 0..sv.len() {
        if sv[i] < NULL_TOL * scale {
            out.push(vt.row(i).transpose());
        }
    }
    out
}

/// Indicator value used by the crossing scans.
pub fn crossing_indicator(op: &OperatorSpec, b: &MatrixPath) -> Result<f64> {
    Ok(min_singular(&boundary_map_for(op, b)?))
}
