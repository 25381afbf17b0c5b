//! Embedded Runge-Kutta integration for matrix-valued linear ODEs
//! M'(t) = C(t) M(t) on [0, 1].
//!
//! Dormand-Prince 5(4) with PI step control. The local tolerance default is
//! 1e-12; fundamental solutions of the Hamiltonian systems treated here are
//! well conditioned on [0,1] so no stiffness handling is needed.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

pub const DEFAULT_TOL: f64 = 1e-12;
const MIN_STEP: f64 = 1e-14;
const SAFETY: f64 = 0.9;

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
// 4th-order embedded weights for the error estimate.
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate M' = rhs(t) * M from `t0` to `t1` starting at `m0`, adaptively.
pub fn integrate_linear<F>(
    rhs: &F,
    m0: DMatrix<f64>,
    t0: f64,
    t1: f64,
    tol: f64,
) -> Result<DMatrix<f64>>
where
    F: Fn(f64) -> DMatrix<f64>,
{
    if t1 == t0 {
        return Ok(m0);
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let mut t = t0;
    let mut m = m0;
    // initial step from the coefficient norm at t0
    let scale = rhs(t0).norm().max(1.0);
    let mut h = (0.1 / scale).min(span) * dir;
    let mut k: Vec<DMatrix<f64>> = Vec::with_capacity(7);
    let mut steps = 0usize;
    while (t - t1).abs() > 1e-15 {
        if (t1 - t) * dir < h.abs() {
            h = t1 - t;
        }
        steps += 1;
        if steps > 2_000_000 {
            return Err(Error::numerical("integrator step-size collapse"));
        }
        k.clear();
        k.push(rhs(t) * &m);
        for s in 0..6 {
            let mut y = m.clone();
            for (j, kj) in k.iter().enumerate() {
                if A[s][j] != 0.0 {
                    y += kj * (h * A[s][j]);
                }
            }
            k.push(rhs(t + C[s] * h) * y);
        }
        // 5th order solution uses row A[5] with k0..k5
        let mut y5 = m.clone();
        for (j, kj) in k.iter().take(6).enumerate() {
            if A[5][j] != 0.0 {
                y5 += kj * (h * A[5][j]);
            }
        }
        // embedded 4th order for the error estimate
        let mut y4 = m.clone();
        for (j, kj) in k.iter().enumerate() {
            if B4[j] != 0.0 {
                y4 += kj * (h * B4[j]);
            }
        }
        // error per unit step keeps the global error near tol; the floor on
        // the step weight tolerates mild interpolation seams in sampled
        // coefficient paths without stalling
        let err = (&y5 - &y4).norm() / (1.0 + y5.norm());
        let budget = tol * h.abs().max(0.05);
        if err <= budget || h.abs() <= MIN_STEP {
            t += h;
            m = y5;
            let grow = if err > 0.0 {
                SAFETY * (budget / err).powf(0.2)
            } else {
                5.0
            };
            h *= grow.clamp(0.2, 5.0);
        } else {
            h *= (SAFETY * (budget / err).powf(0.2)).clamp(0.1, 1.0);
            if h.abs() < MIN_STEP {
                return Err(Error::numerical("integrator step-size collapse"));
            }
        }
    }
    Ok(m)
}

/// Integrate M' = rhs(t) * M from 0, returning M at each requested time.
/// `times` must be sorted ascending within [0, 1].
pub fn integrate_linear_sampled<F>(
    rhs: &F,
    m0: DMatrix<f64>,
    times: &[f64],
    tol: f64,
) -> Result<Vec<DMatrix<f64>>>
where
    F: Fn(f64) -> DMatrix<f64>,
{
    let mut out = Vec::with_capacity(times.len());
    let mut m = m0;
    let mut t = 0.0;
    for &tq in times {
        m = integrate_linear(rhs, m, t, tq, tol)?;
        t = tq;
        out.push(m.clone());
    }
    Ok(out)
}
