//! Boundary-condition families and the operator model.
//!
//! Three families of self-adjoint operators with discrete spectrum are
//! supported, all on the time interval [0,1]:
//!
//! * first order `-J x'` with separated Bolza conditions
//!   `x1(0) cos α + x2(0) sin α = 0`, `x1(1) cos β + x2(1) sin β = 0`;
//! * second order `-x''` with Sturm-Liouville conditions
//!   `x(0) cos α - x'(0) sin α = 0`, `x(1) cos β - x'(1) sin β = 0`;
//! * first order `-J x'` with the affine-periodic condition `x(1) = P x(0)`
//!   for a symplectic matrix P.
//!
//! Nullities of the associated linear systems are kernel dimensions of
//! boundary maps built from the fundamental solution; see `shoot`.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub const SYMPLECTIC_TOL: f64 = 1e-12;

/// Standard symplectic matrix J of size 2n x 2n: J = [[0, -I], [I, 0]].
pub fn standard_symplectic(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = -1.0;
        j[(n + i, i)] = 1.0;
    }
    j
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryCondition {
    /// First-order separated conditions, angles α ∈ [0,π), β ∈ (0,π].
    Bolza { alpha: f64, beta: f64 },
    /// Second-order Sturm-Liouville conditions, same angle ranges.
    SturmLiouville { alpha: f64, beta: f64 },
    /// x(1) = P x(0) with P symplectic.
    PPeriodic { p: DMatrix<f64> },
}

impl BoundaryCondition {
    pub fn bolza(alpha: f64, beta: f64) -> Result<Self> {
        check_angles(alpha, beta)?;
        Ok(BoundaryCondition::Bolza { alpha, beta })
    }

    pub fn sturm_liouville(alpha: f64, beta: f64) -> Result<Self> {
        check_angles(alpha, beta)?;
        Ok(BoundaryCondition::SturmLiouville { alpha, beta })
    }

    pub fn p_periodic(p: DMatrix<f64>) -> Result<Self> {
        if p.nrows() != p.ncols() || p.nrows() == 0 || p.nrows() % 2 != 0 {
            return Err(Error::spec(format!(
                "P must be square of even dimension, got {}x{}",
                p.nrows(),
                p.ncols()
            )));
        }
        let n = p.nrows() / 2;
        let j = standard_symplectic(n);
        let defect = (p.transpose() * &j * &p - &j).norm();
        if defect > SYMPLECTIC_TOL {
            return Err(Error::spec(format!(
                "P is not symplectic: ||P^T J P - J|| = {defect:.3e} > {SYMPLECTIC_TOL:.0e}"
            )));
        }
        Ok(BoundaryCondition::PPeriodic { p })
    }
}

fn check_angles(alpha: f64, beta: f64) -> Result<()> {
    if !(0.0..std::f64::consts::PI).contains(&alpha) {
        return Err(Error::spec(format!("alpha out of [0,pi): {alpha}")));
    }
    if !(beta > 0.0 && beta <= std::f64::consts::PI) {
        return Err(Error::spec(format!("beta out of (0,pi]: {beta}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    First,
    Second,
}

/// A validated operator model: boundary-condition family, order, block
/// dimension and quadrature grid.
#[derive(Debug, Clone)]
pub struct OperatorSpec {
    pub order: Order,
    pub n: usize,
    pub bc: BoundaryCondition,
    pub grid: usize,
}

/// Validate a (bc, order, n, grid) combination and build the operator model.
pub fn build_operator(
    bc: BoundaryCondition,
    order: Order,
    n: usize,
    grid: usize,
) -> Result<OperatorSpec> {
    if n == 0 {
        return Err(Error::spec("block dimension n must be >= 1"));
    }
    if grid < 64 {
        return Err(Error::spec(format!("grid must be >= 64, got {grid}")));
    }
    match (&bc, order) {
        (BoundaryCondition::Bolza { .. }, Order::First) => {}
        (BoundaryCondition::PPeriodic { p }, Order::First) => {
            if p.nrows() != 2 * n {
                return Err(Error::spec(format!(
                    "P is {}x{} but 2n = {}",
                    p.nrows(),
                    p.ncols(),
                    2 * n
                )));
            }
        }
        (BoundaryCondition::SturmLiouville { .. }, Order::Second) => {}
        _ => {
            return Err(Error::spec(
                "order/bc mismatch: first order requires Bolza or PPeriodic, \
                 second order requires SturmLiouville",
            ))
        }
    }
    let grid = grid.div_ceil(4) * 4;
    Ok(OperatorSpec { order, n, bc, grid })
}

impl OperatorSpec {
    /// Dimension of the L² state: 2n for first order, n for second order.
    pub fn dim(&self) -> usize {
        match self.order {
            Order::First => 2 * self.n,
            Order::Second => self.n,
        }
    }

    /// Dimension of the integrated ODE system (companion form for second
    /// order): always 2n.
    pub fn ode_dim(&self) -> usize {
        2 * self.n
    }

    /// Number of rows/columns of the boundary map whose kernel measures the
    /// nullity: n for separated conditions, 2n for periodic ones.
    pub fn boundary_rank(&self) -> usize {
        match self.bc {
            BoundaryCondition::PPeriodic { .. } => 2 * self.n,
            _ => self.n,
        }
    }

    /// Matrix of admissible initial conditions (columns span the subspace
    /// allowed by the boundary condition at t = 0). `None` for periodic
    /// conditions, where every initial condition is admissible.
    pub fn initial_subspace(&self) -> Option<DMatrix<f64>> {
        let n = self.n;
        match &self.bc {
            BoundaryCondition::Bolza { alpha, .. } => {
                let mut l0 = DMatrix::zeros(2 * n, n);
                for i in 0..n {
                    l0[(i, i)] = -alpha.sin();
                    l0[(n + i, i)] = alpha.cos();
                }
                Some(l0)
            }
            BoundaryCondition::SturmLiouville { alpha, .. } => {
                let mut l0 = DMatrix::zeros(2 * n, n);
                for i in 0..n {
                    l0[(i, i)] = alpha.sin();
                    l0[(n + i, i)] = alpha.cos();
                }
                Some(l0)
            }
            BoundaryCondition::PPeriodic { .. } => None,
        }
    }

    /// Matrix of end conditions at t = 1 (rows annihilate admissible end
    /// states). `None` for periodic conditions.
    pub fn end_conditions(&self) -> Option<DMatrix<f64>> {
        let n = self.n;
        match &self.bc {
            BoundaryCondition::Bolza { beta, .. } => {
                let mut c1 = DMatrix::zeros(n, 2 * n);
                for i in 0..n {
                    c1[(i, i)] = beta.cos();
                    c1[(i, n + i)] = beta.sin();
                }
                Some(c1)
            }
            BoundaryCondition::SturmLiouville { beta, .. } => {
                let mut c1 = DMatrix::zeros(n, 2 * n);
                for i in 0..n {
                    c1[(i, i)] = beta.cos();
                    c1[(i, n + i)] = -beta.sin();
                }
                Some(c1)
            }
            BoundaryCondition::PPeriodic { .. } => None,
        }
    }

    /// Residual of the boundary conditions for an ODE state trajectory given
    /// by its values at t=0 and t=1 (companion states for second order).
    pub fn bc_residual(&self, y0: &nalgebra::DVector<f64>, y1: &nalgebra::DVector<f64>) -> f64 {
        match &self.bc {
            BoundaryCondition::PPeriodic { p } => (y1 - p * y0).norm(),
            _ => {
                let l0 = self.initial_subspace().unwrap();
                let c1 = self.end_conditions().unwrap();
                // distance of y0 from span(L0) plus violation at t=1
                let coeffs = l0
                    .clone()
                    .svd(true, true)
                    .solve(y0, 1e-14)
                    .expect("projection");
                let r0 = (y0 - l0 * coeffs).norm();
                let r1 = (c1 * y1).norm();
                (r0 * r0 + r1 * r1).sqrt()
            }
        }
    }
}
