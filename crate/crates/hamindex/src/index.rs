//! Nullity, relative Morse index, anchored absolute index and the spectral
//! (q-form) indices, with independent routes that cross-check one another.
//!
//! * `nullity` — kernel dimension of the linear boundary value problem,
//!   computed by shooting.
//! * `homotopy_nullity_sum` — Σ_{λ∈[0,1)} ν((1-λ)B1 + λB2) for strict pairs
//!   B1 < B2 (the λ=0 endpoint is counted, λ=1 is not).
//! * `relative_index` — extension to arbitrary pairs through a dominating
//!   scalar k·I: I(B1,B2) = I(B1,kI) - I(B2,kI).
//! * `index` — anchored absolute index; for operators bounded below the
//!   λ-scan Σ_{λ<0} ν(B+λI) is used, otherwise a shooting homotopy from the
//!   anchor.
//! * `qform_indices` — Morse index/nullity of the reduced quadratic form on
//!   E = X⁺ ⊕ X⁰ through the compact operator with eigenvalues μ_j; the
//!   kernel corresponds to μ_j = 1.

use crate::error::{Error, Result};
use crate::operator::{build_operator, BoundaryCondition, OperatorSpec, Order};
use crate::path::{dominating_scalar, lift_diag_identity, MatrixPath};
use crate::scan::{self, Crossing};
use crate::shoot;
use crate::spectral::{SpectralConfig, SpectralModel};
use nalgebra::DMatrix;
use serde::Serialize;

pub use crate::shoot::fundamental_matrix;

/// Tolerance for the strictness check in the MatrixPath partial order.
pub const ORDER_TOL: f64 = 1e-10;
/// Refinement tolerance for crossing locations.
pub const CROSSING_TOL: f64 = 1e-10;
/// Base sample count for homotopy scans on [0,1).
pub const HOMOTOPY_SAMPLES: usize = 512;
/// Default tolerance on |μ - 1| for the q-form kernel count.
pub const QFORM_NULL_TOL: f64 = 1e-7;

/// Crossing locations with nullities plus the sampled indicator curve.
#[derive(Debug, Clone, Default, Serialize)]
pub struct CrossingTrace {
    pub crossings: Vec<Crossing>,
    pub samples: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    ShootingHomotopy,
    LambdaScan,
    QForm,
}

/// An (index, nullity) result with the route and anchor that produced it.
#[derive(Debug, Clone)]
pub struct IndexReport {
    pub i: i64,
    pub nu: usize,
    pub route: Route,
    /// Anchor pair (reference coefficient, assigned integer).
    pub anchor: (MatrixPath, i64),
    pub trace: CrossingTrace,
}

/// Kernel dimension of A - B under the operator's boundary conditions.
pub fn nullity(op: &OperatorSpec, b: &MatrixPath) -> Result<usize> {
    check_dims(op, b)?;
    let map = shoot::boundary_map_for(op, b)?;
    Ok(shoot::map_nullity(&map))
}

fn check_dims(op: &OperatorSpec, b: &MatrixPath) -> Result<()> {
    if b.dim() != op.dim() {
        return Err(Error::spec(format!(
            "coefficient dimension {} does not match operator dimension {}",
            b.dim(),
            op.dim()
        )));
    }
    Ok(())
}

/// Σ_{λ∈[0,1)} ν((1-λ)B1 + λB2) for a strict pair B1 < B2.
pub fn homotopy_nullity_sum(
    op: &OperatorSpec,
    b1: &MatrixPath,
    b2: &MatrixPath,
) -> Result<(i64, CrossingTrace)> {
    check_dims(op, b1)?;
    check_dims(op, b2)?;
    if !b1.less(b2, ORDER_TOL * (1.0 + b1.supnorm()).max(1.0 + b2.supnorm())) {
        return Err(Error::spec("B1 < B2 violated"));
    }
    let nu0 = nullity(op, b1)?;
    let indicator = |lam: f64| -> Result<f64> {
        shoot::crossing_indicator(op, &MatrixPath::convex(b1, b2, lam))
    };
    let nullity_at = |lam: f64| -> Result<usize> {
        Ok(shoot::map_nullity(&shoot::boundary_map_for(
            op,
            &MatrixPath::convex(b1, b2, lam),
        )?))
    };
    let result = scan::scan_dips(0.0, 1.0, HOMOTOPY_SAMPLES, CROSSING_TOL, indicator, nullity_at)?;
    let guard = if nu0 > 0 { scan::MERGE_TOL } else { -1.0 };
    let mut crossings: Vec<Crossing> = Vec::new();
    if nu0 > 0 {
        crossings.push(Crossing {
            lambda: 0.0,
            nullity: nu0,
            width: 0.0,
        });
    }
    for c in result.crossings {
        if c.lambda > guard && c.lambda < 1.0 - 1e-9 {
            crossings.push(c);
        }
    }
    let sum = crossings.iter().map(|c| c.nullity as i64).sum();
    Ok((
        sum,
        CrossingTrace {
            crossings,
            samples: result.samples,
        },
    ))
}

/// Relative Morse index for an arbitrary pair via a dominating scalar:
/// I(B1,B2) = I(B1,kI) - I(B2,kI) with kI > B1, kI > B2.
pub fn relative_index(op: &OperatorSpec, b1: &MatrixPath, b2: &MatrixPath) -> Result<i64> {
    check_dims(op, b1)?;
    check_dims(op, b2)?;
    let k = dominating_scalar(b1, b2);
    let ki = MatrixPath::scalar(op.dim(), k);
    let (s1, _) = homotopy_nullity_sum(op, b1, &ki)?;
    let (s2, _) = homotopy_nullity_sum(op, b2, &ki)?;
    Ok(s1 - s2)
}

/// The default anchor for each boundary-condition family.
///
/// For first-order Bolza conditions the anchor coefficient is diag{0, I_n}
/// and its assigned integer is the λ-scan index of the zero coefficient of
/// the second-order operator with the same angles. Periodic operators anchor
/// at the zero coefficient with a configurable integer (default 0).
pub fn default_anchor(op: &OperatorSpec) -> Result<(MatrixPath, i64)> {
    match &op.bc {
        BoundaryCondition::Bolza { alpha, beta } => {
            let sl = build_operator(
                BoundaryCondition::sturm_liouville(*alpha, *beta)?,
                Order::Second,
                op.n,
                op.grid,
            )?;
            let report = index_via_lambda_scan(&sl, &MatrixPath::zero(op.n))?;
            Ok((lift_diag_identity(&MatrixPath::zero(op.n)), report.i))
        }
        BoundaryCondition::PPeriodic { .. } => Ok((MatrixPath::zero(2 * op.n), 0)),
        BoundaryCondition::SturmLiouville { .. } => {
            let report = index_via_lambda_scan(op, &MatrixPath::zero(op.n))?;
            Ok((MatrixPath::zero(op.n), report.i))
        }
    }
}

/// Anchored index via shooting homotopy: i(B) = i(B₀) + I(B₀, B).
pub fn index_via_homotopy(
    op: &OperatorSpec,
    b: &MatrixPath,
    anchor: Option<(MatrixPath, i64)>,
) -> Result<IndexReport> {
    let (b0, i0) = match anchor {
        Some(a) => a,
        None => default_anchor(op)?,
    };
    let rel = relative_index(op, &b0, b)?;
    let nu = nullity(op, b)?;
    Ok(IndexReport {
        i: i0 + rel,
        nu,
        route: Route::ShootingHomotopy,
        anchor: (b0, i0),
        trace: CrossingTrace::default(),
    })
}

/// λ-scan index Σ_{λ<0} ν(B + λI) for operators bounded below.
pub fn index_via_lambda_scan(op: &OperatorSpec, b: &MatrixPath) -> Result<IndexReport> {
    check_dims(op, b)?;
    if op.order != Order::Second {
        return Err(Error::spec(
            "lambda-scan route requires an operator bounded below (second order)",
        ));
    }
    let bottom = lowest_eigenvalue(op)?;
    let lam_min = (bottom - b.max_eigenvalue() - 1.0).min(-2.0);
    if nullity(op, &b.shifted(lam_min))? != 0 {
        return Err(Error::numerical(format!(
            "certificate failed: nullity(B + {lam_min}·I) != 0, scan start not crossing-free"
        )));
    }
    let indicator =
        |lam: f64| -> Result<f64> { shoot::crossing_indicator(op, &b.shifted(lam)) };
    let nullity_at =
        |lam: f64| -> Result<usize> { Ok(shoot::map_nullity(&shoot::boundary_map_for(op, &b.shifted(lam))?)) };
    let span = -lam_min;
    let samples = ((span / 0.05).ceil() as usize).clamp(HOMOTOPY_SAMPLES, 8192);
    let result = scan::scan_dips(lam_min, 0.0, samples, CROSSING_TOL, indicator, nullity_at)?;
    let crossings: Vec<Crossing> = result
        .crossings
        .into_iter()
        .filter(|c| c.lambda < -1e-9)
        .collect();
    let i: i64 = crossings.iter().map(|c| c.nullity as i64).sum();
    let nu = nullity(op, b)?;
    Ok(IndexReport {
        i,
        nu,
        route: Route::LambdaScan,
        anchor: (b.shifted(lam_min), 0),
        trace: CrossingTrace {
            crossings,
            samples: result.samples,
        },
    })
}

/// Smallest eigenvalue of A, for operators bounded below.
pub fn lowest_eigenvalue(op: &OperatorSpec) -> Result<f64> {
    let mut k = 16.0;
    loop {
        let found = crate::spectral::eigenvalues_in(op, (-k, k), CROSSING_TOL)?;
        if let Some((lam, _)) = found.first() {
            let below = crate::spectral::eigenvalues_in(op, (-4.0 * k, -k), CROSSING_TOL)?;
            if below.is_empty() {
                return Ok(*lam);
            }
        }
        k *= 4.0;
        if k > 1e6 {
            return Err(Error::numerical(
                "no eigenvalues found while searching for the bottom of the spectrum",
            ));
        }
    }
}

/// Anchored index of B, routed per the spectrum of the operator.
pub fn index(
    op: &OperatorSpec,
    b: &MatrixPath,
    anchor: Option<(MatrixPath, i64)>,
) -> Result<IndexReport> {
    match op.order {
        Order::Second => index_via_lambda_scan(op, b),
        Order::First => index_via_homotopy(op, b, anchor),
    }
}

/// Spectral indices of the reduced quadratic form.
#[derive(Debug, Clone, Serialize)]
pub struct QformIndices {
    pub i_beta: i64,
    pub nu_beta: usize,
    /// Eigenvalues μ_j of the compact operator, descending.
    pub mu: Vec<f64>,
}

/// Assemble the truncated compact operator
///   𝓑 = 2·Π₀ + T_EE - T_EM (I_MM + T_MM)⁻¹ T_ME,   T = D·G(B+ε)·D,
/// and count i_β = #{μ_j > 1 + tol}, ν_β = #{|μ_j - 1| ≤ tol}.
pub fn qform_indices(
    model: &SpectralModel,
    b: &MatrixPath,
    null_tol: f64,
) -> Result<QformIndices> {
    if b.supnorm() + model.epsilon >= model.beta {
        return Err(Error::spec(format!(
            "smallness regime violated: ||B|| + eps = {} >= beta = {}",
            b.supnorm() + model.epsilon,
            model.beta
        )));
    }
    let bb = qform_operator(model, b)?;
    let eig = bb.symmetric_eigen();
    let mut mu: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    mu.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let i_beta = mu.iter().filter(|&&m| m > 1.0 + null_tol).count() as i64;
    let nu_beta = mu.iter().filter(|&&m| (m - 1.0).abs() <= null_tol).count();
    Ok(QformIndices { i_beta, nu_beta, mu })
}

/// The matrix of 𝓑 on the E block.
pub fn qform_operator(model: &SpectralModel, b: &MatrixPath) -> Result<DMatrix<f64>> {
    let t = model.scaled_gram(b, model.epsilon)?;
    let e_idx = model.e_indices();
    let m_idx = &model.jminus;
    let tee = submatrix(&t, &e_idx, &e_idx);
    let mut bb = tee;
    for (row, &j) in e_idx.iter().enumerate() {
        if model.lambda_eps[j] < 0.0 {
            bb[(row, row)] += 2.0;
        }
    }
    if !m_idx.is_empty() {
        let tem = submatrix(&t, &e_idx, m_idx);
        let tmm = submatrix(&t, m_idx, m_idx);
        let imm = DMatrix::identity(m_idx.len(), m_idx.len()) + tmm;
        let lu = imm.lu();
        let solved = lu
            .solve(&tem.transpose())
            .ok_or_else(|| Error::numerical("minus-block solve failed (I + T_MM singular)"))?;
        bb -= tem * solved;
    }
    Ok(0.5 * (&bb + bb.transpose()))
}

pub(crate) fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(rows.len(), cols.len());
    for (i, &r) in rows.iter().enumerate() {
        for (j, &c) in cols.iter().enumerate() {
            out[(i, j)] = m[(r, c)];
        }
    }
    out
}

/// One line of a consistency report: an identity with both sides evaluated
/// by independent routes.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub lhs: i64,
    pub rhs: i64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyReport {
    pub entries: Vec<IdentityCheck>,
    pub pass: bool,
}

impl ConsistencyReport {
    fn push(&mut self, name: impl Into<String>, lhs: i64, rhs: i64) {
        let pass = lhs == rhs;
        self.entries.push(IdentityCheck {
            name: name.into(),
            lhs,
            rhs,
            pass,
        });
        self.pass &= pass;
    }
}

/// Evaluate the cross-route identities for one coefficient path.
///
/// Checked identities: q-form nullity equals shooting nullity; the homotopy
/// route equals the subtraction route on a strict pair; the q-form index
/// difference from 0 equals the relative index from 0; for second-order
/// operators additionally λ-scan vs anchored homotopy and the equality with
/// the lifted first-order pair (diag{B, I_n}).
pub fn consistency_report(op: &OperatorSpec, b: &MatrixPath) -> Result<ConsistencyReport> {
    let mut report = ConsistencyReport {
        entries: Vec::new(),
        pass: true,
    };
    let model = crate::spectral::build_spectral_model(
        op,
        &SpectralConfig::with_bound(b.supnorm().max(1.0)),
    )?;

    let nu_shoot = nullity(op, b)? as i64;
    let qf = qform_indices(&model, b, QFORM_NULL_TOL)?;
    report.push("nullity: qform vs shooting", qf.nu_beta as i64, nu_shoot);

    // strict pair (B, B + (1 + sup)I): homotopy route vs subtraction route
    let upper = b.shifted(1.0 + b.supnorm());
    let (via_sum, _) = homotopy_nullity_sum(op, b, &upper)?;
    let via_sub = relative_index(op, b, &upper)?;
    report.push("relative index: direct sum vs subtraction", via_sum, via_sub);

    // q-form index difference vs relative index from the zero coefficient
    let zero = MatrixPath::zero(op.dim());
    let qf0 = qform_indices(&model, &zero, QFORM_NULL_TOL)?;
    let rel = relative_index(op, &zero, b)?;
    report.push(
        "index difference: qform vs shooting",
        qf.i_beta - qf0.i_beta,
        rel,
    );

    if op.order == Order::Second {
        let scan = index_via_lambda_scan(op, b)?;
        let anchored = index_via_homotopy(op, b, Some(default_anchor(op)?))?;
        report.push("index: lambda-scan vs anchored homotopy", scan.i, anchored.i);

        // lifted first-order pair
        if let BoundaryCondition::SturmLiouville { alpha, beta } = op.bc {
            let first = build_operator(
                BoundaryCondition::bolza(alpha, beta)?,
                Order::First,
                op.n,
                op.grid,
            )?;
            let lifted = lift_diag_identity(b);
            let f_report = index_via_homotopy(&first, &lifted, None)?;
            report.push("index: lifted first-order vs second-order", f_report.i, scan.i);
            report.push(
                "nullity: lifted first-order vs second-order",
                f_report.nu as i64,
                nu_shoot,
            );
        }
    }
    Ok(report)
}

/// Convenience: λ-scan index of c·I on the Dirichlet-type second-order
/// operator — used widely in tests against the closed-form spectrum.
pub fn second_order_scalar_index(op: &OperatorSpec, c: f64) -> Result<(i64, usize)> {
    let b = MatrixPath::scalar(op.n, c);
    let r = index_via_lambda_scan(op, &b)?;
    Ok((r.i, r.nu))
}
