//! Problem definitions: JSON problem specs, the builtin registry, the
//! second-order-to-first-order lift, and finite-difference validation of
//! user-supplied derivatives.

use crate::error::{Error, Result};
use crate::expr::ExprAst;
use crate::operator::{build_operator, BoundaryCondition, OperatorSpec, Order};
use crate::path::{lift_diag_identity, MatrixPath};
use crate::reduction::NonlinearProblem;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BcSpec {
    Bolza { alpha: f64, beta: f64 },
    SturmLiouville { alpha: f64, beta: f64 },
    PPeriodic { #[serde(rename = "P")] p: Vec<Vec<f64>> },
}

/// A matrix entry: a plain number or an expression string in `t`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum EntryExpr {
    Number(f64),
    Expr(String),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum HamiltonianSpec {
    Builtin {
        builtin: String,
        #[serde(default)]
        params: BTreeMap<String, serde_json::Value>,
    },
    Expressions {
        #[serde(rename = "H")]
        h: String,
        #[serde(rename = "gradH")]
        grad_h: Vec<String>,
        #[serde(rename = "hessH")]
        hess_h: Vec<Vec<String>>,
        /// Sup-norm bound on the Hessian; probed when absent.
        #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
        m: Option<f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct LinearSpec {
    #[serde(rename = "B")]
    pub b: Vec<Vec<EntryExpr>>,
}

impl Eq for EntryExpr {}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ComparisonSpec {
    #[serde(rename = "B0")]
    pub b0: Vec<Vec<EntryExpr>>,
    #[serde(rename = "B1")]
    pub b1: Vec<Vec<EntryExpr>>,
    #[serde(rename = "B2")]
    pub b2: Vec<Vec<EntryExpr>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fp_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub newton_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub null_tol: Option<f64>,
    /// Anchor integer for the periodic index (the anchored index depends on
    /// it; index differences do not).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anchor: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub starts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deflation_radius: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub order: Order,
    pub n: usize,
    pub bc: BcSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<HamiltonianSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear: Option<LinearSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ComparisonSpec>,
    #[serde(default)]
    pub numerics: NumericsSpec,
}

/// Parse and validate a JSON problem spec; schema violations are collected
/// with their JSON paths.
pub fn parse_problem(text: &str) -> Result<ProblemSpec> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let spec: ProblemSpec = serde_path_to_error::deserialize(de)
        .map_err(|e| Error::spec(format!("at {}: {}", e.path(), e.inner())))?;
    let errors = spec.validate();
    if !errors.is_empty() {
        return Err(Error::spec(errors.join("; ")));
    }
    Ok(spec)
}

impl ProblemSpec {
    /// Structural validation beyond what serde enforces; returns one message
    /// per violation, prefixed by the JSON path.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.n == 0 {
            errs.push("n: block dimension must be >= 1".into());
        }
        let d = match self.order {
            Order::First => 2 * self.n,
            Order::Second => self.n,
        };
        match (&self.bc, self.order) {
            (BcSpec::Bolza { alpha, beta }, Order::First)
            | (BcSpec::SturmLiouville { alpha, beta }, Order::Second) => {
                if !(0.0..std::f64::consts::PI).contains(alpha) {
                    errs.push(format!("bc.alpha: out of [0,pi): {alpha}"));
                }
                if !(*beta > 0.0 && *beta <= std::f64::consts::PI) {
                    errs.push(format!("bc.beta: out of (0,pi]: {beta}"));
                }
            }
            (BcSpec::PPeriodic { p }, Order::First) => {
                if p.len() != 2 * self.n || p.iter().any(|row| row.len() != 2 * self.n) {
                    errs.push(format!("bc.P: must be {0}x{0}", 2 * self.n));
                }
            }
            _ => errs.push("bc.type: inconsistent with order".into()),
        }
        if let Some(g) = self.numerics.grid {
            if g < 64 {
                errs.push(format!("numerics.grid: must be >= 64, got {g}"));
            }
        }
        let check_matrix = |errs: &mut Vec<String>, path: &str, m: &[Vec<EntryExpr>], dim: usize| {
            if m.len() != dim || m.iter().any(|row| row.len() != dim) {
                errs.push(format!("{path}: must be {dim}x{dim}"));
                return;
            }
            for (i, row) in m.iter().enumerate() {
                for (j, e) in row.iter().enumerate() {
                    if let EntryExpr::Expr(src) = e {
                        if let Err(err) = ExprAst::parse(src, 0) {
                            errs.push(format!("{path}[{i}][{j}]: {err}"));
                        }
                    }
                }
            }
        };
        if let Some(lin) = &self.linear {
            check_matrix(&mut errs, "linear.B", &lin.b, d);
        }
        if let Some(cmp) = &self.comparison {
            check_matrix(&mut errs, "comparison.B0", &cmp.b0, d);
            check_matrix(&mut errs, "comparison.B1", &cmp.b1, d);
            check_matrix(&mut errs, "comparison.B2", &cmp.b2, d);
        }
        if let Some(HamiltonianSpec::Expressions { h, grad_h, hess_h, .. }) = &self.hamiltonian {
            if let Err(e) = ExprAst::parse(h, d) {
                errs.push(format!("hamiltonian.H: {e}"));
            }
            if grad_h.len() != d {
                errs.push(format!("hamiltonian.gradH: expected {d} entries"));
            }
            for (i, src) in grad_h.iter().enumerate() {
                if let Err(e) = ExprAst::parse(src, d) {
                    errs.push(format!("hamiltonian.gradH[{i}]: {e}"));
                }
            }
            if hess_h.len() != d || hess_h.iter().any(|row| row.len() != d) {
                errs.push(format!("hamiltonian.hessH: must be {d}x{d}"));
            } else {
                for (i, row) in hess_h.iter().enumerate() {
                    for (j, src) in row.iter().enumerate() {
                        if let Err(e) = ExprAst::parse(src, d) {
                            errs.push(format!("hamiltonian.hessH[{i}][{j}]: {e}"));
                        }
                    }
                }
            }
        }
        if let Some(HamiltonianSpec::Builtin { builtin, .. }) = &self.hamiltonian {
            if !["arctan_spring", "zero", "quadratic"].contains(&builtin.as_str()) {
                errs.push(format!("hamiltonian.builtin: unknown name \"{builtin}\""));
            }
        }
        if self.hamiltonian.is_none() && self.linear.is_none() {
            errs.push("either hamiltonian or linear must be given".into());
        }
        errs
    }

    pub fn boundary_condition(&self) -> Result<BoundaryCondition> {
        match &self.bc {
            BcSpec::Bolza { alpha, beta } => BoundaryCondition::bolza(*alpha, *beta),
            BcSpec::SturmLiouville { alpha, beta } => {
                BoundaryCondition::sturm_liouville(*alpha, *beta)
            }
            BcSpec::PPeriodic { p } => {
                let rows = p.len();
                let mut m = DMatrix::zeros(rows, rows);
                for (i, row) in p.iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        m[(i, j)] = *v;
                    }
                }
                BoundaryCondition::p_periodic(m)
            }
        }
    }

    pub fn operator(&self) -> Result<OperatorSpec> {
        build_operator(
            self.boundary_condition()?,
            self.order,
            self.n,
            self.numerics.grid.unwrap_or(1024),
        )
    }

    /// Assemble everything the runners need.
    pub fn build(&self) -> Result<Built> {
        let errors = self.validate();
        if !errors.is_empty() {
            return Err(Error::spec(errors.join("; ")));
        }
        let op = self.operator()?;
        let d = op.dim();
        let linear_b = match &self.linear {
            Some(lin) => Some(matrix_path_from_entries(&lin.b, d)?),
            None => None,
        };
        let problem = match &self.hamiltonian {
            Some(HamiltonianSpec::Builtin { builtin: name, params }) => {
                Some(builtin(&op, name, params)?)
            }
            Some(HamiltonianSpec::Expressions { h, grad_h, hess_h, m }) => {
                Some(expression_problem(&op, h, grad_h, hess_h, *m)?)
            }
            None => None,
        };
        let problem = match (problem, &self.comparison) {
            (Some(p), Some(cmp)) => {
                let b0 = matrix_path_from_entries(&cmp.b0, d)?;
                let b1 = matrix_path_from_entries(&cmp.b1, d)?;
                let b2 = matrix_path_from_entries(&cmp.b2, d)?;
                let p = p.with_comparison(b0, b1, b2);
                Some(match cmp.r {
                    Some(r) => p.with_radius(r),
                    None => p,
                })
            }
            (p, _) => p,
        };
        Ok(Built {
            op,
            problem,
            linear_b,
        })
    }
}

/// The runnable pieces assembled from a spec.
#[derive(Debug)]
pub struct Built {
    pub op: OperatorSpec,
    pub problem: Option<NonlinearProblem>,
    pub linear_b: Option<MatrixPath>,
}

/// Convert a matrix of entries (numbers or expressions in t) to a path.
pub fn matrix_path_from_entries(entries: &[Vec<EntryExpr>], d: usize) -> Result<MatrixPath> {
    if entries.len() != d || entries.iter().any(|r| r.len() != d) {
        return Err(Error::spec(format!("matrix must be {d}x{d}")));
    }
    let all_const = entries
        .iter()
        .all(|row| row.iter().all(|e| matches!(e, EntryExpr::Number(_))));
    if all_const {
        let mut m = DMatrix::zeros(d, d);
        for (i, row) in entries.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                if let EntryExpr::Number(v) = e {
                    m[(i, j)] = *v;
                }
            }
        }
        return MatrixPath::constant(m);
    }
    let mut asts: Vec<Vec<ExprAst>> = Vec::with_capacity(d);
    for row in entries {
        let mut out = Vec::with_capacity(d);
        for e in row {
            out.push(match e {
                EntryExpr::Number(v) => ExprAst::Num(*v),
                EntryExpr::Expr(src) => ExprAst::parse(src, 0)?,
            });
        }
        asts.push(out);
    }
    MatrixPath::from_fn(d, move |t| {
        DMatrix::from_fn(d, d, |i, j| asts[i][j].eval(t, &[]))
    })
}

/// The builtin problem registry: `arctan_spring` (second order, n = 1, with
/// V(x) = (a/2)x² − b(x·atan x − ½ log(1+x²))), `zero` (H ≡ 0) and
/// `quadratic` (H = ½(Kx, x) for constant symmetric K).
pub fn builtin(
    op: &OperatorSpec,
    name: &str,
    params: &BTreeMap<String, serde_json::Value>,
) -> Result<NonlinearProblem> {
    let d = op.dim();
    let float_param = |key: &str| -> Result<f64> {
        params
            .get(key)
            .and_then(|v| v.as_f64())
            .ok_or_else(|| Error::spec(format!("builtin parameter \"{key}\" missing or not a number")))
    };
    match name {
        "zero" => NonlinearProblem::new(
            op.clone(),
            "zero",
            Arc::new(|_t, _x| 0.0),
            Arc::new(move |_t, _x| DVector::zeros(d)),
            Arc::new(move |_t, _x| DMatrix::zeros(d, d)),
            0.0,
            1.0,
        ),
        "arctan_spring" => {
            if op.order != Order::Second || op.n != 1 {
                return Err(Error::spec(
                    "arctan_spring is a second-order scalar problem (order=second, n=1)",
                ));
            }
            let a = float_param("a")?;
            let b = float_param("b")?;
            if b < 0.0 || a <= 0.0 {
                return Err(Error::spec("arctan_spring requires a > 0 and b >= 0"));
            }
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
                a.abs().max((a - b).abs()),
                1.0,
            )
        }
        "quadratic" => {
            let k_val = params
                .get("K")
                .ok_or_else(|| Error::spec("quadratic requires parameter K"))?;
            let rows: Vec<Vec<f64>> = serde_json::from_value(k_val.clone())
                .map_err(|e| Error::spec(format!("quadratic K: {e}")))?;
            if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                return Err(Error::spec(format!("quadratic K must be {d}x{d}")));
            }
            let mut k = DMatrix::zeros(d, d);
            for (i, row) in rows.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    k[(i, j)] = *v;
                }
            }
            if (&k - k.transpose()).norm() > 1e-12 {
                return Err(Error::spec("quadratic K must be symmetric"));
            }
            let bound = k
                .clone()
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .fold(0.0f64, |a, &v| a.max(v.abs()));
            let k1 = k.clone();
            let k2 = k.clone();
            NonlinearProblem::new(
                op.clone(),
                "quadratic",
                Arc::new(move |_t, x: &[f64]| {
                    let xv = DVector::from_column_slice(x);
                    0.5 * (&k * &xv).dot(&xv)
                }),
                Arc::new(move |_t, x: &[f64]| &k1 * DVector::from_column_slice(x)),
                Arc::new(move |_t, _x: &[f64]| k2.clone()),
                bound,
                1.0,
            )
        }
        other => Err(Error::spec(format!("unknown builtin \"{other}\""))),
    }
}

fn expression_problem(
    op: &OperatorSpec,
    h_src: &str,
    grad_src: &[String],
    hess_src: &[Vec<String>],
    m_given: Option<f64>,
) -> Result<NonlinearProblem> {
    let d = op.dim();
    let h_ast = ExprAst::parse(h_src, d)?;
    let grad_ast: Vec<ExprAst> = grad_src
        .iter()
        .map(|s| ExprAst::parse(s, d))
        .collect::<Result<_>>()?;
    let hess_ast: Vec<Vec<ExprAst>> = hess_src
        .iter()
        .map(|row| row.iter().map(|s| ExprAst::parse(s, d)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    if grad_ast.len() != d || hess_ast.len() != d || hess_ast.iter().any(|r| r.len() != d) {
        return Err(Error::spec(format!(
            "gradH must have {d} entries and hessH must be {d}x{d}"
        )));
    }
    let bound = match m_given {
        Some(m) => m,
        None => {
            // probe the Hessian on random rays; headroom absorbs the gap
            // between the probe max and the true sup
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let mut max_norm = 0.0f64;
            for _ in 0..512 {
                let t: f64 = rng.random();
                let scale = 10.0f64.powf(rng.random::<f64>() * 3.0 - 1.0);
                let x: Vec<f64> = (0..d)
                    .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal) * scale)
                    .collect();
                let hm = DMatrix::from_fn(d, d, |i, j| hess_ast[i][j].eval(t, &x));
                let n = hm
                    .symmetric_eigen()
                    .eigenvalues
                    .iter()
                    .fold(0.0f64, |a, &v| a.max(v.abs()));
                max_norm = max_norm.max(n);
            }
            max_norm * 1.1
        }
    };
    let hess_for_closure = hess_ast;
    let grad_for_closure = grad_ast;
    NonlinearProblem::new(
        op.clone(),
        "expression",
        Arc::new(move |t, x: &[f64]| h_ast.eval(t, x)),
        Arc::new(move |t, x: &[f64]| {
            DVector::from_fn(grad_for_closure.len(), |i, _| grad_for_closure[i].eval(t, x))
        }),
        Arc::new(move |t, x: &[f64]| {
            DMatrix::from_fn(hess_for_closure.len(), hess_for_closure.len(), |i, j| {
                hess_for_closure[i][j].eval(t, x)
            })
        }),
        bound,
        1.0,
    )
}

/// Rewrite a second-order problem as the equivalent first-order one with
/// H(t, (x1, x2)) = V(t, x1) + ½|x2|², matching Bolza angles, and comparison
/// coefficients lifted as diag{B, I_n}.
pub fn lift_second_order(prob: &NonlinearProblem) -> Result<NonlinearProblem> {
    if prob.op.order != Order::Second {
        return Err(Error::spec("lift_second_order requires a second-order problem"));
    }
    let (alpha, beta) = match prob.op.bc {
        BoundaryCondition::SturmLiouville { alpha, beta } => (alpha, beta),
        _ => return Err(Error::spec("second-order problems carry Sturm-Liouville conditions")),
    };
    let n = prob.op.n;
    let op = build_operator(
        BoundaryCondition::bolza(alpha, beta)?,
        Order::First,
        n,
        prob.op.grid,
    )?;
    let inner_h = prob.clone();
    let inner_g = prob.clone();
    let inner_hess = prob.clone();
    let lifted = NonlinearProblem::new(
        op,
        format!("{}_lifted", prob.name),
        Arc::new(move |t, x: &[f64]| {
            let v2: f64 = x[n..].iter().map(|v| v * v).sum();
            inner_h.h_at(t, &x[..n]) + 0.5 * v2
        }),
        Arc::new(move |t, x: &[f64]| {
            let g1 = inner_g.grad_at(t, &x[..n]);
            let mut g = DVector::zeros(2 * n);
            for i in 0..n {
                g[i] = g1[i];
                g[n + i] = x[n + i];
            }
            g
        }),
        Arc::new(move |t, x: &[f64]| {
            let h1 = inner_hess.hess_at(t, &x[..n]);
            let mut h = DMatrix::identity(2 * n, 2 * n);
            h.view_mut((0, 0), (n, n)).copy_from(&h1);
            h
        }),
        prob.hessian_bound.max(1.0),
        prob.asymptotic_radius,
    )?;
    Ok(match &prob.comparison {
        Some(cmp) => lifted.with_comparison(
            lift_diag_identity(&cmp.b0),
            lift_diag_identity(&cmp.b1),
            lift_diag_identity(&cmp.b2),
        ),
        None => lifted,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FdEntry {
    pub component: String,
    pub max_rel_err: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FdReport {
    pub entries: Vec<FdEntry>,
    pub pass: bool,
    pub grad_tol: f64,
    pub hess_tol: f64,
}

/// Compare gradH against finite differences of H and hessH against finite
/// differences of gradH at random probe points.
pub fn fd_validate(prob: &NonlinearProblem, probes: usize, seed: u64) -> FdReport {
    let d = prob.op.dim();
    let grad_tol = 1e-6;
    let hess_tol = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grad_err = vec![0.0f64; d];
    let mut hess_err = vec![vec![0.0f64; d]; d];
    for _ in 0..probes {
        let t: f64 = rng.random();
        let x: Vec<f64> = (0..d)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal) * 2.0)
            .collect();
        let g = prob.grad_at(t, &x);
        let hm = prob.hess_at(t, &x);
        for k in 0..d {
            let h = 1e-6 * (1.0 + x[k].abs());
            let mut up = x.clone();
            let mut dn = x.clone();
            up[k] += h;
            dn[k] -= h;
            let fd = (prob.h_at(t, &up) - prob.h_at(t, &dn)) / (2.0 * h);
            let rel = (fd - g[k]).abs() / g[k].abs().max(1.0);
            grad_err[k] = grad_err[k].max(rel);
            let gu = prob.grad_at(t, &up);
            let gd = prob.grad_at(t, &dn);
            for l in 0..d {
                let fd2 = (gu[l] - gd[l]) / (2.0 * h);
                let rel2 = (fd2 - hm[(l, k)]).abs() / hm[(l, k)].abs().max(1.0);
                hess_err[l][k] = hess_err[l][k].max(rel2);
            }
        }
    }
    let mut entries = Vec::new();
    let mut pass = true;
    for (k, e) in grad_err.iter().enumerate() {
        let ok = *e <= grad_tol;
        pass &= ok;
        entries.push(FdEntry {
            component: format!("gradH[{k}]"),
            max_rel_err: *e,
            pass: ok,
        });
    }
    for (l, row) in hess_err.iter().enumerate() {
        for (k, e) in row.iter().enumerate() {
            let ok = *e <= hess_tol;
            pass &= ok;
            entries.push(FdEntry {
                component: format!("hessH[{l}][{k}]"),
                max_rel_err: *e,
                pass: ok,
            });
        }
    }
    FdReport {
        entries,
        pass,
        grad_tol,
        hess_tol,
    }
}
