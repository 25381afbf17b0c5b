//! Time-dependent symmetric matrix coefficients B(t) on [0,1].

use crate::error::{Error, Result};
use crate::quadrature::Quadrature;
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Clone)]
enum Kind {
    Constant(DMatrix<f64>),
    TimeDep(Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>),
    /// Values at the quadrature nodes of `quad`, evaluated in between by the
    /// cubic Lagrange interpolant through the 4 Gauss nodes of each panel.
    Sampled {
        quad: Arc<Quadrature>,
        values: Arc<Vec<DMatrix<f64>>>,
    },
}

/// A symmetric d×d matrix path t ∈ [0,1] ↦ B(t), with a cached bound on
/// sup_t ||B(t)||.
#[derive(Clone)]
pub struct MatrixPath {
    d: usize,
    kind: Kind,
    supnorm: f64,
}

impl std::fmt::Debug for MatrixPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match &self.kind {
            Kind::Constant(_) => "constant",
            Kind::TimeDep(_) => "time-dependent",
            Kind::Sampled { .. } => "sampled",
        };
        write!(f, "MatrixPath(d={}, {kind}, sup={:.4e})", self.d, self.supnorm)
    }
}

fn spectral_norm_symmetric(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0f64, |a, &v| a.max(v.abs()))
}

fn check_symmetric(m: &DMatrix<f64>, at: &str) -> Result<()> {
    let defect = (m - m.transpose()).norm();
    if defect > SYMMETRY_TOL {
        return Err(Error::spec(format!(
            "matrix path not symmetric at {at}: ||B - B^T|| = {defect:.3e}"
        )));
    }
    Ok(())
}

/// Probe nodes used to validate and bound time-dependent paths.
fn probe_nodes() -> Vec<f64> {
    (0..=256).map(|i| i as f64 / 256.0).collect()
}

impl MatrixPath {
    pub fn constant(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::spec("matrix path must be square and nonempty"));
        }
        check_symmetric(&m, "t=const")?;
        let sym = 0.5 * (&m + m.transpose());
        let supnorm = spectral_norm_symmetric(&sym);
        Ok(MatrixPath {
            d: sym.nrows(),
            kind: Kind::Constant(sym),
            supnorm,
        })
    }

    /// Scalar multiple of the identity.
    pub fn scalar(d: usize, c: f64) -> Self {
        MatrixPath::constant(DMatrix::identity(d, d) * c).expect("scalar path")
    }

    pub fn zero(d: usize) -> Self {
        MatrixPath::scalar(d, 0.0)
    }

    pub fn from_fn<F>(d: usize, f: F) -> Result<Self>
    where
        F: Fn(f64) -> DMatrix<f64> + Send + Sync + 'static,
    {
        let mut supnorm = 0.0f64;
        for t in probe_nodes() {
            let m = f(t);
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::spec(format!(
                    "matrix path evaluator returned {}x{}, expected {d}x{d}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            check_symmetric(&m, &format!("t={t}"))?;
            supnorm = supnorm.max(spectral_norm_symmetric(&m));
        }
        Ok(MatrixPath {
            d,
            kind: Kind::TimeDep(Arc::new(f)),
            supnorm,
        })
    }

    /// Build from values at the nodes of `quad` (one matrix per node).
    pub fn from_samples(quad: Arc<Quadrature>, values: Vec<DMatrix<f64>>) -> Result<Self> {
        if values.len() != quad.len() {
            return Err(Error::spec(format!(
                "sample count {} does not match grid {}",
                values.len(),
                quad.len()
            )));
        }
        let d = values[0].nrows();
        let mut supnorm = 0.0f64;
        for (q, m) in values.iter().enumerate() {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::spec("inconsistent sample dimensions"));
            }
            check_symmetric(m, &format!("node {q}"))?;
            supnorm = supnorm.max(spectral_norm_symmetric(m));
        }
        Ok(MatrixPath {
            d,
            kind: Kind::Sampled {
                quad,
                values: Arc::new(values),
            },
            supnorm,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn supnorm(&self) -> f64 {
        self.supnorm
    }

    pub fn constant_value(&self) -> Option<&DMatrix<f64>> {
        match &self.kind {
            Kind::Constant(m) => Some(m),
            _ => None,
        }
    }

    pub fn eval(&self, t: f64) -> DMatrix<f64> {
        match &self.kind {
            Kind::Constant(m) => m.clone(),
            Kind::TimeDep(f) => f(t),
            Kind::Sampled { quad, values } => {
                let n = quad.len();
                let panels = n / 4;
                let h = 1.0 / panels as f64;
                let k = ((t / h).floor() as usize).min(panels - 1);
                // cubic Lagrange through the panel's 4 Gauss nodes
                let base = 4 * k;
                let ts: [f64; 4] = std::array::from_fn(|i| quad.nodes[base + i]);
                let mut out = DMatrix::zeros(self.d, self.d);
                for i in 0..4 {
                    let mut w = 1.0;
                    for j in 0..4 {
                        if i != j {
                            w *= (t - ts[j]) / (ts[i] - ts[j]);
                        }
                    }
                    out += &values[base + i] * w;
                }
                out
            }
        }
    }

    /// Values at all nodes of a quadrature rule.
    pub fn eval_nodes(&self, quad: &Quadrature) -> Vec<DMatrix<f64>> {
        match &self.kind {
            Kind::Sampled { quad: q0, values } if q0.len() == quad.len() => values.as_ref().clone(),
            _ => quad.nodes.iter().map(|&t| self.eval(t)).collect(),
        }
    }

    /// The path B(t) + shift·I.
    pub fn shifted(&self, shift: f64) -> MatrixPath {
        if shift == 0.0 {
            return self.clone();
        }
        let d = self.d;
        let eye = DMatrix::identity(d, d);
        match &self.kind {
            Kind::Constant(m) => MatrixPath {
                d,
                kind: Kind::Constant(m + &eye * shift),
                supnorm: self.supnorm + shift.abs(),
            },
            Kind::TimeDep(f) => {
                let f = f.clone();
                MatrixPath {
                    d,
                    kind: Kind::TimeDep(Arc::new(move |t| f(t) + &eye * shift)),
                    supnorm: self.supnorm + shift.abs(),
                }
            }
            Kind::Sampled { quad, values } => MatrixPath {
                d,
                kind: Kind::Sampled {
                    quad: quad.clone(),
                    values: Arc::new(values.iter().map(|m| m + &eye * shift).collect()),
                },
                supnorm: self.supnorm + shift.abs(),
            },
        }
    }

    /// The convex combination (1-λ)·B1 + λ·B2; constant inputs stay constant
    /// so the matrix-exponential fast path is preserved along homotopies.
    pub fn convex(b1: &MatrixPath, b2: &MatrixPath, lam: f64) -> MatrixPath {
        assert_eq!(b1.d, b2.d, "dimension mismatch in convex combination");
        let d = b1.d;
        match (&b1.kind, &b2.kind) {
            (Kind::Constant(m1), Kind::Constant(m2)) => MatrixPath {
                d,
                kind: Kind::Constant(m1 * (1.0 - lam) + m2 * lam),
                supnorm: b1.supnorm * (1.0 - lam).abs() + b2.supnorm * lam.abs(),
            },
            _ => {
                let p1 = b1.clone();
                let p2 = b2.clone();
                MatrixPath {
                    d,
                    kind: Kind::TimeDep(Arc::new(move |t| {
                        p1.eval(t) * (1.0 - lam) + p2.eval(t) * lam
                    })),
                    supnorm: b1.supnorm * (1.0 - lam).abs() + b2.supnorm * lam.abs(),
                }
            }
        }
    }

    /// Pointwise partial order B1 ≤ B2: B2(t) - B1(t) positive semidefinite
    /// at every probe node.
    pub fn leq(&self, other: &MatrixPath, psd_tol: f64) -> bool {
        self.order_stats(other).0 >= -psd_tol
    }

    /// Strict order B1 < B2: pointwise semidefinite plus positive
    /// definiteness on at least 1% of nodes (numerical surrogate for a set
    /// of nonzero measure).
    pub fn less(&self, other: &MatrixPath, psd_tol: f64) -> bool {
        let (min_eig, frac_pd) = self.order_stats(other);
        min_eig >= -psd_tol && frac_pd >= 0.01
    }

    /// (smallest eigenvalue of B2(t)-B1(t) over probe nodes,
    ///  fraction of nodes where the difference is positive definite)
    fn order_stats(&self, other: &MatrixPath) -> (f64, f64) {
        let nodes = probe_nodes();
        let mut min_eig = f64::INFINITY;
        let mut pd = 0usize;
        let scale = (self.supnorm + other.supnorm).max(1.0);
        for &t in &nodes {
            let diff = other.eval(t) - self.eval(t);
            let eig = diff.symmetric_eigen().eigenvalues;
            let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
            min_eig = min_eig.min(lo);
            if lo > 1e-12 * scale {
                pd += 1;
            }
        }
        (min_eig, pd as f64 / nodes.len() as f64)
    }

    /// Largest eigenvalue of B(t) over probe nodes (signed, not absolute).
    pub fn max_eigenvalue(&self) -> f64 {
        probe_nodes()
            .iter()
            .map(|&t| {
                self.eval(t)
                    .symmetric_eigen()
                    .eigenvalues
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Lift an n×n path to the 2n×2n block-diagonal path diag{B, I_n} used when
/// rewriting second-order problems as first-order ones.
pub fn lift_diag_identity(b: &MatrixPath) -> MatrixPath {
    let n = b.dim();
    let lift_mat = move |m: &DMatrix<f64>| {
        let mut out = DMatrix::identity(2 * n, 2 * n);
        out.view_mut((0, 0), (n, n)).copy_from(m);
        out
    };
    if let Some(c) = b.constant_value() {
        return MatrixPath::constant(lift_mat(c)).expect("lifted constant");
    }
    let b = b.clone();
    MatrixPath::from_fn(2 * n, move |t| lift_mat(&b.eval(t))).expect("lifted path")
}

/// Dominant-scalar comparison k·I > B for the route through Eq-(1.4)-style
/// differences: k = max(sup||B1||, sup||B2||) + 1.
pub fn dominating_scalar(b1: &MatrixPath, b2: &MatrixPath) -> f64 {
    b1.supnorm().max(b2.supnorm()) + 1.0
}

/// A vector sampled at quadrature nodes (node-major, d components per node),
/// interpolated the same way as `MatrixPath::Sampled`.
pub fn sampled_vector_path(
    quad: Arc<Quadrature>,
    d: usize,
    samples: Arc<DVector<f64>>,
) -> impl Fn(f64) -> DVector<f64> + Send + Sync {
    move |t: f64| {
        let n = quad.len();
        let panels = n / 4;
        let h = 1.0 / panels as f64;
        let k = ((t / h).floor() as usize).min(panels - 1);
        let base = 4 * k;
        let ts: [f64; 4] = std::array::from_fn(|i| quad.nodes[base + i]);
        let mut out = DVector::zeros(d);
        for i in 0..4 {
            let mut w = 1.0;
            for j in 0..4 {
                if i != j {
                    w *= (t - ts[j]) / (ts[i] - ts[j]);
                }
            }
            for c in 0..d {
                out[c] += samples[(base + i) * d + c] * w;
            }
        }
        out
    }
}
