//! Critical-point search on the reduced functional and hypothesis
//! verification for the existence theorems.
//!
//! Damped Newton on the gradient of the reduced functional with a line
//! search on ||a'||²; when the Hessian solve fails the step falls back to
//! the merit-function descent direction -a''·a' (the Hessian is symmetric,
//! so this is the exact gradient of ½||a'||², which handles saddle geometry
//! without sign heuristics). Multi-start places deterministic mode-aligned
//! starts plus seeded random sphere samples and deduplicates by distance.

use crate::error::{Error, Result};
use crate::index::{nullity, qform_indices, relative_index, QFORM_NULL_TOL};
use crate::reduction::{
    contraction_bound, recover_solution, reduced_gradient_at, reduced_hessian_at, solve_minus,
    NonlinearProblem, FP_TOL,
};
use crate::spectral::SpectralModel;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Search configuration; `Default` gives the documented defaults.
#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub starts: usize,
    pub seed: u64,
    /// Scale of the start radii; `None` derives it from the problem's
    /// asymptotic radius and the lowest mode of the model.
    pub start_radius: Option<f64>,
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    /// Coefficient-space distance below which two points are identified.
    pub deflation_radius: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            starts: 64,
            seed: 42,
            start_radius: None,
            newton_tol: 1e-10,
            max_newton_iters: 80,
            deflation_radius: 1e-4,
        }
    }
}

impl SearchConfig {
    fn validate(&self) -> Result<()> {
        if self.starts < 1 {
            return Err(Error::spec("starts must be >= 1"));
        }
        if !(self.deflation_radius > 0.0) {
            return Err(Error::spec("deflation_radius must be positive"));
        }
        Ok(())
    }
}

/// A classified critical point of the reduced functional.
#[derive(Debug, Clone)]
pub struct CriticalPoint {
    pub ustar: DVector<f64>,
    pub value: f64,
    pub gradnorm: f64,
    pub morse_index: usize,
    pub nullity: usize,
    /// Recovered trajectory samples (node-major on the model quadrature).
    pub trajectory: DVector<f64>,
    pub residual: f64,
    pub contraction_factor: f64,
    pub distinct_id: usize,
}

impl CriticalPoint {
    pub fn coefficient_norm(&self) -> f64 {
        self.ustar.norm()
    }

    pub fn sup_norm(&self) -> f64 {
        self.trajectory.iter().fold(0.0f64, |a, &v| a.max(v.abs()))
    }
}

/// Why a Newton run was abandoned.
#[derive(Debug, Clone)]
pub struct Divergence {
    pub iterations: usize,
    pub final_gradnorm: f64,
    /// Gradient norms per iteration.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum NewtonOutcome {
    Converged(CriticalPoint),
    Diverged(Divergence),
}

/// Damped Newton iteration from one start.
pub fn newton_solve(
    model: &SpectralModel,
    prob: &NonlinearProblem,
    start: &DVector<f64>,
    cfg: &SearchConfig,
) -> Result<NewtonOutcome> {
    cfg.validate()?;
    let mut u = start.clone();
    let mut trace = Vec::new();
    let mut minus = solve_minus(model, prob, &u, FP_TOL)?;
    let mut g = reduced_gradient_at(model, prob, &u, &minus)?;
    let mut gn = g.norm();
    for it in 0..=cfg.max_newton_iters {
        trace.push(gn);
        if gn <= cfg.newton_tol {
            return Ok(NewtonOutcome::Converged(classify(
                model, prob, u, gn, &minus, cfg,
            )?));
        }
        if it == cfg.max_newton_iters {
            break;
        }
        let h = reduced_hessian_at(model, prob, &u, &minus)?;
        let newton_dir = h.clone().lu().solve(&(-&g));
        let mut advanced = false;
        let candidates: Vec<DVector<f64>> = match newton_dir {
            Some(d) if d.iter().all(|v| v.is_finite()) => vec![d, -(&h * &g)],
            _ => vec![-(&h * &g)],
        };
        'dirs: for d in candidates {
            let mut step = 1.0;
            for _ in 0..40 {
                let cand = &u + &d * step;
                let m2 = solve_minus(model, prob, &cand, FP_TOL)?;
                let g2 = reduced_gradient_at(model, prob, &cand, &m2)?;
                let gn2 = g2.norm();
                if gn2 < gn {
                    u = cand;
                    minus = m2;
                    g = g2;
                    gn = gn2;
                    advanced = true;
                    break 'dirs;
                }
                step *= 0.5;
            }
        }
        if !advanced {
            break;
        }
    }
    Ok(NewtonOutcome::Diverged(Divergence {
        iterations: trace.len().saturating_sub(1),
        final_gradnorm: gn,
        trace,
    }))
}

fn classify(
    model: &SpectralModel,
    prob: &NonlinearProblem,
    ustar: DVector<f64>,
    gradnorm: f64,
    minus: &crate::reduction::MinusSolve,
    _cfg: &SearchConfig,
) -> Result<CriticalPoint> {
    let value = crate::reduction::reduced_value(model, prob, &ustar)?;
    let h = reduced_hessian_at(model, prob, &ustar, minus)?;
    let (morse_index, nullity) = morse_counts(&h);
    let rec = recover_solution(model, prob, &ustar)?;
    Ok(CriticalPoint {
        ustar,
        value,
        gradnorm,
        morse_index,
        nullity,
        trajectory: rec.x_samples,
        residual: rec.residual,
        contraction_factor: rec.minus.contraction_factor,
        distinct_id: 0,
    })
}

/// (negative count, near-zero count) of a symmetric matrix's eigenvalues
/// with the relative threshold 1e-7·||·||.
pub fn morse_counts(h: &DMatrix<f64>) -> (usize, usize) {
    let eig = h.clone().symmetric_eigen().eigenvalues;
    let scale = eig.iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1e-300);
    let tol = 1e-7 * scale;
    let neg = eig.iter().filter(|&&v| v < -tol).count();
    let zero = eig.iter().filter(|&&v| v.abs() <= tol).count();
    (neg, zero)
}

/// Deterministic multi-start search: the origin, mode-aligned starts along
/// the low modes, and seeded random sphere samples; results deduplicated by
/// `deflation_radius` and ordered by value, then coefficient norm.
pub fn multi_start_search(
    model: &SpectralModel,
    prob: &NonlinearProblem,
    cfg: &SearchConfig,
) -> Result<Vec<CriticalPoint>> {
    cfg.validate()?;
    let e_idx = model.e_indices();
    let e_len = e_idx.len();
    let scale = cfg.start_radius.unwrap_or_else(|| {
        let lowest = model
            .jplus
            .iter()
            .map(|&j| model.lambda_eps[j])
            .fold(f64::INFINITY, f64::min)
            .max(1.0);
        prob.asymptotic_radius.max(1.0) * lowest.sqrt()
    });
    let radii = [0.5 * scale, scale, 2.0 * scale, 4.0 * scale];

    let mut starts: Vec<DVector<f64>> = vec![DVector::zeros(e_len)];
    // mode-aligned starts along each Jzero mode and the lowest Jplus modes
    let mut aligned: Vec<usize> = Vec::new();
    for (k, &j) in e_idx.iter().enumerate() {
        if model.lambda_eps[j] < 0.0 {
            aligned.push(k);
        }
    }
    let mut plus_sorted: Vec<(usize, f64)> = e_idx
        .iter()
        .enumerate()
        .filter(|(_, &j)| model.lambda_eps[j] > 0.0)
        .map(|(k, &j)| (k, model.lambda_eps[j]))
        .collect();
    plus_sorted.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    aligned.extend(plus_sorted.iter().take(4).map(|(k, _)| *k));
    for &k in aligned.iter().take(8) {
        for r in [radii[1], radii[3]] {
            for sgn in [1.0, -1.0] {
                let mut u = DVector::zeros(e_len);
                u[k] = sgn * r;
                starts.push(u);
            }
        }
    }
    // seeded random sphere samples
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for s in 0..cfg.starts {
        let mut v = DVector::from_fn(e_len, |_, _| {
            rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        let n = v.norm();
        if n > 0.0 {
            v /= n;
        }
        starts.push(v * radii[s % radii.len()]);
    }

    let outcomes: Vec<NewtonOutcome> = starts
        .par_iter()
        .map(|s| newton_solve(model, prob, s, cfg))
        .collect::<Result<Vec<_>>>()?;

    let mut points: Vec<CriticalPoint> = outcomes
        .into_iter()
        .filter_map(|o| match o {
            NewtonOutcome::Converged(p) => Some(p),
            NewtonOutcome::Diverged(_) => None,
        })
        .collect();
    points.sort_by(|a, b| {
        (a.value, a.coefficient_norm())
            .partial_cmp(&(b.value, b.coefficient_norm()))
            .unwrap()
    });
    let mut distinct: Vec<CriticalPoint> = Vec::new();
    for p in points {
        if distinct
            .iter()
            .all(|q| (&p.ustar - &q.ustar).norm() > cfg.deflation_radius)
        {
            distinct.push(p);
        }
    }
    for (id, p) in distinct.iter_mut().enumerate() {
        p.distinct_id = id;
    }
    Ok(distinct)
}

/// One verified hypothesis or identity.
#[derive(Debug, Clone, Serialize)]
pub struct HypothesisItem {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Outcome of checking an existence theorem's hypotheses and conclusion on a
/// concrete problem.
#[derive(Debug, Clone)]
pub struct TheoremReport {
    pub hypotheses: Vec<HypothesisItem>,
    /// (i)-(iii) all pass.
    pub hypotheses_pass: bool,
    /// The stronger condition (iv) also passes.
    pub condition_iv: bool,
    /// Lower bound on nontrivial solutions predicted by the theorem
    /// (0 when (iii) fails).
    pub predicted: usize,
    pub morse_at_theta: usize,
    pub i_beta_b0: i64,
    pub points: Vec<CriticalPoint>,
    pub nontrivial_found: usize,
    /// found ≥ predicted ("found at least", never "exactly").
    pub conclusion_pass: bool,
}

impl TheoremReport {
    pub fn pass(&self) -> bool {
        self.hypotheses_pass && self.conclusion_pass
    }
}

/// Verify the asymptotically-linear existence theorem on a problem with
/// comparison data (B0, B1, B2, r) and run the search for its conclusion.
pub fn verify_theorem(
    model: &SpectralModel,
    prob: &NonlinearProblem,
    cfg: &SearchConfig,
) -> Result<TheoremReport> {
    let comparison = prob
        .comparison
        .as_ref()
        .ok_or_else(|| Error::spec("verify_theorem requires comparison data B0, B1, B2"))?
        .clone();
    let op = &prob.op;
    let b0 = &comparison.b0;
    let b1 = &comparison.b1;
    let b2 = &comparison.b2;
    let mut items: Vec<HypothesisItem> = Vec::new();
    let push = |items: &mut Vec<HypothesisItem>, name: &str, pass: bool, detail: String| {
        items.push(HypothesisItem {
            name: name.to_string(),
            pass,
            detail,
        });
    };

    // (i) bounded Hessian with vanishing gradient at the origin is enforced
    // by the NonlinearProblem constructor; record the bound actually used.
    let rate = contraction_bound(model, prob);
    push(
        &mut items,
        "(i) bounded Hessian, gradient vanishes at 0",
        rate < 1.0,
        format!("M = {}, (M+eps)/beta = {rate:.4}", prob.hessian_bound),
    );

    // B0 must be the Hessian at the origin
    let mut b0_matches = true;
    for k in 0..=8 {
        let t = k as f64 / 8.0;
        let diff = (b0.eval(t) - prob.hess_at(t, &vec![0.0; op.dim()])).norm();
        if diff > 1e-9 {
            b0_matches = false;
        }
    }
    push(
        &mut items,
        "B0 equals H''(·,0)",
        b0_matches,
        String::new(),
    );

    let rel12 = relative_index(op, b1, b2)?;
    push(
        &mut items,
        "(ii) i(B1) = i(B2)",
        rel12 == 0,
        format!("I(B1,B2) = {rel12}"),
    );
    let nu2 = nullity(op, b2)?;
    push(
        &mut items,
        "(ii) nu(B2) = 0",
        nu2 == 0,
        format!("nu(B2) = {nu2}"),
    );

    // sandwich B1 <= H''(t,x) <= B2 on probes with |x| >= r
    let r = prob.asymptotic_radius;
    let d = op.dim();
    let mut sandwich = true;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..64 {
        let t: f64 = rng.random();
        let mut dir = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        if dir.norm() > 0.0 {
            dir /= dir.norm();
        }
        let mag = r * (1.0 + 3.0 * rng.random::<f64>());
        let x = dir * mag;
        let h = prob.hess_at(t, x.as_slice());
        let tol = 1e-9 * (1.0 + prob.hessian_bound);
        let low = (&h - b1.eval(t)).symmetric_eigen().eigenvalues;
        let high = (b2.eval(t) - &h).symmetric_eigen().eigenvalues;
        if low.iter().any(|&v| v < -tol) || high.iter().any(|&v| v < -tol) {
            sandwich = false;
        }
    }
    push(
        &mut items,
        "(ii) B1 <= H''(t,x) <= B2 for |x| >= r",
        sandwich,
        format!("probes at |x| in [{r}, {}]", 4.0 * r),
    );

    let rel01 = relative_index(op, b0, b1)?;
    let nu0 = nullity(op, b0)?;
    let gap = rel01 < 0 || rel01 > nu0 as i64;
    push(
        &mut items,
        "(iii) i(B1) not in [i(B0), i(B0)+nu(B0)]",
        gap,
        format!("I(B0,B1) = {rel01}, nu(B0) = {nu0}"),
    );

    let hypotheses_pass = items.iter().all(|it| it.pass);

    // Morse data at the origin and the q-form identity m^-(a''(θ)) = i_beta(B0)
    let e_len = model.e_indices().len();
    let theta = DVector::zeros(e_len);
    let minus = solve_minus(model, prob, &theta, FP_TOL)?;
    let h_theta = reduced_hessian_at(model, prob, &theta, &minus)?;
    let (morse_at_theta, nullity_at_theta) = morse_counts(&h_theta);
    let qf0 = qform_indices(model, b0, QFORM_NULL_TOL)?;
    push(
        &mut items,
        "identity m^-(a''(0)) = i_beta(B0)",
        morse_at_theta as i64 == qf0.i_beta,
        format!("m^- = {morse_at_theta}, i_beta = {}", qf0.i_beta),
    );
    push(
        &mut items,
        "identity m^0(a''(0)) = nu(B0)",
        nullity_at_theta == nu0,
        format!("m^0 = {nullity_at_theta}, nu(B0) = {nu0}"),
    );

    // search for the predicted solutions
    let points = multi_start_search(model, prob, cfg)?;
    let nontrivial: Vec<&CriticalPoint> = points
        .iter()
        .filter(|p| p.coefficient_norm() > 10.0 * cfg.deflation_radius)
        .collect();
    let nontrivial_found = nontrivial.len();

    // (iv): nu(B0) = 0 and |i(B1)-i(B0)| >= nu at the found solutions,
    // evaluated in both the per-solution form and the dimension form
    let mut iv_solution_form = nu0 == 0;
    for p in &nontrivial {
        let hess_path = prob.hessian_along(model.quad.clone(), &p.trajectory)?;
        let nu_sol = nullity(op, &hess_path)?;
        if (rel01.abs() as usize) < nu_sol {
            iv_solution_form = false;
        }
    }
    let iv_dimension_form = nu0 == 0 && rel01.unsigned_abs() as usize >= op.n;
    push(
        &mut items,
        "(iv) nu(B0) = 0 and |i(B1)-i(B0)| >= nu(H''(x0))",
        iv_solution_form,
        format!("|I(B0,B1)| = {}", rel01.abs()),
    );
    push(
        &mut items,
        "(iv') dimension form |i(B1)-i(B0)| >= n",
        iv_dimension_form,
        format!("n = {}", op.n),
    );

    let condition_iv = iv_solution_form;
    let predicted = if hypotheses_pass {
        if condition_iv {
            2
        } else {
            1
        }
    } else {
        0
    };
    let conclusion_pass = nontrivial_found >= predicted;
    let hypotheses_pass_all = hypotheses_pass;

    Ok(TheoremReport {
        hypotheses: items,
        hypotheses_pass: hypotheses_pass_all,
        condition_iv,
        predicted,
        morse_at_theta,
        i_beta_b0: qf0.i_beta,
        points,
        nontrivial_found,
        conclusion_pass,
    })
}
