//! Acceptance suite: one test per criterion, each printing a pass line.
//!
//! Expected values come from independent oracles: the closed-form Dirichlet
//! spectrum (kπ)², brute-force eigenvalue counting for constant
//! coefficients, finite differences for derivatives, and a nonlinear
//! shooting oracle (adaptive Runge-Kutta on the second-order equation plus
//! bisection on the boundary value) for trajectories.

use hamindex::index::{
    homotopy_nullity_sum, index_via_homotopy, index_via_lambda_scan, nullity, qform_indices,
    qform_operator, relative_index, QFORM_NULL_TOL,
};
use hamindex::operator::{build_operator, standard_symplectic, BoundaryCondition, Order};
use hamindex::path::{lift_diag_identity, MatrixPath};
use hamindex::problems::lift_second_order;
use hamindex::reduction::{
    contraction_bound, recover_solution, reduced_gradient, reduced_hessian, reduced_value,
    solve_minus, NonlinearProblem, FP_TOL,
};
use hamindex::search::{morse_counts, multi_start_search, verify_theorem, SearchConfig};
use hamindex::shoot::fundamental_matrix;
use hamindex::spectral::{build_spectral_model, SpectralConfig, SpectralModel};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::time::Instant;

fn dirichlet_sl(n: usize) -> hamindex::operator::OperatorSpec {
    build_operator(
        BoundaryCondition::sturm_liouville(0.0, PI).unwrap(),
        Order::Second,
        n,
        1024,
    )
    .unwrap()
}

fn bolza01(n: usize) -> hamindex::operator::OperatorSpec {
    build_operator(
        BoundaryCondition::bolza(0.0, PI).unwrap(),
        Order::First,
        n,
        1024,
    )
    .unwrap()
}

fn random_symmetric(rng: &mut ChaCha8Rng, d: usize, scale: f64, shift: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| {
        rng.sample::<f64, _>(rand_distr::StandardNormal) * scale
    });
    0.5 * (&a + a.transpose()) + DMatrix::identity(d, d) * shift
}

fn random_psd(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| {
        rng.sample::<f64, _>(rand_distr::StandardNormal) * scale
    });
    &a * a.transpose()
}

/// Closed-form oracle: index of the constant coefficient B on the Dirichlet
/// second-order operator is #{(k, i) : (kπ)² < μ_i(B)}, and the nullity
/// counts exact coincidences.
fn dirichlet_constant_oracle(b: &DMatrix<f64>) -> (i64, usize) {
    let eig = b.clone().symmetric_eigen().eigenvalues;
    let mut i = 0i64;
    let mut nu = 0usize;
    for &mu in eig.iter() {
        let mut k = 1.0f64;
        while (k * PI) * (k * PI) < mu - 1e-9 {
            i += 1;
            k += 1.0;
        }
        if ((k * PI) * (k * PI) - mu).abs() <= 1e-9 {
            nu += 1;
        }
    }
    (i, nu)
}

mod oracle {
    //! Nonlinear shooting for -x'' = f(x), x(0) = x(1) = 0 (scalar).
    //! Independent of the spectral Galerkin machinery: classic RK4 with a
    //! fixed fine step, sampled at arbitrary times, plus bisection on the
    //! terminal value as a function of the initial slope.

    pub struct Shot {
        /// (x, x') at each requested sample time.
        pub states: Vec<(f64, f64)>,
        pub terminal: f64,
    }

    pub fn integrate(f: &dyn Fn(f64) -> f64, slope: f64, times: &[f64]) -> Shot {
        let step: f64 = 1.0 / 20_000.0;
        let mut t = 0.0;
        let mut y = [0.0f64, slope];
        let mut states = Vec::with_capacity(times.len());
        let mut next = 0usize;
        let rhs = |y: [f64; 2]| [y[1], -f(y[0])];
        while next < times.len() || t < 1.0 - 1e-14 {
            let target = if next < times.len() {
                times[next].min(1.0)
            } else {
                1.0
            };
            while t < target - 1e-14 {
                let h = step.min(target - t);
                let k1 = rhs(y);
                let k2 = rhs([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
                let k3 = rhs([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
                let k4 = rhs([y[0] + h * k3[0], y[1] + h * k3[1]]);
                y[0] += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
                y[1] += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
                t += h;
            }
            if next < times.len() {
                states.push((y[0], y[1]));
                next += 1;
            } else {
                break;
            }
        }
        Shot {
            states,
            terminal: y[0],
        }
    }

    /// Find a positive initial slope with x(1) = 0 by bracketing + bisection.
    pub fn positive_slope(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, grid: usize) -> Option<f64> {
        let ends: Vec<(f64, f64)> = (0..=grid)
            .map(|i| {
                let s = lo + (hi - lo) * i as f64 / grid as f64;
                (s, integrate(f, s, &[]).terminal)
            })
            .collect();
        for w in ends.windows(2) {
            let ((mut a, fa), (mut b, _fb)) = (w[0], w[1]);
            if fa == 0.0 {
                return Some(a);
            }
            if w[0].1 * w[1].1 < 0.0 {
                let mut fa = fa;
                for _ in 0..90 {
                    let m = 0.5 * (a + b);
                    let fm = integrate(f, m, &[]).terminal;
                    if fa * fm <= 0.0 {
                        b = m;
                    } else {
                        a = m;
                        fa = fm;
                    }
                }
                return Some(0.5 * (a + b));
            }
        }
        None
    }
}

fn arctan_spring_problem(op: &hamindex::operator::OperatorSpec, a: f64, b: f64) -> NonlinearProblem {
    use std::sync::Arc;
    NonlinearProblem::new(
        op.clone(),
        "arctan_spring",
        Arc::new(move |_t, x: &[f64]| {
            let v = x[0];
            0.5 * a * v * v - b * (v * v.atan() - 0.5 * v.mul_add(v, 1.0).ln())
        }),
        Arc::new(move |_t, x: &[f64]| DVector::from_element(1, a * x[0] - b * x[0].atan())),
        Arc::new(move |_t, x: &[f64]| DMatrix::from_element(1, 1, a - b / (1.0 + x[0] * x[0]))),
        a.max((a - b).abs()),
        1.0,
    )
    .unwrap()
}

fn sup_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn criterion_01_dirichlet_index_table() {
    let t0 = Instant::now();
    let op = dirichlet_sl(1);
    for (c, want) in [(5.0, 0i64), (15.0, 1), (50.0, 2), (100.0, 3)] {
        let report = index_via_lambda_scan(&op, &MatrixPath::scalar(1, c)).unwrap();
        let oracle = (1..100).filter(|&k| ((k as f64) * PI).powi(2) < c).count() as i64;
        assert_eq!(report.i, want, "index of {c}I");
        assert_eq!(report.i, oracle, "oracle #{{k : (kπ)² < {c}}}");
    }
    let nu = nullity(&op, &MatrixPath::scalar(1, PI * PI)).unwrap();
    assert_eq!(nu, 1, "nullity at the exact eigenvalue π²");
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(elapsed <= 10.0, "runtime {elapsed:.2}s exceeds 10s");
    println!("criterion 1: PASS — Dirichlet index table {{5,15,50,100}} → {{0,1,2,3}}, ν(π²I)=1 ({elapsed:.2}s)");
}

#[test]
fn criterion_02_first_second_order_equality() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    for n in [1usize, 2] {
        let ops = dirichlet_sl(n);
        let opf = bolza01(n);
        for _ in 0..10 {
            let b = random_symmetric(&mut rng, n, 18.0, 30.0);
            let bs = MatrixPath::constant(b.clone()).unwrap();
            let sl = index_via_lambda_scan(&ops, &bs).unwrap();
            let lifted = lift_diag_identity(&bs);
            let fo = index_via_homotopy(&opf, &lifted, None).unwrap();
            let (oracle_i, oracle_nu) = dirichlet_constant_oracle(&b);
            assert_eq!(sl.i, fo.i, "i^f(diag{{B,I}}) = i^s(B) for B = {b}");
            assert_eq!(sl.nu, fo.nu, "nullity equality for B = {b}");
            assert_eq!(sl.i, oracle_i, "closed-form oracle for B = {b}");
            assert_eq!(sl.nu, oracle_nu);
            checked += 1;
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    assert_eq!(checked, 20);
    assert!(elapsed <= 60.0, "runtime {elapsed:.2}s exceeds 60s");
    println!("criterion 2: PASS — i^f(diag{{B,I_n}}) = i^s(B) on 20 random constants, n ∈ {{1,2}} ({elapsed:.2}s)");
}

/// The time-dependent Dirichlet coefficient with the exact kernel
/// w(t) = sin(πt)(1 + 0.4cos(πt)): B(t) = π² + 1.2π²cos(πt)/(1+0.4cos(πt)).
fn kernel_coefficient() -> MatrixPath {
    MatrixPath::from_fn(1, |t| {
        let g = 1.0 + 0.4 * (PI * t).cos();
        DMatrix::from_element(1, 1, PI * PI + 1.2 * PI * PI * (PI * t).cos() / g)
    })
    .unwrap()
}

#[test]
fn criterion_03_qform_nullity_agreement() {
    let ops = dirichlet_sl(1);
    let ops2 = dirichlet_sl(2);
    let opf = bolza01(1);
    let mut battery: Vec<(&hamindex::operator::OperatorSpec, MatrixPath)> = Vec::new();
    for c in [0.5, 5.0, 15.0, PI * PI, 4.0 * PI * PI, 100.0, PI * PI + 0.01, PI * PI - 0.01] {
        battery.push((&ops, MatrixPath::scalar(1, c)));
    }
    battery.push((&ops, MatrixPath::from_fn(1, |t| DMatrix::from_element(1, 1, 5.0 + 3.0 * t)).unwrap()));
    battery.push((&ops, kernel_coefficient()));
    battery.push((
        &ops2,
        MatrixPath::constant(DMatrix::from_row_slice(2, 2, &[12.0, 3.0, 3.0, 40.0])).unwrap(),
    ));
    battery.push((
        &ops2,
        MatrixPath::from_fn(2, |t| {
            DMatrix::from_row_slice(2, 2, &[10.0 * t, 2.0, 2.0, 20.0 - 5.0 * t])
        })
        .unwrap(),
    ));
    for c in [0.0, 1.5, PI, -2.0, 2.0 * PI] {
        battery.push((&opf, MatrixPath::scalar(2, c)));
    }
    battery.push((
        &opf,
        MatrixPath::from_fn(2, |t| {
            DMatrix::from_row_slice(2, 2, &[1.0 + t, 0.4 * t, 0.4 * t, 2.0 - t])
        })
        .unwrap(),
    ));
    let opp = build_operator(
        BoundaryCondition::p_periodic(DMatrix::identity(2, 2)).unwrap(),
        Order::First,
        1,
        1024,
    )
    .unwrap();
    battery.push((&opp, MatrixPath::zero(2)));
    battery.push((&opp, MatrixPath::scalar(2, 2.0 * PI)));
    battery.push((&opp, MatrixPath::scalar(2, 1.0)));
    battery.push((&opp, MatrixPath::scalar(2, -1.5)));

    assert!(battery.len() >= 20, "battery has {} entries", battery.len());
    // the engineered kernel really is a kernel
    assert_eq!(nullity(&ops, &kernel_coefficient()).unwrap(), 1);

    for (op, b) in &battery {
        let model = build_spectral_model(op, &SpectralConfig::with_bound(b.supnorm().max(1.0)))
            .unwrap();
        let qf = qform_indices(&model, b, QFORM_NULL_TOL).unwrap();
        let nu = nullity(op, b).unwrap();
        assert_eq!(
            qf.nu_beta, nu,
            "qform vs shooting nullity for {b:?} on {:?}",
            op.bc
        );
    }
    println!(
        "criterion 3: PASS — qform nullity = shooting nullity on {} coefficient paths",
        battery.len()
    );
}

#[test]
fn criterion_04_additivity_and_monotonicity() {
    let op = bolza01(1);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    // additivity on 10 random triples, exact
    for trial in 0..10 {
        let b1 = MatrixPath::constant(random_symmetric(&mut rng, 2, 2.5, 0.0)).unwrap();
        let b2 = MatrixPath::constant(random_symmetric(&mut rng, 2, 2.5, 0.0)).unwrap();
        let b3 = MatrixPath::constant(random_symmetric(&mut rng, 2, 2.5, 0.0)).unwrap();
        let i12 = relative_index(&op, &b1, &b2).unwrap();
        let i23 = relative_index(&op, &b2, &b3).unwrap();
        let i13 = relative_index(&op, &b1, &b3).unwrap();
        assert_eq!(i12 + i23, i13, "additivity failed on triple {trial}");
    }
    // monotonicity on 20 ordered pairs (half of them strict)
    let anchor = hamindex::index::default_anchor(&op).unwrap();
    for trial in 0..20 {
        let b1m = random_symmetric(&mut rng, 2, 2.0, 0.0);
        let strict = trial % 2 == 0;
        let incr = if strict {
            random_psd(&mut rng, 2, 1.2) + DMatrix::identity(2, 2) * 0.3
        } else {
            random_psd(&mut rng, 2, 1.2)
        };
        let b2m = &b1m + &incr;
        let b1 = MatrixPath::constant(b1m).unwrap();
        let b2 = MatrixPath::constant(b2m).unwrap();
        let r1 = index_via_homotopy(&op, &b1, Some(anchor.clone())).unwrap();
        let r2 = index_via_homotopy(&op, &b2, Some(anchor.clone())).unwrap();
        assert!(r1.i <= r2.i, "i monotone: {} > {}", r1.i, r2.i);
        assert!(
            r1.i + r1.nu as i64 <= r2.i + r2.nu as i64,
            "i+nu monotone"
        );
        if strict {
            assert!(
                r1.i + r1.nu as i64 <= r2.i,
                "strict pair: nu(B1)+i(B1) <= i(B2) violated: {}+{} vs {}",
                r1.i,
                r1.nu,
                r2.i
            );
        }
    }
    println!("criterion 4: PASS — additivity exact on 10 triples; monotonicity on 20 ordered pairs");
}

#[test]
fn criterion_05_homotopy_equals_subtraction() {
    let opf = bolza01(1);
    let ops = dirichlet_sl(1);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut count = 0;
    for trial in 0..10 {
        let (op, d): (&hamindex::operator::OperatorSpec, usize) =
            if trial % 2 == 0 { (&opf, 2) } else { (&ops, 1) };
        let b1m = random_symmetric(&mut rng, d, 3.0, 0.0);
        let b2m = &b1m + random_psd(&mut rng, d, 1.5) + DMatrix::identity(d, d) * 0.5;
        let b1 = MatrixPath::constant(b1m).unwrap();
        let b2 = MatrixPath::constant(b2m).unwrap();
        let (direct, _) = homotopy_nullity_sum(op, &b1, &b2).unwrap();
        let subtracted = relative_index(op, &b1, &b2).unwrap();
        assert_eq!(direct, subtracted, "Eq(1.3) vs Eq(1.4) on pair {trial}");
        count += 1;
    }
    assert_eq!(count, 10);
    println!("criterion 5: PASS — homotopy sum equals subtraction route on 10 strict pairs");
}

/// Mild lifted instance used for the contraction/derivative/identity
/// criteria: a = 12, b = 9 keeps the model small while exercising a
/// nonempty Jminus block.
fn lifted_mild() -> (SpectralModel, NonlinearProblem) {
    let ops = dirichlet_sl(1);
    let prob2 = arctan_spring_problem(&ops, 12.0, 9.0)
        .with_comparison(
            MatrixPath::scalar(1, 3.0),
            MatrixPath::scalar(1, 11.0),
            MatrixPath::scalar(1, 12.0),
        )
        .with_radius(2.9);
    let lifted = lift_second_order(&prob2).unwrap();
    let model =
        build_spectral_model(&lifted.op, &SpectralConfig::with_bound(lifted.hessian_bound))
            .unwrap();
    (model, lifted)
}

#[test]
fn criterion_06_contraction() {
    // direct problems have an empty Jminus block; the lifted one contracts
    let (model, prob) = lifted_mild();
    let bound = contraction_bound(&model, &prob);
    assert!(bound <= 0.1 + 1e-12, "default bound {bound} exceeds 0.1");
    let e_len = model.e_indices().len();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..5 {
        let ustar = DVector::from_fn(e_len, |_, _| {
            rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        let m = solve_minus(&model, &prob, &ustar, FP_TOL).unwrap();
        assert!(
            m.contraction_factor <= bound,
            "observed {} > bound {bound}",
            m.contraction_factor
        );
        assert!(m.iterations <= 200, "iterations {}", m.iterations);
    }
    // the zero problem converges instantly from the origin
    let opf = bolza01(1);
    let modelz = build_spectral_model(&opf, &SpectralConfig::with_bound(1.0)).unwrap();
    let d = opf.dim();
    let zero = NonlinearProblem::new(
        opf.clone(),
        "zero",
        std::sync::Arc::new(|_t, _x| 0.0),
        std::sync::Arc::new(move |_t, _x| DVector::zeros(d)),
        std::sync::Arc::new(move |_t, _x| DMatrix::zeros(d, d)),
        0.0,
        1.0,
    )
    .unwrap();
    let m = solve_minus(
        &modelz,
        &zero,
        &DVector::zeros(modelz.e_indices().len()),
        FP_TOL,
    )
    .unwrap();
    assert!(m.coeffs.norm() < 1e-14);
    println!("criterion 6: PASS — Picard contraction ≤ (M+ε)/β ≤ 0.1, convergence within 200 iterations");
}

#[test]
fn criterion_07_derivative_checks() {
    // full-component FD on the direct problem at 10 random points
    let ops = dirichlet_sl(1);
    let model = build_spectral_model(&ops, &SpectralConfig::with_bound(25.5)).unwrap();
    let prob = arctan_spring_problem(&ops, 25.0, 20.0);
    let e_len = model.e_indices().len();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for point in 0..10 {
        let ustar = DVector::from_fn(e_len, |_, _| {
            rng.sample::<f64, _>(rand_distr::StandardNormal) * 1.2
        });
        let g = reduced_gradient(&model, &prob, &ustar).unwrap();
        let hess = reduced_hessian(&model, &prob, &ustar).unwrap();
        let h = 1e-6;
        for k in 0..e_len {
            let mut up = ustar.clone();
            let mut dn = ustar.clone();
            up[k] += h;
            dn[k] -= h;
            let fd = (reduced_value(&model, &prob, &up).unwrap()
                - reduced_value(&model, &prob, &dn).unwrap())
                / (2.0 * h);
            let rel = (g[k] - fd).abs() / g[k].abs().max(1.0);
            assert!(rel <= 1e-6, "point {point} grad[{k}]: rel {rel:.2e}");
        }
        let hh = 1e-5;
        for k in 0..e_len {
            let mut up = ustar.clone();
            let mut dn = ustar.clone();
            up[k] += hh;
            dn[k] -= hh;
            let gu = reduced_gradient(&model, &prob, &up).unwrap();
            let gd = reduced_gradient(&model, &prob, &dn).unwrap();
            for l in 0..e_len {
                let fd = (gu[l] - gd[l]) / (2.0 * hh);
                let rel = (hess[(l, k)] - fd).abs() / hess[(l, k)].abs().max(1.0);
                assert!(rel <= 1e-5, "point {point} hess[{l},{k}]: rel {rel:.2e}");
            }
        }
    }
    // directional FD on the lifted problem at 10 random points
    let (modell, probl) = lifted_mild();
    let el = modell.e_indices().len();
    for point in 0..10 {
        let ustar = DVector::from_fn(el, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let g = reduced_gradient(&modell, &probl, &ustar).unwrap();
        let mut dir = DVector::from_fn(el, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        dir /= dir.norm();
        let h = 1e-6;
        let fd = (reduced_value(&modell, &probl, &(&ustar + &dir * h)).unwrap()
            - reduced_value(&modell, &probl, &(&ustar - &dir * h)).unwrap())
            / (2.0 * h);
        let dd = g.dot(&dir);
        let rel = (dd - fd).abs() / dd.abs().max(1.0);
        assert!(rel <= 1e-6, "lifted point {point}: directional rel {rel:.2e}");
    }
    println!("criterion 7: PASS — gradient vs FD ≤ 1e-6 and Hessian vs FD ≤ 1e-5 at 10 points per problem");
}

#[test]
fn criterion_08_hessian_qform_link() {
    let (model, prob) = lifted_mild();
    let e_len = model.e_indices().len();
    let theta = DVector::zeros(e_len);
    let a2 = reduced_hessian(&model, &prob, &theta).unwrap();
    let b0 = lift_diag_identity(&MatrixPath::scalar(1, 3.0));
    let bb = qform_operator(&model, &b0).unwrap();
    let eye = DMatrix::identity(e_len, e_len);
    let diff = (&a2 - (&eye - &bb))
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(diff <= 1e-9, "entrywise difference {diff:.3e}");
    let (m_minus, _) = morse_counts(&a2);
    let qf = qform_indices(&model, &b0, QFORM_NULL_TOL).unwrap();
    assert_eq!(m_minus as i64, qf.i_beta, "m⁻(a''(θ)) = i_β(B0)");
    println!(
        "criterion 8: PASS — a''(θ) = (I−𝓑)_EE entrywise ({diff:.1e} ≤ 1e-9); m⁻ = i_β = {}",
        qf.i_beta
    );
}

#[test]
fn criterion_09_existence_experiment() {
    let t0 = Instant::now();
    let op = dirichlet_sl(1);
    let a = 25.0;
    let b = 20.0;
    let prob = arctan_spring_problem(&op, a, b)
        .with_comparison(
            MatrixPath::scalar(1, 5.0),
            MatrixPath::scalar(1, 11.0),
            MatrixPath::scalar(1, 30.0),
        )
        .with_radius(0.66);
    let model = build_spectral_model(&op, &SpectralConfig::with_bound(prob.hessian_bound)).unwrap();
    let cfg = SearchConfig {
        starts: 64,
        seed: 42,
        ..Default::default()
    };
    let report = verify_theorem(&model, &prob, &cfg).unwrap();
    assert!(report.hypotheses_pass, "{:#?}", report.hypotheses);
    assert!(report.condition_iv, "condition (iv) expected to hold");
    assert_eq!(report.predicted, 2);
    assert!(
        report.nontrivial_found >= 2,
        "found {} nontrivial",
        report.nontrivial_found
    );

    // ± pair structure
    let nontrivial: Vec<_> = report
        .points
        .iter()
        .filter(|p| p.coefficient_norm() > 1e-3)
        .collect();
    for p in &nontrivial {
        assert!(
            nontrivial
                .iter()
                .any(|q| (&p.ustar + &q.ustar).norm() <= 1e-3),
            "mirror image missing"
        );
        assert!(p.residual <= 1e-8, "Galerkin residual {}", p.residual);
    }

    // independent nonlinear-shooting oracle trajectory comparison
    let f = move |x: f64| a * x - b * x.atan();
    let slope = oracle::positive_slope(&f, 0.5, 12.0, 60).expect("oracle slope");
    let shot = oracle::integrate(&f, slope, &model.quad.nodes);
    let x_oracle: Vec<f64> = shot.states.iter().map(|s| s.0).collect();
    let mut matched = 0;
    for p in &nontrivial {
        let xs: Vec<f64> = p.trajectory.iter().cloned().collect();
        let direct = sup_norm_diff(&xs, &x_oracle);
        let mirrored: Vec<f64> = xs.iter().map(|v| -v).collect();
        let diff = direct.min(sup_norm_diff(&mirrored, &x_oracle));
        if diff <= 1e-6 {
            matched += 1;
        } else {
            panic!("trajectory differs from oracle by {diff:.3e}");
        }
    }
    assert_eq!(matched, nontrivial.len());
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(elapsed <= 60.0, "runtime {elapsed:.2}s exceeds 60s");
    println!(
        "criterion 9: PASS — hypotheses hold, {} nontrivial ± solutions match the shooting oracle to 1e-6 ({elapsed:.2}s)",
        nontrivial.len()
    );
}

#[test]
fn criterion_10_symplecticity() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    for n in [1usize, 2] {
        let op = bolza01(n);
        let j = standard_symplectic(n);
        for trial in 0..8 {
            let b: MatrixPath = if trial % 2 == 0 {
                MatrixPath::constant(random_symmetric(&mut rng, 2 * n, 4.0, 0.0)).unwrap()
            } else {
                let base = random_symmetric(&mut rng, 2 * n, 2.0, 0.0);
                let osc = random_symmetric(&mut rng, 2 * n, 1.5, 0.0);
                MatrixPath::from_fn(2 * n, move |t| {
                    &base + &osc * (2.0 * PI * t).sin()
                })
                .unwrap()
            };
            let psi = fundamental_matrix(&op, &b, 1.0).unwrap();
            let defect = (psi.transpose() * &j * &psi - &j).norm();
            worst = worst.max(defect);
            assert!(defect <= 1e-9, "symplecticity defect {defect:.3e}");
        }
    }
    println!("criterion 10: PASS — ‖Ψ(1)ᵀJΨ(1) − J‖ ≤ 1e-9 across the battery (worst {worst:.2e})");
}

#[test]
fn criterion_11_beta_window_stability() {
    // index differences via the q-form route are invariant under doubling
    // beta (and with it the window)
    let opf = bolza01(1);
    let paths = [
        MatrixPath::scalar(2, 1.5),
        MatrixPath::scalar(2, -2.0),
        MatrixPath::constant(DMatrix::from_row_slice(2, 2, &[2.0, 0.7, 0.7, -1.0])).unwrap(),
    ];
    let bound = 4.0;
    let model1 = build_spectral_model(&opf, &SpectralConfig::with_bound(bound)).unwrap();
    let model2 = build_spectral_model(
        &opf,
        &SpectralConfig {
            beta: Some(2.0 * model1.beta),
            ..SpectralConfig::with_bound(bound)
        },
    )
    .unwrap();
    assert!(model2.window >= 2.0 * model1.window - 1e-9);
    let q0_1 = qform_indices(&model1, &MatrixPath::zero(2), QFORM_NULL_TOL).unwrap();
    let q0_2 = qform_indices(&model2, &MatrixPath::zero(2), QFORM_NULL_TOL).unwrap();
    for b in &paths {
        let q1 = qform_indices(&model1, b, QFORM_NULL_TOL).unwrap();
        let q2 = qform_indices(&model2, b, QFORM_NULL_TOL).unwrap();
        assert_eq!(
            q1.i_beta - q0_1.i_beta,
            q2.i_beta - q0_2.i_beta,
            "index difference changed under beta doubling for {b:?}"
        );
        assert_eq!(q1.nu_beta, q2.nu_beta);
    }

    // critical values of the existence instance are stable to 1e-6
    let op = dirichlet_sl(1);
    let prob = arctan_spring_problem(&op, 25.0, 20.0).with_radius(0.66);
    let cfg = SearchConfig {
        starts: 16,
        seed: 42,
        ..Default::default()
    };
    let m1 = build_spectral_model(&op, &SpectralConfig::with_bound(prob.hessian_bound)).unwrap();
    let m2 = build_spectral_model(
        &op,
        &SpectralConfig {
            beta: Some(2.0 * m1.beta),
            window: Some(8.0 * m1.beta),
            ..SpectralConfig::with_bound(prob.hessian_bound)
        },
    )
    .unwrap();
    let p1 = multi_start_search(&m1, &prob, &cfg).unwrap();
    let p2 = multi_start_search(&m2, &prob, &cfg).unwrap();
    let mut v1: Vec<f64> = p1.iter().map(|p| p.value).collect();
    let mut v2: Vec<f64> = p2.iter().map(|p| p.value).collect();
    v1.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v2.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(v1.len(), v2.len(), "critical point counts differ");
    for (a, b) in v1.iter().zip(&v2) {
        assert!(
            (a - b).abs() <= 1e-6,
            "critical value moved under doubling: {a} vs {b}"
        );
    }
    // recovered solutions of the doubled model still satisfy the equation
    for p in &p2 {
        let rec = recover_solution(&m2, &prob, &p.ustar).unwrap();
        assert!(rec.residual <= 1e-8);
    }
    println!("criterion 11: PASS — index differences and critical values stable under β→2β, Λ→2Λ");
}
