//! Run reports and the command implementations behind the CLI.
//!
//! Every run emits a JSON report embedding the tool version, a hash of the
//! input spec, the numerics actually used, results, warnings and timings.
//! A deterministic `report_hash` is computed over everything except the
//! timings, so re-running a command reproduces the hash bit-for-bit.

use crate::error::{Error, Result};
use crate::index::{
    self, consistency_report, homotopy_nullity_sum, index, nullity, qform_indices, IndexReport,
    QFORM_NULL_TOL,
};
use crate::operator::{OperatorSpec, Order};
use crate::path::MatrixPath;
use crate::problems::{parse_problem, Built, ProblemSpec};
use crate::reduction::NonlinearProblem;
use crate::search::{multi_start_search, verify_theorem, CriticalPoint, SearchConfig};
use crate::spectral::{build_spectral_model, SpectralConfig, SpectralModel};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Format a float with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Serialize)]
pub struct NumericsUsed {
    pub epsilon: f64,
    pub beta: f64,
    pub window: f64,
    pub grid: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub starts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub version: String,
    pub command: String,
    pub input_hash: String,
    pub numerics: NumericsUsed,
    pub results: Value,
    pub warnings: Vec<String>,
    pub timings_ms: BTreeMap<String, f64>,
    pub report_hash: String,
}

impl RunReport {
    fn assemble(
        command: &str,
        input_hash: String,
        numerics: NumericsUsed,
        results: Value,
        warnings: Vec<String>,
        timings_ms: BTreeMap<String, f64>,
    ) -> RunReport {
        let hashed = json!({
            "version": VERSION,
            "command": command,
            "input_hash": input_hash,
            "numerics": serde_json::to_value(&numerics).unwrap(),
            "results": results,
            "warnings": warnings,
        });
        let bytes = serde_json::to_vec(&hashed).expect("canonical report");
        let report_hash = hex_digest(&bytes);
        RunReport {
            version: VERSION.to_string(),
            command: command.to_string(),
            input_hash,
            numerics,
            results,
            warnings,
            timings_ms,
            report_hash,
        }
    }

    pub fn write(&self, out: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(out, text + "\n")?;
        Ok(())
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    let h = Sha256::digest(bytes);
    h.iter().map(|b| format!("{b:02x}")).collect()
}

/// Load a problem spec and apply CLI numeric overrides.
pub struct LoadedSpec {
    pub spec: ProblemSpec,
    pub built: Built,
    pub input_hash: String,
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub epsilon: Option<f64>,
    pub beta: Option<f64>,
    pub grid: Option<usize>,
    pub starts: Option<usize>,
    pub seed: Option<u64>,
}

pub fn load_spec(path: &Path, ov: &Overrides) -> Result<LoadedSpec> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::spec(format!("cannot read problem spec {}: {e}", path.display())))?;
    let input_hash = hex_digest(&bytes);
    let text = String::from_utf8(bytes).map_err(|e| Error::spec(format!("spec not UTF-8: {e}")))?;
    let mut spec = parse_problem(&text)?;
    if ov.epsilon.is_some() {
        spec.numerics.epsilon = ov.epsilon;
    }
    if ov.beta.is_some() {
        spec.numerics.beta = ov.beta;
    }
    if ov.grid.is_some() {
        spec.numerics.grid = ov.grid;
    }
    if ov.starts.is_some() {
        spec.numerics.starts = ov.starts;
    }
    if ov.seed.is_some() {
        spec.numerics.seed = ov.seed;
    }
    let built = spec.build()?;
    Ok(LoadedSpec {
        spec,
        built,
        input_hash,
    })
}

/// The coefficient path an index run analyses: `linear.B` if present,
/// otherwise the Hessian of the Hamiltonian at the origin.
pub fn index_coefficient(built: &Built) -> Result<MatrixPath> {
    if let Some(b) = &built.linear_b {
        return Ok(b.clone());
    }
    if let Some(p) = &built.problem {
        let d = p.op.dim();
        let prob = p.clone();
        return MatrixPath::from_fn(d, move |t| prob.hess_at(t, &vec![0.0; d]));
    }
    Err(Error::spec(
        "spec needs linear.B or a Hamiltonian with a Hessian at 0",
    ))
}

fn model_for(
    spec: &ProblemSpec,
    op: &OperatorSpec,
    bound: f64,
) -> Result<SpectralModel> {
    let cfg = SpectralConfig {
        epsilon: spec.numerics.epsilon,
        beta: spec.numerics.beta,
        window: spec.numerics.window,
        hessian_bound: Some(bound),
    };
    build_spectral_model(op, &cfg)
}

fn numerics_used(model: &SpectralModel, starts: Option<usize>, seed: Option<u64>) -> NumericsUsed {
    NumericsUsed {
        epsilon: model.epsilon,
        beta: model.beta,
        window: model.window,
        grid: model.quad.len(),
        starts,
        seed,
    }
}

fn index_report_json(r: &IndexReport) -> Value {
    json!({
        "i": r.i,
        "nu": r.nu,
        "route": serde_json::to_value(r.route).unwrap(),
        "anchor_int": r.anchor.1,
        "crossings": serde_json::to_value(&r.trace.crossings).unwrap(),
    })
}

/// `index` command: (i, ν) for the spec's coefficient via every applicable
/// route.
pub fn run_index(problem: &Path, out: Option<&Path>, ov: &Overrides) -> Result<RunReport> {
    let t0 = Instant::now();
    let loaded = load_spec(problem, ov)?;
    let op = &loaded.built.op;
    let b = index_coefficient(&loaded.built)?;
    let mut timings = BTreeMap::new();
    let mut warnings = Vec::new();

    let anchor = loaded
        .spec
        .numerics
        .anchor
        .map(|i0| (MatrixPath::zero(op.dim()), i0));
    let t1 = Instant::now();
    let primary = index(op, &b, anchor)?;
    timings.insert("primary_route".into(), ms_since(t1));

    let t2 = Instant::now();
    let model = model_for(&loaded.spec, op, b.supnorm().max(1.0))?;
    let null_tol = loaded.spec.numerics.null_tol.unwrap_or(QFORM_NULL_TOL);
    let qf = qform_indices(&model, &b, null_tol)?;
    timings.insert("qform_route".into(), ms_since(t2));
    let qf0 = qform_indices(&model, &MatrixPath::zero(op.dim()), null_tol)?;

    if qf.nu_beta != primary.nu {
        warnings.push(format!(
            "qform nullity {} disagrees with shooting nullity {}",
            qf.nu_beta, primary.nu
        ));
    }
    let mut routes = json!({
        "qform": {
            "i_beta": qf.i_beta,
            "nu_beta": qf.nu_beta,
            "i_beta_minus_zero": qf.i_beta - qf0.i_beta,
        }
    });
    if op.order == Order::Second {
        let scan = index::index_via_lambda_scan(op, &b)?;
        routes["lambda_scan"] = index_report_json(&scan);
        let anchored = index::index_via_homotopy(op, &b, None)?;
        routes["shooting_homotopy"] = index_report_json(&anchored);
    }
    let results = json!({
        "index": index_report_json(&primary),
        "routes": routes,
    });
    timings.insert("total".into(), ms_since(t0));
    let report = RunReport::assemble(
        "index",
        loaded.input_hash,
        numerics_used(&model, None, None),
        results,
        warnings,
        timings,
    );
    if let Some(path) = out {
        report.write(path)?;
    }
    Ok(report)
}

/// `homotopy` command: crossing trace from comparison.B0 to comparison.B1,
/// written as CSV (lambda, indicator, nullity).
pub fn run_homotopy(
    problem: &Path,
    trace_path: &Path,
    out: Option<&Path>,
    ov: &Overrides,
) -> Result<RunReport> {
    let t0 = Instant::now();
    let loaded = load_spec(problem, ov)?;
    let op = &loaded.built.op;
    let cmp = loaded
        .spec
        .comparison
        .as_ref()
        .ok_or_else(|| Error::spec("homotopy requires comparison.B0 and comparison.B1"))?;
    let d = op.dim();
    let b1 = crate::problems::matrix_path_from_entries(&cmp.b0, d)?;
    let b2 = crate::problems::matrix_path_from_entries(&cmp.b1, d)?;

    // identical endpoints are a trivial run: zero crossings
    let identical = (0..=64).all(|k| {
        let t = k as f64 / 64.0;
        (b1.eval(t) - b2.eval(t)).norm() <= 1e-13 * (1.0 + b1.supnorm())
    });
    let (sum, trace) = if identical {
        (0, index::CrossingTrace::default())
    } else {
        homotopy_nullity_sum(op, &b1, &b2)?
    };

    let mut csv = String::from("lambda,indicator,nullity\n");
    for (lam, ind) in &trace.samples {
        csv.push_str(&format!("{},{},0\n", fmt17(*lam), fmt17(*ind)));
    }
    for c in &trace.crossings {
        csv.push_str(&format!("{},{},{}\n", fmt17(c.lambda), fmt17(0.0), c.nullity));
    }
    std::fs::write(trace_path, csv)?;

    let model = model_for(&loaded.spec, op, b1.supnorm().max(b2.supnorm()).max(1.0))?;
    let results = json!({
        "sum": sum,
        "crossings": serde_json::to_value(&trace.crossings).unwrap(),
        "samples": trace.samples.len(),
        "trace_csv": trace_path.display().to_string(),
    });
    let mut timings = BTreeMap::new();
    timings.insert("total".into(), ms_since(t0));
    let report = RunReport::assemble(
        "homotopy",
        loaded.input_hash,
        numerics_used(&model, None, None),
        results,
        Vec::new(),
        timings,
    );
    if let Some(path) = out {
        report.write(path)?;
    }
    Ok(report)
}

fn critical_point_json(p: &CriticalPoint) -> Value {
    json!({
        "id": p.distinct_id,
        "value": p.value,
        "gradnorm": p.gradnorm,
        "morse_index": p.morse_index,
        "nullity": p.nullity,
        "residual": p.residual,
        "contraction_factor": p.contraction_factor,
        "coefficient_norm": p.coefficient_norm(),
        "sup_norm": p.sup_norm(),
    })
}

fn write_trajectory_csv(
    model: &SpectralModel,
    p: &CriticalPoint,
    path: &Path,
) -> Result<()> {
    let d = model.dim;
    let mut csv = String::from("t");
    for c in 0..d {
        csv.push_str(&format!(",x{}", c + 1));
    }
    csv.push('\n');
    for (q, &t) in model.quad.nodes.iter().enumerate() {
        csv.push_str(&fmt17(t));
        for c in 0..d {
            csv.push(',');
            csv.push_str(&fmt17(p.trajectory[q * d + c]));
        }
        csv.push('\n');
    }
    std::fs::write(path, csv)?;
    Ok(())
}

fn search_config(spec: &ProblemSpec, ov_starts: Option<usize>, ov_seed: Option<u64>) -> SearchConfig {
    let mut cfg = SearchConfig::default();
    if let Some(s) = spec.numerics.starts {
        cfg.starts = s;
    }
    if let Some(s) = ov_starts {
        cfg.starts = s;
    }
    if let Some(s) = spec.numerics.seed {
        cfg.seed = s;
    }
    if let Some(s) = ov_seed {
        cfg.seed = s;
    }
    if let Some(t) = spec.numerics.newton_tol {
        cfg.newton_tol = t;
    }
    if let Some(r) = spec.numerics.deflation_radius {
        cfg.deflation_radius = r;
    }
    cfg
}

fn require_problem(built: &Built) -> Result<&NonlinearProblem> {
    built
        .problem
        .as_ref()
        .ok_or_else(|| Error::spec("this command requires a hamiltonian in the spec"))
}

/// `solve` command: multi-start critical point search with trajectories
/// emitted as CSV next to the report.
pub fn run_solve(
    problem: &Path,
    out: &Path,
    ov: &Overrides,
) -> Result<RunReport> {
    let t0 = Instant::now();
    let loaded = load_spec(problem, ov)?;
    let prob = require_problem(&loaded.built)?;
    let model = model_for(&loaded.spec, &loaded.built.op, prob.hessian_bound)?;
    let cfg = search_config(&loaded.spec, ov.starts, ov.seed);
    let points = multi_start_search(&model, prob, &cfg)?;

    let mut results_points = Vec::new();
    let mut warnings = Vec::new();
    for p in &points {
        let mut v = critical_point_json(p);
        let traj_path = trajectory_path(out, p.distinct_id);
        write_trajectory_csv(&model, p, &traj_path)?;
        v["trajectory_csv"] = Value::String(traj_path.display().to_string());
        results_points.push(v);
        let rec_tail = crate::reduction::recover_solution(&model, prob, &p.ustar)?;
        if rec_tail.tail_estimate > 1e-3 {
            warnings.push(format!(
                "truncation tail estimate {:.3e} for point {}",
                rec_tail.tail_estimate, p.distinct_id
            ));
        }
    }
    let nontrivial = points
        .iter()
        .filter(|p| p.coefficient_norm() > 10.0 * cfg.deflation_radius)
        .count();
    let results = json!({
        "distinct_points": points.len(),
        "nontrivial_points": nontrivial,
        "points": results_points,
    });
    let mut timings = BTreeMap::new();
    timings.insert("total".into(), ms_since(t0));
    let report = RunReport::assemble(
        "solve",
        loaded.input_hash,
        numerics_used(&model, Some(cfg.starts), Some(cfg.seed)),
        results,
        warnings,
        timings,
    );
    report.write(out)?;
    Ok(report)
}

pub fn trajectory_path(out: &Path, id: usize) -> std::path::PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "report".into());
    out.with_file_name(format!("{stem}.traj{id}.csv"))
}

/// `verify` command with suites `consistency` and `theorem`. Returns the
/// report plus a pass flag; the CLI exits 3 when checks fail.
pub fn run_verify(
    problem: &Path,
    suite: &str,
    out: Option<&Path>,
    ov: &Overrides,
) -> Result<(RunReport, bool)> {
    let t0 = Instant::now();
    let loaded = load_spec(problem, ov)?;
    let op = &loaded.built.op;
    let mut timings = BTreeMap::new();
    let (results, pass, model) = match suite {
        "consistency" => {
            let b = index_coefficient(&loaded.built)?;
            let report = consistency_report(op, &b)?;
            let model = model_for(&loaded.spec, op, b.supnorm().max(1.0))?;
            let pass = report.pass;
            (
                json!({
                    "suite": "consistency",
                    "entries": serde_json::to_value(&report.entries).unwrap(),
                    "pass": pass,
                }),
                pass,
                model,
            )
        }
        "theorem" => {
            let prob = require_problem(&loaded.built)?;
            let model = model_for(&loaded.spec, op, prob.hessian_bound)?;
            let cfg = search_config(&loaded.spec, ov.starts, ov.seed);
            let report = verify_theorem(&model, prob, &cfg)?;
            let points: Vec<Value> = report.points.iter().map(critical_point_json).collect();
            let pass = report.pass();
            (
                json!({
                    "suite": "theorem",
                    "hypotheses": serde_json::to_value(&report.hypotheses).unwrap(),
                    "hypotheses_pass": report.hypotheses_pass,
                    "condition_iv": report.condition_iv,
                    "predicted": report.predicted,
                    "morse_at_theta": report.morse_at_theta,
                    "i_beta_b0": report.i_beta_b0,
                    "nontrivial_found": report.nontrivial_found,
                    "conclusion_pass": report.conclusion_pass,
                    "points": points,
                    "pass": pass,
                }),
                pass,
                model,
            )
        }
        other => {
            return Err(Error::spec(format!(
                "unknown suite \"{other}\" (expected consistency or theorem)"
            )))
        }
    };
    timings.insert("total".into(), ms_since(t0));
    let report = RunReport::assemble(
        "verify",
        loaded.input_hash,
        numerics_used(&model, None, None),
        results,
        Vec::new(),
        timings,
    );
    if let Some(path) = out {
        report.write(path)?;
    }
    Ok((report, pass))
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Nullity of a coefficient against an operator, exposed for the CLI
/// summary line.
pub fn quick_nullity(op: &OperatorSpec, b: &MatrixPath) -> Result<usize> {
    nullity(op, b)
}
