//! Command-line interface.
//!
//! Subcommands: `index`, `homotopy`, `solve`, `verify`. Exit codes: 0 on
//! success, 1 on spec errors, 2 on numerical failures, 3 when a verify
//! suite reports failing checks. HAMINDEX_THREADS caps the worker count.

use clap::{Args, Parser, Subcommand};
use hamindex::report::{self, Overrides};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "hamindex",
    version,
    about = "Index theory and saddle-point reduction for Hamiltonian boundary value problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Problem spec (JSON) path.
    #[arg(long)]
    problem: PathBuf,
    /// Report output path (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the spectral shift ε.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Override the splitting level β.
    #[arg(long)]
    beta: Option<f64>,
    /// Override the quadrature grid size.
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute (index, nullity) of the spec's coefficient via all
    /// applicable routes.
    Index {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Trace the nullity crossings of the homotopy from comparison.B0 to
    /// comparison.B1 and write them as CSV.
    Homotopy {
        #[command(flatten)]
        common: CommonArgs,
        /// Crossing trace CSV path.
        #[arg(long)]
        trace: PathBuf,
    },
    /// Multi-start critical point search for the spec's Hamiltonian.
    Solve {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of random starts.
        #[arg(long)]
        starts: Option<usize>,
        /// RNG seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a verification suite ("consistency" or "theorem").
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        suite: String,
        #[arg(long)]
        starts: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn overrides(common: &CommonArgs, starts: Option<usize>, seed: Option<u64>) -> Overrides {
    Overrides {
        epsilon: common.epsilon,
        beta: common.beta,
        grid: common.grid,
        starts,
        seed,
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("HAMINDEX_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Index { common } => {
            report::run_index(&common.problem, common.out.as_deref(), &overrides(common, None, None))
                .map(|r| {
                    println!(
                        "index: i = {}, nu = {} (route {})",
                        r.results["index"]["i"], r.results["index"]["nu"], r.results["index"]["route"]
                    );
                    0
                })
        }
        Command::Homotopy { common, trace } => report::run_homotopy(
            &common.problem,
            trace,
            common.out.as_deref(),
            &overrides(common, None, None),
        )
        .map(|r| {
            println!(
                "homotopy: sum = {}, crossings = {}, trace = {}",
                r.results["sum"],
                r.results["crossings"].as_array().map(|a| a.len()).unwrap_or(0),
                trace.display()
            );
            0
        }),
        Command::Solve {
            common,
            starts,
            seed,
        } => {
            let out = match &common.out {
                Some(o) => o.clone(),
                None => {
                    eprintln!("solve requires --out");
                    return ExitCode::from(1);
                }
            };
            report::run_solve(&common.problem, &out, &overrides(common, *starts, *seed)).map(|r| {
                println!(
                    "solve: {} distinct points ({} nontrivial), report = {}",
                    r.results["distinct_points"], r.results["nontrivial_points"],
                    out.display()
                );
                0
            })
        }
        Command::Verify {
            common,
            suite,
            starts,
            seed,
        } => report::run_verify(
            &common.problem,
            suite,
            common.out.as_deref(),
            &overrides(common, *starts, *seed),
        )
        .map(|(r, pass)| {
            println!(
                "verify[{suite}]: {}",
                if pass { "all checks pass" } else { "FAILURES" }
            );
            if let Some(entries) = r.results.get("entries").and_then(|e| e.as_array()) {
                for e in entries {
                    println!(
                        "  {} {}: {} vs {}",
                        if e["pass"].as_bool().unwrap_or(false) { "pass" } else { "FAIL" },
                        e["name"].as_str().unwrap_or("?"),
                        e["lhs"],
                        e["rhs"]
                    );
                }
            }
            if let Some(items) = r.results.get("hypotheses").and_then(|e| e.as_array()) {
                for e in items {
                    println!(
                        "  {} {} {}",
                        if e["pass"].as_bool().unwrap_or(false) { "pass" } else { "FAIL" },
                        e["name"].as_str().unwrap_or("?"),
                        e["detail"].as_str().unwrap_or("")
                    );
                }
            }
            if pass {
                0
            } else {
                3
            }
        }),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
