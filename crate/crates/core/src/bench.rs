//! Seeded benchmark runs over (problem, heuristic) pairs and their CSV
//! summary.
//!
//! A manifest has one pair per line, `<domain> <problem> <heuristic>`,
//! with paths relative to the manifest. `#` starts a comment.

use std::fmt::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use rayon::prelude::*;

use crate::engine::Engine;
use crate::heuristic::{Heuristic, HeuristicKind};
use crate::mdp::MdpConfig;
use crate::model::Problem;
use crate::solver::{solve, SolverConfig, SolverError};

/// Bumped whenever a column is added, removed or reordered.
pub const CSV_SCHEMA_VERSION: u32 = 1;

pub const CSV_COLUMNS: [&str; 9] = [
    "problem",
    "heuristic",
    "seed_count",
    "mean_time_s",
    "mean_trials",
    "converged_fraction",
    "mean_cost",
    "failures",
    "mean_mdp_init_time_s",
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub line: usize,
    pub domain: PathBuf,
    pub problem: PathBuf,
    pub heuristic: HeuristicKind,
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("manifest line {line}: {message}")]
pub struct ManifestError {
    pub line: usize,
    pub message: String,
}

pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<ManifestEntry>, ManifestError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        let [domain, problem, heuristic] = fields[..] else {
            return Err(ManifestError {
                line,
                message: format!(
                    "expected `<domain> <problem> <heuristic>`, got {} fields",
                    fields.len()
                ),
            });
        };
        let heuristic = heuristic.parse().map_err(|e: crate::heuristic::UnknownHeuristic| {
            ManifestError {
                line,
                message: e.to_string(),
            }
        })?;
        out.push(ManifestEntry {
            line,
            domain: base.join(domain),
            problem: base.join(problem),
            heuristic,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub runs: usize,
    pub base_seed: u64,
    pub solver: SolverConfig,
    pub mdp: MdpConfig,
    /// Worker threads; rayon's default pool when `None`.
    pub threads: Option<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            runs: 50,
            base_seed: 0,
            solver: SolverConfig::default(),
            mdp: MdpConfig::default(),
            threads: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub seed: u64,
    pub trials: u64,
    pub solve_time: Duration,
    pub mdp_init_time: Duration,
    pub converged: bool,
    pub mean_cost: f64,
    pub failures: usize,
}

/// One seeded solve; the seed drives the solver and the MDP phase.
pub fn run_once(
    engine: &Arc<Engine>,
    kind: HeuristicKind,
    seed: u64,
    solver: &SolverConfig,
    mdp: &MdpConfig,
) -> Result<RunResult, SolverError> {
    let h = Heuristic::new(kind, engine.clone(), seed, mdp.clone());
    let cfg = SolverConfig {
        seed,
        ..solver.clone()
    };
    let (_, stats) = solve(engine, &h, &cfg)?;
    let (mean_cost, failures) = stats
        .final_report
        .as_ref()
        .map_or((f64::NAN, 0), |r| (r.mean_cost, r.failures));
    Ok(RunResult {
        seed,
        trials: stats.trials,
        solve_time: stats.solve_time,
        mdp_init_time: h.init_time(),
        converged: stats.converged,
        mean_cost,
        failures,
    })
}

#[derive(Clone, Debug)]
pub struct PairSummary {
    pub problem: String,
    pub heuristic: HeuristicKind,
    pub seed_count: usize,
    pub mean_time_s: f64,
    pub mean_trials: f64,
    pub converged_fraction: f64,
    pub mean_cost: f64,
    pub failures: usize,
    pub mean_mdp_init_time_s: f64,
}

pub fn summarize(problem: &str, heuristic: HeuristicKind, runs: &[RunResult]) -> PairSummary {
    let n = runs.len().max(1) as f64;
    let mean = |f: &dyn Fn(&RunResult) -> f64| runs.iter().map(f).sum::<f64>() / n;
    PairSummary {
        problem: problem.to_string(),
        heuristic,
        seed_count: runs.len(),
        mean_time_s: mean(&|r| r.solve_time.as_secs_f64()),
        mean_trials: mean(&|r| r.trials as f64),
        converged_fraction: mean(&|r| if r.converged { 1.0 } else { 0.0 }),
        mean_cost: mean(&|r| r.mean_cost),
        failures: runs.iter().map(|r| r.failures).sum(),
        mean_mdp_init_time_s: mean(&|r| r.mdp_init_time.as_secs_f64()),
    }
}

/// A loaded pair ready to run.
#[derive(Clone)]
pub struct BenchPair {
    pub name: String,
    pub problem: Arc<Problem>,
    pub heuristic: HeuristicKind,
}

/// Runs every pair `config.runs` times with seeds `base_seed..`, one pair
/// per worker. Rows keep the input order.
pub fn run_benchmark(
    pairs: &[BenchPair],
    config: &BenchConfig,
) -> Result<Vec<PairSummary>, BenchError> {
    match config.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build()?;
            pool.install(|| run_pairs(pairs, config))
        }
        None => run_pairs(pairs, config),
    }
}

fn run_pairs(pairs: &[BenchPair], config: &BenchConfig) -> Result<Vec<PairSummary>, BenchError> {
    pairs
        .par_iter()
        .map(|pair| {
            let engine = Arc::new(Engine::new(pair.problem.clone()));
            let runs = (0..config.runs as u64)
                .map(|i| {
                    run_once(
                        &engine,
                        pair.heuristic,
                        config.base_seed + i,
                        &config.solver,
                        &config.mdp,
                    )
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(summarize(&pair.name, pair.heuristic, &runs))
        })
        .collect()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else if v.is_nan() {
        "nan".into()
    } else {
        "inf".into()
    }
}

/// CSV with a header row. With `omit_timing` the wall-clock columns are
/// left empty so that repeated runs compare byte for byte.
pub fn write_csv(rows: &[PairSummary], omit_timing: bool) -> String {
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    let time = |v: f64| if omit_timing { String::new() } else { number(v) };
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            csv_field(&r.problem),
            r.heuristic,
            r.seed_count,
            time(r.mean_time_s),
            number(r.mean_trials),
            number(r.converged_fraction),
            number(r.mean_cost),
            r.failures,
            time(r.mean_mdp_init_time_s),
        )
        .unwrap();
    }
    out
}
