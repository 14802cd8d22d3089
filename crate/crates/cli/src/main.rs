use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use beliefplan::bench::{self, BenchConfig, BenchPair, CSV_SCHEMA_VERSION};
use beliefplan::engine::Engine;
use beliefplan::generators::{localize, maze, minefield, trap, wumpus, Generated};
use beliefplan::heuristic::{Heuristic, HeuristicKind};
use beliefplan::mdp::MdpConfig;
use beliefplan::oracle::{self, OracleError};
use beliefplan::parser::load_problem;
use beliefplan::solver::{solve, SolverConfig};
use beliefplan::table_io::{problem_hash, write_entries, write_table, TableHeader};
use beliefplan::Problem;

const THREADS_ENV: &str = "BELIEFPLAN_THREADS";

#[derive(Parser)]
#[command(name = "beliefplan", version, about = "RTDP over beliefs for goal POMDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and ground a problem, print |P|, |A| and |S|.
    Validate {
        domain: PathBuf,
        problem: PathBuf,
        /// Give up counting reachable states beyond this many.
        #[arg(long, default_value_t = 1_000_000)]
        state_cap: usize,
    },
    /// Solve one problem and print a CSV summary row.
    Solve(SolveArgs),
    /// Run every manifest pair several times and write a CSV summary.
    ///
    /// Columns (schema 1): problem, heuristic, seed_count, mean_time_s,
    /// mean_trials, converged_fraction, mean_cost, failures,
    /// mean_mdp_init_time_s.
    Benchmark {
        manifest: PathBuf,
        #[arg(long, default_value_t = 50)]
        runs: usize,
        /// Defaults to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        base_seed: u64,
        /// Worker threads; defaults to $BELIEFPLAN_THREADS, then the CPU count.
        #[arg(long)]
        threads: Option<usize>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Write a generated domain/problem pair into a directory.
    Generate {
        #[arg(value_enum)]
        family: Family,
        #[arg(long, default_value_t = 5)]
        n: usize,
        /// Localize: moves in the lower half of the grid may fail.
        #[arg(long)]
        stochastic: bool,
        /// Wumpus: skewed hazard prior.
        #[arg(long)]
        nonuniform: bool,
        /// Maze: number of bottlenecks.
        #[arg(long, default_value_t = 1)]
        bottlenecks: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Enumerate all reachable beliefs and compute exact optimal values.
    Oracle {
        domain: PathBuf,
        problem: PathBuf,
        #[arg(long, default_value_t = oracle::DEFAULT_CAP)]
        cap: usize,
        /// Write every enumerated belief and its value in value-table format.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Localize,
    Wumpus,
    Maze,
    Minefield,
    Trap,
}

#[derive(Args)]
struct SolveArgs {
    domain: PathBuf,
    problem: PathBuf,
    #[arg(long, value_parser = parse_heuristic)]
    heuristic: HeuristicKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the learned value table here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with status 3 if the run does not converge.
    #[arg(long)]
    strict: bool,
    /// Also solve exactly (up to this many beliefs) and report how far the
    /// final policy is from the optimum.
    #[arg(long)]
    oracle_cap: Option<usize>,
    /// Omit the CSV header line.
    #[arg(long)]
    no_header: bool,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct RunArgs {
    /// Seconds of trial time, evaluation excluded.
    #[arg(long, default_value_t = 300.0)]
    time_limit: f64,
    #[arg(long)]
    max_trials: Option<u64>,
    #[arg(long, default_value_t = 50)]
    eval_interval: u64,
    /// Probability levels for belief keys; exact keys when absent.
    #[arg(long)]
    discretize: Option<u32>,
    /// Runs of the final policy evaluation.
    #[arg(long, default_value_t = 1000)]
    final_runs: usize,
    /// Leave wall-clock columns empty so repeated runs compare byte for byte.
    #[arg(long)]
    omit_timing: bool,
}

impl RunArgs {
    fn solver_config(&self) -> anyhow::Result<SolverConfig> {
        if !(self.time_limit >= 0.0 && self.time_limit.is_finite()) {
            return Err(anyhow!("--time-limit must be a non-negative number"));
        }
        if self.eval_interval == 0 {
            return Err(anyhow!("--eval-interval must be positive"));
        }
        if self.discretize == Some(0) {
            return Err(anyhow!("--discretize must be positive"));
        }
        Ok(SolverConfig {
            time_limit: Duration::from_secs_f64(self.time_limit),
            max_trials: self.max_trials,
            eval_interval: self.eval_interval,
            discretization: self.discretize,
            final_runs: self.final_runs,
            ..SolverConfig::default()
        })
    }
}

fn parse_heuristic(s: &str) -> Result<HeuristicKind, String> {
    s.parse().map_err(|e: beliefplan::heuristic::UnknownHeuristic| e.to_string())
}

enum Failure {
    Input(anyhow::Error),
    Cap(anyhow::Error),
    NotConverged,
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

type Outcome = Result<(), Failure>;

fn load(domain: &Path, problem: &Path) -> anyhow::Result<Arc<Problem>> {
    Ok(Arc::new(load_problem(domain, problem)?))
}

fn write_output(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
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

fn validate(domain: &Path, problem: &Path, state_cap: usize) -> Outcome {
    let p = load(domain, problem)?;
    let engine = Engine::new(p.clone());
    println!("problem {}", p.name);
    println!("facts {}", p.num_facts() / 2);
    println!("fixed {}", p.fixed_facts.len());
    println!("actions {}", p.actions.len());
    let b0 = p.initial_belief().map_err(|e| anyhow!("{e}"))?;
    println!("initial states {}", b0.len());
    match oracle::reachable_states(&engine, state_cap) {
        Ok(states) => println!("states {}", states.len()),
        Err(OracleError::CapExceeded(n)) => println!("states >{n}"),
    }
    Ok(())
}

fn solve_cmd(args: &SolveArgs) -> Outcome {
    let p = load(&args.domain, &args.problem)?;
    let cfg = SolverConfig {
        seed: args.seed,
        ..args.run.solver_config()?
    };
    let engine = Arc::new(Engine::new(p.clone()));
    let h = Heuristic::new(args.heuristic, engine.clone(), args.seed, MdpConfig::default());
    let (table, stats) = solve(&engine, &h, &cfg).map_err(|e| anyhow!("{e}"))?;
    info!(
        "{} trials, {} evaluations, stopped by {:?}",
        stats.trials, stats.evaluations, stats.stop
    );
    if let Some(path) = &args.out {
        let header = TableHeader {
            problem_hash: problem_hash(&p),
            heuristic: args.heuristic.to_string(),
            seed: args.seed,
            discretization: cfg.discretization,
        };
        fs::write(path, write_table(&table, &header))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let (mean_cost, failures) = stats
        .final_report
        .as_ref()
        .map_or((f64::NAN, 0), |r| (r.mean_cost, r.failures));
    let time = |d: Duration| {
        if args.run.omit_timing {
            String::new()
        } else {
            number(d.as_secs_f64())
        }
    };
    let mut out = String::new();
    if !args.no_header {
        out.push_str(
            "problem,heuristic,seed,trials,solve_time_s,mdp_init_time_s,converged,mean_cost,failures\n",
        );
    }
    writeln!(
        out,
        "{},{},{},{},{},{},{},{},{}",
        p.name,
        args.heuristic,
        args.seed,
        stats.trials,
        time(stats.solve_time),
        time(h.init_time()),
        stats.converged,
        number(mean_cost),
        failures
    )
    .unwrap();
    print!("{out}");

    if let Some(cap) = args.oracle_cap {
        let idx = oracle::enumerate_beliefs(&engine, cap)
            .map_err(|e| Failure::Cap(anyhow!("oracle: {e}")))?;
        let ex = oracle::exact_values(&idx, 1e-10);
        let gap = oracle::optimality_gap(mean_cost, ex.values[0], cfg.convergence_threshold);
        eprintln!(
            "{}: mean cost {} against optimum {} (gap {}, relative {})",
            if gap.suboptimal { "suboptimal" } else { "optimal" },
            number(gap.achieved),
            number(gap.optimum),
            number(gap.gap),
            number(gap.relative)
        );
    }
    if args.strict && !stats.converged {
        return Err(Failure::NotConverged);
    }
    Ok(())
}

fn thread_count(flag: Option<usize>) -> anyhow::Result<Option<usize>> {
    let n = match (flag, std::env::var(THREADS_ENV)) {
        (Some(n), _) => n,
        (None, Ok(v)) => v
            .trim()
            .parse()
            .map_err(|_| anyhow!("{THREADS_ENV} must be a number, got `{v}`"))?,
        (None, Err(_)) => return Ok(None),
    };
    if n == 0 {
        return Err(anyhow!("thread count must be positive"));
    }
    Ok(Some(n))
}

fn benchmark(
    manifest: &Path,
    runs: usize,
    out: Option<&Path>,
    base_seed: u64,
    threads: Option<usize>,
    run: &RunArgs,
) -> Outcome {
    let text = fs::read_to_string(manifest)
        .with_context(|| format!("reading {}", manifest.display()))?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let entries = bench::parse_manifest(&text, base).map_err(|e| anyhow!("{}: {e}", manifest.display()))?;
    let mut pairs = Vec::with_capacity(entries.len());
    for e in &entries {
        let problem = load(&e.domain, &e.problem)?;
        pairs.push(BenchPair {
            name: problem.name.clone(),
            problem,
            heuristic: e.heuristic,
        });
    }
    let config = BenchConfig {
        runs,
        base_seed,
        solver: run.solver_config()?,
        mdp: MdpConfig::default(),
        threads: thread_count(threads)?,
    };
    info!("csv schema {CSV_SCHEMA_VERSION}, {} pairs x {runs} runs", pairs.len());
    let rows = bench::run_benchmark(&pairs, &config).map_err(|e| anyhow!("{e}"))?;
    write_output(out, &bench::write_csv(&rows, run.omit_timing))?;
    Ok(())
}

fn generate(
    family: Family,
    n: usize,
    stochastic: bool,
    nonuniform: bool,
    bottlenecks: usize,
    out: &Path,
) -> Outcome {
    let g: Generated = match family {
        Family::Localize => localize::generate(n, stochastic),
        Family::Wumpus => wumpus::generate(n, !nonuniform),
        Family::Maze => maze::generate(n, bottlenecks),
        Family::Minefield => Ok(minefield::generate()),
        Family::Trap => Ok(trap::generate()),
    }
    .map_err(|e| anyhow!("{e}"))?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let d = out.join(format!("{}.ppond", g.name));
    let p = out.join(format!("{}.ppondp", g.name));
    fs::write(&d, &g.domain).with_context(|| format!("writing {}", d.display()))?;
    fs::write(&p, &g.problem).with_context(|| format!("writing {}", p.display()))?;
    println!("{}", d.display());
    println!("{}", p.display());
    Ok(())
}

fn oracle_cmd(domain: &Path, problem: &Path, cap: usize, out: Option<&Path>) -> Outcome {
    let p = load(domain, problem)?;
    let engine = Engine::new(p.clone());
    let idx = oracle::enumerate_beliefs(&engine, cap).map_err(|e| Failure::Cap(anyhow!("{e}")))?;
    let ex = oracle::exact_values(&idx, 1e-10);
    println!("beliefs {}", idx.len());
    println!("value {}", number(ex.values[0]));
    if let Some(path) = out {
        let mut entries: Vec<_> = idx.keys.iter().zip(ex.values.iter().copied()).collect();
        entries.sort_by(|a, b| a.0.cmp(b.0));
        let header = TableHeader {
            problem_hash: problem_hash(&p),
            heuristic: "oracle".into(),
            seed: 0,
            discretization: None,
        };
        fs::write(path, write_entries(&header, &entries))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Validate {
            domain,
            problem,
            state_cap,
        } => validate(&domain, &problem, state_cap),
        Command::Solve(args) => solve_cmd(&args),
        Command::Benchmark {
            manifest,
            runs,
            out,
            base_seed,
            threads,
            run,
        } => benchmark(&manifest, runs, out.as_deref(), base_seed, threads, &run),
        Command::Generate {
            family,
            n,
            stochastic,
            nonuniform,
            bottlenecks,
            out,
        } => generate(family, n, stochastic, nonuniform, bottlenecks, &out),
        Command::Oracle {
            domain,
            problem,
            cap,
            out,
        } => oracle_cmd(&domain, &problem, cap, out.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // usage errors are input errors; exit status 2 is reserved for caps
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Cap(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::NotConverged) => {
            eprintln!("error: did not converge");
            ExitCode::from(3)
        }
    }
}
