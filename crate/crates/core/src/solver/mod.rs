//! RTDP over beliefs.
//!
//! Each trial samples a hidden start state, acts greedily on the current
//! values while backing up every visited belief, and after the state
//! reaches the goal backs up the trajectory again in reverse. Unseen
//! beliefs take their value from the heuristic.

pub mod eval;
pub mod table;

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::engine::{Engine, EngineError};
use crate::heuristic::Heuristic;
use crate::model::{ActionId, BeliefKey, BeliefState};
pub use eval::{evaluate_policy, ConvergenceMonitor, EvalMode, PolicyEvalReport};
pub use table::BeliefValueTable;

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub seed: u64,
    /// Solver time, excluding policy evaluation.
    pub time_limit: Duration,
    pub max_trials: Option<u64>,
    /// Trials between convergence evaluations.
    pub eval_interval: u64,
    pub trial_step_cap: usize,
    pub eval_step_cap: usize,
    pub convergence_threshold: f64,
    pub required_streak: usize,
    pub discretization: Option<u32>,
    /// Runs of the evaluation after solving; 0 skips it.
    pub final_runs: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            seed: 0,
            time_limit: Duration::from_secs(300),
            max_trials: None,
            eval_interval: 50,
            trial_step_cap: 10_000,
            eval_step_cap: 500,
            convergence_threshold: 0.01,
            required_streak: 5,
            discretization: None,
            final_runs: 1000,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("no applicable action in belief {key}")]
    DeadEnd { key: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrialRecord {
    pub trajectory: Vec<BeliefKey>,
    pub steps: usize,
    pub reached_goal: bool,
    /// Position of the sampling stream when the trial started.
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    TimeLimit,
    TrialBudget,
}

#[derive(Clone, Debug)]
pub struct SolveStats {
    pub trials: u64,
    /// Wall time spent in trials.
    pub solve_time: Duration,
    pub eval_time: Duration,
    pub converged: bool,
    pub stop: StopReason,
    pub evaluations: usize,
    pub aborted_trials: u64,
    pub final_report: Option<PolicyEvalReport>,
}

fn describe(b: &BeliefState) -> String {
    let parts: Vec<String> = b
        .support()
        .iter()
        .map(|(s, p)| format!("{}:{p}", s.to_hex()))
        .collect();
    parts.join(";")
}

/// Greedy action at `b` with its Q-value; successor values are read from
/// the table, which initializes missing entries from the heuristic.
/// Ties go to the lowest action id.
pub fn greedy_action(
    b: &BeliefState,
    table: &mut BeliefValueTable,
    h: &Heuristic,
    engine: &Engine,
) -> Result<(ActionId, f64), SolverError> {
    let mut best: Option<(ActionId, f64)> = None;
    for a in engine.applicable_actions(b) {
        let mut q = engine.problem().action(a).cost;
        for br in engine.branches(b, a) {
            q += br.probability * table.value_or_init(&br.belief, h, engine);
        }
        if best.map_or(true, |(_, v)| q < v) {
            best = Some((a, q));
        }
    }
    best.ok_or_else(|| SolverError::DeadEnd { key: describe(b) })
}

/// One forward trial from a start state drawn from `b0`, then the
/// backward pass. A trial that hits the step cap skips the backward pass.
pub fn run_trial(
    b0: &BeliefState,
    table: &mut BeliefValueTable,
    h: &Heuristic,
    engine: &Engine,
    rng: &mut ChaCha8Rng,
    step_cap: usize,
) -> Result<TrialRecord, SolverError> {
    let seed = rng.get_word_pos() as u64;
    let mut s = engine.sample_state(b0, rng).clone();
    let mut b = b0.clone();
    let mut path: Vec<BeliefState> = Vec::new();
    let problem = engine.problem();
    while !problem.is_goal_state(&s) {
        if path.len() >= step_cap {
            return Ok(TrialRecord {
                trajectory: path.iter().map(|x| table.key(x)).collect(),
                steps: path.len(),
                reached_goal: false,
                seed,
            });
        }
        let (a, q) = greedy_action(&b, table, h, engine)?;
        table.set(&b, q);
        let (s2, o) = engine.sample_transition(&s, a, rng)?;
        let next = engine.update_belief(&b, a, o)?;
        path.push(std::mem::replace(&mut b, next));
        s = s2;
    }
    for x in path.iter().rev() {
        let (_, q) = greedy_action(x, table, h, engine)?;
        table.set(x, q);
    }
    Ok(TrialRecord {
        trajectory: path.iter().map(|x| table.key(x)).collect(),
        steps: path.len(),
        reached_goal: true,
        seed,
    })
}

/// Runs trials until the greedy policy's evaluated cost stabilizes, the
/// time limit passes or the trial budget is spent.
pub fn solve(
    engine: &Engine,
    h: &Heuristic,
    config: &SolverConfig,
) -> Result<(BeliefValueTable, SolveStats), SolverError> {
    let table = BeliefValueTable::new(config.discretization);
    solve_from(engine, h, config, table)
}

/// As [`solve`], continuing from an existing table.
pub fn solve_from(
    engine: &Engine,
    h: &Heuristic,
    config: &SolverConfig,
    mut table: BeliefValueTable,
) -> Result<(BeliefValueTable, SolveStats), SolverError> {
    let b0 = engine
        .problem()
        .initial_belief()
        .expect("validated problem has an initial belief");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut monitor = ConvergenceMonitor::new(config.convergence_threshold, config.required_streak);
    let mut trials = 0u64;
    let mut aborted = 0u64;
    let mut solve_time = Duration::ZERO;
    let mut eval_time = Duration::ZERO;
    let mut evaluations = 0;
    let stop = loop {
        if solve_time >= config.time_limit {
            break StopReason::TimeLimit;
        }
        if config.max_trials.is_some_and(|m| trials >= m) {
            break StopReason::TrialBudget;
        }
        let t = Instant::now();
        let rec = run_trial(&b0, &mut table, h, engine, &mut rng, config.trial_step_cap)?;
        solve_time += t.elapsed();
        trials += 1;
        if !rec.reached_goal {
            aborted += 1;
        }
        if trials % config.eval_interval.max(1) == 0 {
            let t = Instant::now();
            let r = evaluate_policy(
                &table,
                h,
                engine,
                &b0,
                EvalMode::Convergence,
                config.eval_step_cap,
                config.seed,
            );
            eval_time += t.elapsed();
            evaluations += 1;
            log::debug!(
                "trial {trials}: mean {:.4} failures {} streak {}",
                r.mean_cost,
                r.failures,
                monitor.streak()
            );
            if monitor.observe(&r) {
                break StopReason::Converged;
            }
        }
    };
    let final_report = (config.final_runs > 0).then(|| {
        let t = Instant::now();
        let r = evaluate_policy(
            &table,
            h,
            engine,
            &b0,
            EvalMode::Runs(config.final_runs),
            config.eval_step_cap,
            config.seed,
        );
        eval_time += t.elapsed();
        r
    });
    Ok((
        table,
        SolveStats {
            trials,
            solve_time,
            eval_time,
            converged: stop == StopReason::Converged,
            stop,
            evaluations,
            aborted_trials: aborted,
            final_report,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::minefield;
    use crate::heuristic::HeuristicKind;
    use crate::mdp::MdpConfig;
    use std::sync::Arc;

    fn setup(kind: HeuristicKind) -> (Arc<Engine>, Heuristic) {
        let e = Arc::new(Engine::new(Arc::new(minefield::problem())));
        let h = Heuristic::new(kind, e.clone(), 0, MdpConfig::default());
        (e, h)
    }

    #[test]
    fn greedy_prefers_sensing_on_minefield() {
        let (e, h) = setup(HeuristicKind::HffB);
        let b0 = e.problem().initial_belief().unwrap();
        let mut t = BeliefValueTable::new(None);
        let (a, q) = greedy_action(&b0, &mut t, &h, &e).unwrap();
        assert_eq!(e.problem().action(a).name, "sense-safe");
        assert_eq!(q, 3.5);
    }

    #[test]
    fn trial_lengths_follow_the_hidden_world() {
        let (e, h) = setup(HeuristicKind::HffB);
        let b0 = e.problem().initial_belief().unwrap();
        let mut t = BeliefValueTable::new(None);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..20 {
            let r = run_trial(&b0, &mut t, &h, &e, &mut rng, 100).unwrap();
            assert!(r.reached_goal);
            seen.insert(r.steps);
        }
        assert_eq!(seen.into_iter().collect::<Vec<_>>(), vec![2, 5]);
    }

    #[test]
    fn minefield_converges_to_optimum() {
        for kind in [HeuristicKind::HffB, HeuristicKind::Flat] {
            let (e, h) = setup(kind);
            let cfg = SolverConfig {
                eval_interval: 5,
                ..Default::default()
            };
            let (table, stats) = solve(&e, &h, &cfg).unwrap();
            assert!(stats.converged, "{kind}");
            let b0 = e.problem().initial_belief().unwrap();
            assert!((table.get(&b0).unwrap() - 3.5).abs() < 1e-6, "{kind}");
            let r = stats.final_report.unwrap();
            assert_eq!(r.failures, 0);
            assert!((r.mean_cost - 3.5).abs() < 0.05);
        }
    }

    #[test]
    fn zero_time_limit_runs_no_trials() {
        let (e, h) = setup(HeuristicKind::Flat);
        let cfg = SolverConfig {
            time_limit: Duration::ZERO,
            final_runs: 0,
            ..Default::default()
        };
        let (_, stats) = solve(&e, &h, &cfg).unwrap();
        assert_eq!(stats.trials, 0);
        assert!(!stats.converged);
        assert_eq!(stats.stop, StopReason::TimeLimit);
    }
}
