//! Policy evaluation and convergence detection.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::table::BeliefValueTable;
use crate::engine::{sample_support, Engine};
use crate::heuristic::Heuristic;
use crate::model::{ActionId, BeliefKey, BeliefState, State};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMode {
    /// One run per initial state, or 100 runs when there are fewer than
    /// 100 initial states.
    Convergence,
    /// 1000 runs.
    Final,
    Runs(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyEvalReport {
    /// Probability-weighted mean cost of the runs that reached the goal;
    /// ∞ when none did.
    pub mean_cost: f64,
    /// Runs that exceeded the step cap or hit a belief without actions.
    pub failures: usize,
    pub iterations: usize,
    pub costs: Vec<f64>,
}

/// Starting states and their weights. Starts are placed at the midpoints
/// of `n` equal slices of the cumulative distribution of `b0`, so the
/// start mix matches `b0` up to rounding instead of sampling noise.
pub fn planned_starts(b0: &BeliefState, mode: EvalMode) -> Vec<(State, f64)> {
    let n = match mode {
        EvalMode::Convergence if b0.len() >= 100 => {
            return b0.support().to_vec();
        }
        EvalMode::Convergence => 100,
        EvalMode::Final => 1000,
        EvalMode::Runs(n) => n.max(1),
    };
    (0..n)
        .map(|k| {
            let u = (k as f64 + 0.5) / n as f64;
            (sample_support(b0, u).clone(), 1.0 / n as f64)
        })
        .collect()
}

/// Greedy action under `table`, reading the heuristic for missing
/// entries. `None` when no action is applicable.
pub fn policy_action(
    b: &BeliefState,
    table: &BeliefValueTable,
    h: &Heuristic,
    engine: &Engine,
) -> Option<(ActionId, f64)> {
    let mut best: Option<(ActionId, f64)> = None;
    for a in engine.applicable_actions(b) {
        let mut q = engine.problem().action(a).cost;
        for br in engine.branches(b, a) {
            q += br.probability * table.value_or_heuristic(&br.belief, h, engine);
        }
        if best.map_or(true, |(_, v)| q < v) {
            best = Some((a, q));
        }
    }
    best
}

/// Runs the greedy policy of `table` from planned starts. The table is
/// not modified; `seed` fixes the transition samples so that successive
/// evaluations compare policies on the same random numbers.
pub fn evaluate_policy(
    table: &BeliefValueTable,
    h: &Heuristic,
    engine: &Engine,
    b0: &BeliefState,
    mode: EvalMode,
    step_cap: usize,
    seed: u64,
) -> PolicyEvalReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    let starts = planned_starts(b0, mode);
    let mut policy: HashMap<BeliefKey, Option<ActionId>> = HashMap::new();
    let mut costs = Vec::with_capacity(starts.len());
    let mut failures = 0;
    let (mut weighted, mut weight) = (0.0, 0.0);
    for (s0, w) in &starts {
        let mut s = s0.clone();
        let mut b = b0.clone();
        let mut cost = 0.0;
        let mut steps = 0;
        let mut failed = false;
        while !engine.belief_is_goal(&b) {
            if steps >= step_cap {
                failed = true;
                break;
            }
            let a = *policy
                .entry(table.key(&b))
                .or_insert_with(|| policy_action(&b, table, h, engine).map(|(a, _)| a));
            let Some(a) = a else {
                failed = true;
                break;
            };
            cost += engine.problem().action(a).cost;
            let (s2, o) = engine
                .sample_transition(&s, a, &mut rng)
                .expect("action applicable in the belief is applicable in its states");
            b = engine
                .update_belief(&b, a, o)
                .expect("observation of a sampled successor has positive probability");
            s = s2;
            steps += 1;
        }
        costs.push(cost);
        if failed {
            failures += 1;
        } else {
            weighted += w * cost;
            weight += w;
        }
    }
    PolicyEvalReport {
        mean_cost: if weight > 0.0 {
            weighted / weight
        } else {
            f64::INFINITY
        },
        failures,
        iterations: starts.len(),
        costs,
    }
}

/// Declares convergence after `required_streak` consecutive evaluations
/// without failures whose mean moved by at most `threshold` relative to
/// the evaluation before.
#[derive(Clone, Debug)]
pub struct ConvergenceMonitor {
    pub threshold: f64,
    pub required_streak: usize,
    last: Option<f64>,
    streak: usize,
    pub history: Vec<(f64, usize)>,
}

impl ConvergenceMonitor {
    pub fn new(threshold: f64, required_streak: usize) -> Self {
        ConvergenceMonitor {
            threshold,
            required_streak,
            last: None,
            streak: 0,
            history: Vec::new(),
        }
    }

    pub fn streak(&self) -> usize {
        self.streak
    }

    pub fn observe(&mut self, r: &PolicyEvalReport) -> bool {
        self.history.push((r.mean_cost, r.failures));
        let stable = match self.last {
            Some(prev) if r.failures == 0 && r.mean_cost.is_finite() => {
                let scale = prev.abs().max(1e-12);
                (r.mean_cost - prev).abs() / scale <= self.threshold
                    || (r.mean_cost == 0.0 && prev == 0.0)
            }
            _ => false,
        };
        self.streak = if stable { self.streak + 1 } else { 0 };
        self.last = (r.failures == 0 && r.mean_cost.is_finite()).then_some(r.mean_cost);
        self.converged()
    }

    pub fn converged(&self) -> bool {
        self.streak >= self.required_streak
    }
}
