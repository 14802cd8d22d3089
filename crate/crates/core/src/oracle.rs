//! Exact solution of small problems: enumerate every reachable belief and
//! run value iteration over the resulting finite MDP.

use std::collections::{HashMap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::engine::{sample_support, Engine, ObsSignature};
use crate::model::{belief_key, ActionId, BeliefKey, BeliefState, State};

pub const DEFAULT_CAP: usize = 200_000;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("more than {0} reachable beliefs")]
    CapExceeded(usize),
}

#[derive(Clone, Debug)]
pub struct Edge {
    pub action: ActionId,
    pub cost: f64,
    /// (observation, probability, successor index)
    pub branches: Vec<(ObsSignature, f64, usize)>,
}

#[derive(Clone, Debug)]
pub struct BeliefSpaceIndex {
    pub beliefs: Vec<BeliefState>,
    pub keys: Vec<BeliefKey>,
    pub index: HashMap<BeliefKey, usize>,
    /// Applicable actions per belief; empty for goal beliefs.
    pub edges: Vec<Vec<Edge>>,
    pub goal: Vec<bool>,
}

impl BeliefSpaceIndex {
    pub fn len(&self) -> usize {
        self.beliefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beliefs.is_empty()
    }

    pub fn lookup(&self, b: &BeliefState) -> Option<usize> {
        self.index.get(&belief_key(b, None)).copied()
    }
}

/// Breadth-first enumeration from the initial belief. Goal beliefs are
/// absorbing and not expanded.
pub fn enumerate_beliefs(engine: &Engine, cap: usize) -> Result<BeliefSpaceIndex, OracleError> {
    let b0 = engine
        .problem()
        .initial_belief()
        .expect("validated problem has an initial belief");
    let mut idx = BeliefSpaceIndex {
        beliefs: Vec::new(),
        keys: Vec::new(),
        index: HashMap::new(),
        edges: Vec::new(),
        goal: Vec::new(),
    };
    let intern = |idx: &mut BeliefSpaceIndex, b: BeliefState| -> Result<(usize, bool), OracleError> {
        let k = belief_key(&b, None);
        if let Some(&i) = idx.index.get(&k) {
            return Ok((i, false));
        }
        if idx.beliefs.len() >= cap {
            return Err(OracleError::CapExceeded(cap));
        }
        let i = idx.beliefs.len();
        idx.goal.push(engine.belief_is_goal(&b));
        idx.index.insert(k.clone(), i);
        idx.keys.push(k);
        idx.beliefs.push(b);
        idx.edges.push(Vec::new());
        Ok((i, true))
    };
    let mut queue = VecDeque::new();
    queue.push_back(intern(&mut idx, b0)?.0);
    while let Some(i) = queue.pop_front() {
        if idx.goal[i] {
            continue;
        }
        let b = idx.beliefs[i].clone();
        let mut edges = Vec::new();
        for a in engine.applicable_actions(&b) {
            let mut branches = Vec::new();
            for br in engine.branches(&b, a) {
                let (j, fresh) = intern(&mut idx, br.belief)?;
                if fresh {
                    queue.push_back(j);
                }
                branches.push((br.observation, br.probability, j));
            }
            edges.push(Edge {
                action: a,
                cost: engine.problem().action(a).cost,
                branches,
            });
        }
        idx.edges[i] = edges;
    }
    Ok(idx)
}

/// States reachable in the underlying MDP from the support of b0.
pub fn reachable_states(engine: &Engine, cap: usize) -> Result<Vec<State>, OracleError> {
    let b0 = engine
        .problem()
        .initial_belief()
        .expect("validated problem has an initial belief");
    let mut seen: HashMap<State, usize> = HashMap::new();
    let mut order: Vec<State> = Vec::new();
    let mut queue = VecDeque::new();
    for s in b0.states() {
        if !seen.contains_key(s) {
            seen.insert(s.clone(), order.len());
            order.push(s.clone());
            queue.push_back(s.clone());
        }
    }
    while let Some(s) = queue.pop_front() {
        if engine.problem().is_goal_state(&s) {
            continue;
        }
        for a in engine.applicable_in_state(&s) {
            for t in engine.transitions(&s, a).iter() {
                if !seen.contains_key(&t.successor) {
                    if order.len() >= cap {
                        return Err(OracleError::CapExceeded(cap));
                    }
                    seen.insert(t.successor.clone(), order.len());
                    order.push(t.successor.clone());
                    queue.push_back(t.successor.clone());
                }
            }
        }
    }
    Ok(order)
}

#[derive(Clone, Debug)]
pub struct ExactValues {
    pub values: Vec<f64>,
    /// Greedy action per belief (lowest id on ties); `None` for goal
    /// beliefs and beliefs with infinite value.
    pub policy: Vec<Option<ActionId>>,
    pub residual: f64,
    pub sweeps: usize,
}

/// Beliefs from which some policy reaches a goal belief with probability 1,
/// and for each belief the actions that stay inside that set.
fn almost_sure(idx: &BeliefSpaceIndex) -> (Vec<bool>, Vec<Vec<bool>>) {
    let n = idx.len();
    let mut winning = vec![true; n];
    loop {
        let safe: Vec<Vec<bool>> = (0..n)
            .map(|i| {
                idx.edges[i]
                    .iter()
                    .map(|e| e.branches.iter().all(|&(_, _, j)| winning[j]))
                    .collect()
            })
            .collect();
        // attractor of the goal using only safe actions
        let mut reach = idx.goal.clone();
        let mut changed = true;
        while changed {
            changed = false;
            for i in 0..n {
                if reach[i] || !winning[i] {
                    continue;
                }
                let ok = idx.edges[i].iter().zip(&safe[i]).any(|(e, &s)| {
                    s && e.branches.iter().any(|&(_, _, j)| reach[j])
                });
                if ok {
                    reach[i] = true;
                    changed = true;
                }
            }
        }
        if reach == winning {
            return (winning, safe);
        }
        winning = reach;
    }
}

/// Gauss-Seidel value iteration until the largest Bellman residual drops
/// below `tolerance`. Beliefs that cannot reach the goal almost surely get
/// ∞.
pub fn exact_values(idx: &BeliefSpaceIndex, tolerance: f64) -> ExactValues {
    let n = idx.len();
    let (winning, safe) = almost_sure(idx);
    let mut v: Vec<f64> = (0..n)
        .map(|i| if winning[i] { 0.0 } else { f64::INFINITY })
        .collect();
    let backup = |v: &[f64], i: usize| -> (f64, Option<ActionId>) {
        let mut best = (f64::INFINITY, None);
        for (e, &ok) in idx.edges[i].iter().zip(&safe[i]) {
            if !ok {
                continue;
            }
            let q = e.cost + e.branches.iter().map(|&(_, p, j)| p * v[j]).sum::<f64>();
            if q < best.0 {
                best = (q, Some(e.action));
            }
        }
        best
    };
    let mut sweeps = 0;
    let residual = loop {
        sweeps += 1;
        let mut res: f64 = 0.0;
        for i in 0..n {
            if idx.goal[i] || !winning[i] {
                continue;
            }
            let (q, _) = backup(&v, i);
            res = res.max((q - v[i]).abs());
            v[i] = q;
        }
        if res < tolerance || sweeps >= 1_000_000 {
            break res;
        }
    };
    // report the residual of the final values, not of the last sweep
    let mut residual_after: f64 = 0.0;
    let mut policy = vec![None; n];
    for i in 0..n {
        if idx.goal[i] || !winning[i] {
            continue;
        }
        let (q, a) = backup(&v, i);
        residual_after = residual_after.max((q - v[i]).abs());
        policy[i] = a;
    }
    ExactValues {
        values: v,
        policy,
        residual: residual.max(residual_after),
        sweeps,
    }
}

/// How far an evaluated policy is from the exact optimum.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimalityGap {
    pub optimum: f64,
    pub achieved: f64,
    /// achieved - optimum
    pub gap: f64,
    pub relative: f64,
    /// The relative gap exceeds the tolerance.
    pub suboptimal: bool,
}

pub fn optimality_gap(achieved: f64, optimum: f64, tolerance: f64) -> OptimalityGap {
    let gap = achieved - optimum;
    let relative = if optimum > 0.0 {
        gap / optimum
    } else if gap == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    OptimalityGap {
        optimum,
        achieved,
        gap,
        relative,
        suboptimal: !(relative <= tolerance),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RolloutReport {
    pub runs: usize,
    pub failures: usize,
    pub mean_cost: f64,
}

/// Simulates the exact policy from hidden start states drawn from `b0`.
pub fn rollout(
    engine: &Engine,
    idx: &BeliefSpaceIndex,
    ex: &ExactValues,
    runs: usize,
    step_cap: usize,
    seed: u64,
) -> RolloutReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b0 = &idx.beliefs[0];
    let mut failures = 0;
    let mut total = 0.0;
    for k in 0..runs {
        let mut s = sample_support(b0, (k as f64 + 0.5) / runs as f64).clone();
        let mut i = 0;
        let mut cost = 0.0;
        let mut steps = 0;
        let mut ok = true;
        while !idx.goal[i] {
            let Some(a) = ex.policy[i].filter(|_| steps < step_cap) else {
                ok = false;
                break;
            };
            let edge = idx.edges[i].iter().find(|e| e.action == a).expect("edge");
            cost += edge.cost;
            let (s2, o) = engine
                .sample_transition(&s, a, &mut rng)
                .expect("policy action applicable");
            i = edge
                .branches
                .iter()
                .find(|b| b.0 == o)
                .expect("observed branch enumerated")
                .2;
            s = s2;
            steps += 1;
        }
        if ok {
            total += cost;
        } else {
            failures += 1;
        }
    }
    RolloutReport {
        runs,
        failures,
        mean_cost: if runs > failures {
            total / (runs - failures) as f64
        } else {
            f64::INFINITY
        },
    }
}
