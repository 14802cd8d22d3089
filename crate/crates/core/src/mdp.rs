//! Value function of the fully observable MDP, computed with RTDP over
//! states and topped up on demand for states the initial runs missed.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;
use std::time::{Duration, Instant};

use parking_lot::{Mutex, RwLock};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::engine::Engine;
use crate::model::{most_likely_state, ActionId, BeliefState, State};

#[derive(Clone, Debug)]
pub struct MdpConfig {
    /// Trajectories of the initial phase, spread over the initial states.
    pub initial_trajectories: usize,
    /// Trajectories run from a state seen for the first time.
    pub top_up: usize,
    /// Trajectory cap as a multiple of the number of facts.
    pub cap_factor: usize,
}

impl Default for MdpConfig {
    fn default() -> Self {
        MdpConfig {
            initial_trajectories: 1000,
            top_up: 100,
            cap_factor: 10,
        }
    }
}

/// V(s) for the underlying MDP. Unvisited states read as 0.
pub struct MdpValueTable {
    engine: Arc<Engine>,
    values: RwLock<HashMap<State, f64>>,
    visited: RwLock<HashSet<State>>,
    rng: Mutex<ChaCha8Rng>,
    config: MdpConfig,
    init_time: Duration,
}

impl MdpValueTable {
    pub fn new(engine: Arc<Engine>, seed: u64, config: MdpConfig) -> Self {
        MdpValueTable {
            engine,
            values: RwLock::new(HashMap::new()),
            visited: RwLock::new(HashSet::new()),
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
            config,
            init_time: Duration::ZERO,
        }
    }

    /// Builds the table and runs the initial phase round-robin over the
    /// support of the initial belief.
    pub fn initialized(engine: Arc<Engine>, b0: &BeliefState, seed: u64, config: MdpConfig) -> Self {
        let mut t = Self::new(engine, seed, config);
        let start = Instant::now();
        let starts: Vec<&State> = b0.states().collect();
        for i in 0..t.config.initial_trajectories {
            t.run(starts[i % starts.len()], 1);
        }
        t.init_time = start.elapsed();
        t
    }

    pub fn init_time(&self) -> Duration {
        self.init_time
    }

    pub fn value(&self, s: &State) -> f64 {
        if self.engine.problem().is_goal_state(s) {
            return 0.0;
        }
        self.values.read().get(s).copied().unwrap_or(0.0)
    }

    pub fn is_visited(&self, s: &State) -> bool {
        self.visited.read().contains(s)
    }

    pub fn visited_count(&self) -> usize {
        self.visited.read().len()
    }

    fn q_value(&self, s: &State, a: ActionId) -> f64 {
        let cost = self.engine.problem().action(a).cost;
        cost + self
            .engine
            .transitions(s, a)
            .iter()
            .map(|t| t.probability * self.value(&t.successor))
            .sum::<f64>()
    }

    /// Greedy action and its Q-value; ties to the lowest id.
    pub fn greedy(&self, s: &State) -> Option<(ActionId, f64)> {
        let mut best: Option<(ActionId, f64)> = None;
        for a in self.engine.applicable_in_state(s) {
            let q = self.q_value(s, a);
            if best.map_or(true, |(_, v)| q < v) {
                best = Some((a, q));
            }
        }
        best
    }

    /// One Bellman backup at `s`; dead ends get ∞.
    pub fn bellman_backup(&self, s: &State) -> f64 {
        if self.engine.problem().is_goal_state(s) {
            return 0.0;
        }
        let v = self.greedy(s).map_or(f64::INFINITY, |(_, q)| q);
        self.values.write().insert(s.clone(), v);
        v
    }

    /// Runs `iterations` trajectories from `start`, backing up along each
    /// trajectory and again in reverse.
    pub fn run(&self, start: &State, iterations: usize) {
        let cap = self.config.cap_factor * self.engine.problem().num_facts().max(1);
        for _ in 0..iterations {
            let mut s = start.clone();
            let mut path = Vec::new();
            for _ in 0..cap {
                self.visited.write().insert(s.clone());
                if self.engine.problem().is_goal_state(&s) {
                    break;
                }
                let Some((a, q)) = self.greedy(&s) else {
                    self.values.write().insert(s.clone(), f64::INFINITY);
                    break;
                };
                self.values.write().insert(s.clone(), q);
                path.push(s.clone());
                let mut rng = self.rng.lock();
                s = self
                    .engine
                    .sample_transition(&s, a, &mut *rng)
                    .expect("greedy action is applicable")
                    .0;
            }
            for st in path.iter().rev() {
                self.bellman_backup(st);
            }
        }
    }

    /// Stored value, after a top-up run when `s` has not been visited yet.
    pub fn value_on_demand(&self, s: &State) -> f64 {
        if !self.is_visited(s) {
            self.run(s, self.config.top_up);
        }
        self.value(s)
    }

    /// Σ_s b(s) V(s).
    pub fn qmdp(&self, b: &BeliefState) -> f64 {
        let mut total = 0.0;
        for (s, p) in b.support() {
            let v = self.value_on_demand(s);
            if v.is_infinite() {
                return f64::INFINITY;
            }
            total += p * v;
        }
        total
    }

    /// V(s_ML).
    pub fn most_likely(&self, b: &BeliefState) -> f64 {
        self.value_on_demand(most_likely_state(b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::minefield;
    use crate::parser::parse_problem;

    fn minefield_table(seed: u64) -> (MdpValueTable, BeliefState) {
        let p = Arc::new(minefield::problem());
        let b0 = p.initial_belief().unwrap();
        let e = Arc::new(Engine::new(p));
        (
            MdpValueTable::initialized(e, &b0, seed, MdpConfig::default()),
            b0,
        )
    }

    #[test]
    fn minefield_values() {
        let (t, b0) = minefield_table(1);
        let safe = &b0.support()[0].0;
        let unsafe_ = &b0.support()[1].0;
        assert_eq!(t.value_on_demand(safe), 1.0);
        assert_eq!(t.value_on_demand(unsafe_), 4.0);
        assert_eq!(t.qmdp(&b0), 2.5);
        assert_eq!(t.most_likely(&b0), 1.0);
    }

    #[test]
    fn zero_iterations_leave_table_empty() {
        let p = Arc::new(minefield::problem());
        let b0 = p.initial_belief().unwrap();
        let t = MdpValueTable::new(Arc::new(Engine::new(p)), 0, MdpConfig::default());
        t.run(&b0.support()[0].0, 0);
        assert_eq!(t.visited_count(), 0);
    }

    #[test]
    fn geometric_retry_converges_to_ten() {
        let d = "(define (domain d) (:predicates (g))
          (:action try :effect (probabilistic 0.1 (g) 0.9 ())))";
        let p = Arc::new(parse_problem(d, "(define (problem p) (:domain d) (:goal (g)))").unwrap());
        let s = p.initial_belief().unwrap().support()[0].0.clone();
        let t = MdpValueTable::new(Arc::new(Engine::new(p)), 3, MdpConfig::default());
        for _ in 0..400 {
            t.bellman_backup(&s);
        }
        assert!((t.value(&s) - 10.0).abs() < 1e-9);
        let before = t.value(&s);
        t.bellman_backup(&s);
        assert!((t.value(&s) - before).abs() < 1e-9);
    }

    #[test]
    fn seeds_agree_after_long_runs() {
        let (a, b0) = minefield_table(1);
        let (b, _) = minefield_table(99);
        for s in b0.states() {
            assert!(a.is_visited(s) && b.is_visited(s));
            assert!((a.value(s) - b.value(s)).abs() < 1e-6);
        }
    }

    #[test]
    fn dead_end_is_infinite() {
        let d = "(define (domain d) (:predicates (k) (g))
          (:action go :precondition (k) :effect (g))
          (:action make :precondition (g) :effect (k)))";
        let p = Arc::new(parse_problem(d, "(define (problem p) (:domain d) (:goal (g)))").unwrap());
        let s = p.initial_belief().unwrap().support()[0].0.clone();
        let t = MdpValueTable::new(Arc::new(Engine::new(p)), 3, MdpConfig::default());
        assert!(t.value_on_demand(&s).is_infinite());
    }
}
