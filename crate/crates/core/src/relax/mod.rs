//! Delete-relaxation heuristics over single states and over beliefs.
//!
//! A stochastic outcome with probability `p` lands `ceil(1/p)` layers after
//! its action is applied; the achiever of a fact is only fixed once the
//! fact actually appears, so a later but faster achiever can win.

pub mod graph;
pub mod plan;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use parking_lot::RwLock;

use crate::model::{most_likely_state, ActionId, BeliefState, FactId, Problem, State};
pub use graph::{Achiever, Elimination, RelaxedBeliefGraph, RelaxedStateGraph};
pub use plan::{extract, Attribution, PlanStep, RelaxedPlan};

/// Layer counts with a distinct unreachable value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HValue {
    Finite(u32),
    Infinite,
}

impl HValue {
    pub fn to_f64(self) -> f64 {
        match self {
            HValue::Finite(v) => v as f64,
            HValue::Infinite => f64::INFINITY,
        }
    }

    pub fn finite(self) -> Option<u32> {
        match self {
            HValue::Finite(v) => Some(v),
            HValue::Infinite => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, HValue::Finite(_))
    }
}

impl fmt::Display for HValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HValue::Finite(v) => write!(f, "{v}"),
            HValue::Infinite => write!(f, "inf"),
        }
    }
}

/// Number of layers a stochastic outcome is delayed: `ceil(1/p)`.
///
/// # Panics
/// If `probability` is not in (0, 1].
pub fn effect_level_offset(probability: f64) -> u32 {
    assert!(
        probability > 0.0 && probability <= 1.0,
        "outcome probability {probability} outside (0,1]"
    );
    (1.0 / probability - 1e-9).ceil().clamp(1.0, u32::MAX as f64) as u32
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RelaxedValues {
    pub hmax: HValue,
    pub hadd: HValue,
    pub hff: HValue,
}

impl RelaxedValues {
    const UNREACHED: RelaxedValues = RelaxedValues {
        hmax: HValue::Infinite,
        hadd: HValue::Infinite,
        hff: HValue::Infinite,
    };

    pub fn get(&self, kind: RelaxedKind) -> HValue {
        match kind {
            RelaxedKind::Max => self.hmax,
            RelaxedKind::Add => self.hadd,
            RelaxedKind::Ff => self.hff,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RelaxedKind {
    Max,
    Add,
    Ff,
}

pub(crate) struct CompiledVariant {
    pub parent: ActionId,
    pub pre: Vec<FactId>,
    pub cond: Vec<FactId>,
    pub outcomes: Vec<(u32, Vec<FactId>)>,
}

pub(crate) struct Compiled {
    pub variants: Vec<CompiledVariant>,
    pub sensing: Vec<ActionId>,
}

impl Compiled {
    fn new(p: &Problem) -> Self {
        Compiled {
            variants: p
                .variants
                .iter()
                .map(|v| CompiledVariant {
                    parent: v.parent,
                    pre: v.precondition.clone(),
                    cond: v.effect.condition.clone(),
                    outcomes: v
                        .effect
                        .outcomes
                        .iter()
                        .map(|o| (effect_level_offset(o.probability), o.added.clone()))
                        .collect(),
                })
                .collect(),
            sensing: p
                .actions
                .iter()
                .filter(|a| a.is_sensing())
                .map(|a| a.id)
                .collect(),
        }
    }
}

type BeliefCacheKey = (State, Vec<State>);

/// Relaxation heuristics for one problem, with per-state and per-support
/// caches. Belief values ignore the probabilities apart from the choice of
/// the most likely state.
pub struct Relaxation {
    problem: Arc<Problem>,
    compiled: Compiled,
    state_cache: RwLock<HashMap<State, RelaxedValues>>,
    belief_cache: RwLock<HashMap<BeliefCacheKey, RelaxedValues>>,
}

impl Relaxation {
    pub fn new(problem: Arc<Problem>) -> Self {
        let compiled = Compiled::new(&problem);
        Relaxation {
            problem,
            compiled,
            state_cache: RwLock::new(HashMap::new()),
            belief_cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn build_state_graph(&self, s: &State) -> RelaxedStateGraph {
        RelaxedStateGraph(RelaxedBeliefGraph::build(
            &self.compiled,
            &self.problem,
            vec![s.clone()],
            0,
        ))
    }

    pub fn build_belief_graph(&self, b: &BeliefState) -> RelaxedBeliefGraph {
        let ml = most_likely_state(b);
        let states: Vec<State> = b.states().cloned().collect();
        let idx = states.iter().position(|s| s == ml).expect("ml in support");
        RelaxedBeliefGraph::build(&self.compiled, &self.problem, states, idx)
    }

    fn values_of(&self, g: &RelaxedBeliefGraph) -> RelaxedValues {
        let Some(hmax) = g.goal_layer() else {
            return RelaxedValues::UNREACHED;
        };
        let hadd = self
            .problem
            .goal
            .iter()
            .map(|&f| g.intersection_level(f).expect("goal reached"))
            .sum();
        let hff = extract(g, &self.problem).cost();
        RelaxedValues {
            hmax: HValue::Finite(hmax),
            hadd: HValue::Finite(hadd),
            hff: HValue::Finite(hff),
        }
    }

    pub fn state_values(&self, s: &State) -> RelaxedValues {
        if let Some(v) = self.state_cache.read().get(s) {
            return *v;
        }
        let v = self.values_of(self.build_state_graph(s).as_belief_graph());
        self.state_cache.write().insert(s.clone(), v);
        v
    }

    pub fn state_value(&self, s: &State, kind: RelaxedKind) -> HValue {
        self.state_values(s).get(kind)
    }

    /// Σ_s b(s) h(s); infinite as soon as one support state is.
    pub fn weighted(&self, b: &BeliefState, kind: RelaxedKind) -> f64 {
        let mut total = 0.0;
        for (s, p) in b.support() {
            match self.state_value(s, kind) {
                HValue::Finite(v) => total += p * v as f64,
                HValue::Infinite => return f64::INFINITY,
            }
        }
        total
    }

    pub fn belief_values(&self, b: &BeliefState) -> RelaxedValues {
        let key = (
            most_likely_state(b).clone(),
            b.states().cloned().collect::<Vec<_>>(),
        );
        if let Some(v) = self.belief_cache.read().get(&key) {
            return *v;
        }
        let v = self.belief_values_uncached(b);
        self.belief_cache.write().insert(key, v);
        v
    }

    pub fn belief_values_uncached(&self, b: &BeliefState) -> RelaxedValues {
        self.values_of(&self.build_belief_graph(b))
    }

    pub fn belief_value(&self, b: &BeliefState, kind: RelaxedKind) -> HValue {
        self.belief_values(b).get(kind)
    }

    pub fn belief_plan(&self, b: &BeliefState) -> Option<RelaxedPlan> {
        let g = self.build_belief_graph(b);
        g.goal_layer().map(|_| extract(&g, &self.problem))
    }

    pub fn state_plan(&self, s: &State) -> Option<RelaxedPlan> {
        let g = self.build_state_graph(s);
        g.goal_layer().map(|_| extract(g.as_belief_graph(), &self.problem))
    }

    pub fn cache_sizes(&self) -> (usize, usize) {
        (self.state_cache.read().len(), self.belief_cache.read().len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::minefield;
    use crate::model::{most_likely_state, BeliefState};

    fn setup() -> (Relaxation, BeliefState) {
        let p = Arc::new(minefield::problem());
        let b0 = p.initial_belief().unwrap();
        (Relaxation::new(p), b0)
    }

    #[test]
    fn offsets() {
        let got: Vec<u32> = [1.0, 0.5, 0.3, 0.1, 0.01]
            .iter()
            .map(|&p| effect_level_offset(p))
            .collect();
        assert_eq!(got, vec![1, 2, 4, 10, 100]);
    }

    #[test]
    #[should_panic]
    fn zero_probability_offset_panics() {
        effect_level_offset(0.0);
    }

    #[test]
    fn minefield_state_values() {
        let (r, b0) = setup();
        let safe = &b0.support()[0].0;
        let unsafe_ = &b0.support()[1].0;
        assert_eq!(r.state_value(safe, RelaxedKind::Max), HValue::Finite(1));
        assert_eq!(r.state_value(unsafe_, RelaxedKind::Max), HValue::Finite(4));
        assert_eq!(r.state_value(unsafe_, RelaxedKind::Ff), HValue::Finite(4));
        assert_eq!(r.weighted(&b0, RelaxedKind::Max), 2.5);
        let plan = r.state_plan(unsafe_).unwrap();
        let names: Vec<&str> = plan
            .actions()
            .iter()
            .map(|&a| r.problem().action(a).name.as_str())
            .collect();
        assert_eq!(
            names,
            ["move-careful1", "move-careful2", "move-careful3", "move-careful4"]
        );
        let g = r.build_state_graph(unsafe_);
        let at_b = r.problem().fact_by_name("(at b)").unwrap();
        assert_eq!(g.first_level(at_b), Some(4));
    }

    #[test]
    fn minefield_belief_values() {
        let (r, b0) = setup();
        let v = r.belief_values(&b0);
        assert_eq!(v.hmax, HValue::Finite(2));
        assert_eq!(v.hff, HValue::Finite(2));
        let plan = r.belief_plan(&b0).unwrap();
        let names: Vec<&str> = plan
            .actions()
            .iter()
            .map(|&a| r.problem().action(a).name.as_str())
            .collect();
        assert_eq!(names, ["sense-safe", "move-fast"]);
        assert_eq!(plan.steps[0].attribution, Attribution::Sensing);
        let g = r.build_belief_graph(&b0);
        assert_eq!(g.valid_at(0), vec![0, 1]);
        assert_eq!(g.valid_at(1), vec![0]);
        assert!(r.state_value(most_likely_state(&b0), RelaxedKind::Max) <= v.hmax);
    }

    #[test]
    fn singleton_belief_matches_state_graph() {
        let (r, b0) = setup();
        for s in b0.states() {
            let b = BeliefState::singleton(s.clone());
            assert_eq!(r.belief_values(&b), r.state_values(s));
        }
    }

    #[test]
    fn goal_state_is_zero() {
        let (r, b0) = setup();
        let careful = r.problem().action_by_name("move-fast").unwrap();
        let e = crate::engine::Engine::new(Arc::new(r.problem().clone()));
        let safe = b0.support()[0].0.clone();
        let ts = e.transitions(&safe, careful);
        let g = &ts[0].successor;
        let v = r.state_values(g);
        assert_eq!(v.hmax, HValue::Finite(0));
        assert_eq!(v.hff, HValue::Finite(0));
        assert!(r.state_plan(g).unwrap().is_empty());
    }

    /// Two hidden worlds with no sensor; the goal needs a fact only one of
    /// them has.
    #[test]
    fn indistinguishable_states_give_infinity() {
        let d = "(define (domain d) (:predicates (key) (g))
          (:action open :precondition (key) :effect (g)))";
        let q = "(define (problem p) (:domain d)
          (:init-belief (oneof-weighted 0.5 (key) 0.5 ())) (:goal (g)))";
        let p = Arc::new(crate::parser::parse_problem(d, q).unwrap());
        let b0 = p.initial_belief().unwrap();
        let r = Relaxation::new(p);
        assert_eq!(r.belief_value(&b0, RelaxedKind::Max), HValue::Infinite);
        assert!(r.weighted(&b0, RelaxedKind::Max).is_infinite());
    }

    /// A fact reachable at layer 3 deterministically and at layer 1 + 2
    /// through a p = 0.5 outcome keeps the deterministic achiever.
    #[test]
    fn deterministic_achiever_wins_tie() {
        let d = "(define (domain d) (:predicates (x) (y) (g))
          (:action gamble :precondition (x) :effect (probabilistic 0.5 (g) 0.5 ()))
          (:action step1 :effect (x))
          (:action step2 :precondition (x) :effect (y))
          (:action step3 :precondition (y) :effect (g)))";
        let q = "(define (problem p) (:domain d) (:goal (g)))";
        let p = Arc::new(crate::parser::parse_problem(d, q).unwrap());
        let r = Relaxation::new(p.clone());
        let s0 = p.initial_belief().unwrap().support()[0].0.clone();
        let g = r.build_state_graph(&s0);
        let fg = p.fact_by_name("(g)").unwrap();
        assert_eq!(g.first_level(fg), Some(3));
        assert_eq!(g.first_achiever(&p, fg), p.action_by_name("step3"));
    }

    #[test]
    fn stochastic_fact_lands_two_layers_later() {
        let d = "(define (domain d) (:predicates (g))
          (:action try :effect (probabilistic 0.5 (g) 0.5 ())))";
        let q = "(define (problem p) (:domain d) (:goal (g)))";
        let p = Arc::new(crate::parser::parse_problem(d, q).unwrap());
        let r = Relaxation::new(p.clone());
        let s0 = p.initial_belief().unwrap().support()[0].0.clone();
        let v = r.state_values(&s0);
        assert_eq!(v.hmax, HValue::Finite(2));
        assert_eq!(v.hff, HValue::Finite(2));
    }
}
