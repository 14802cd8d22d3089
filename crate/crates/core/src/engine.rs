//! The belief MDP: applicability, transitions, observations and exact
//! belief updates, with a transition cache.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use parking_lot::RwLock;
use rand::Rng;

use crate::model::{ActionId, BeliefState, Problem, State};

/// Truth values of an action's observed facts, bit `i` for `a.observed[i]`.
pub type ObsSignature = u64;

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub successor: State,
    pub probability: f64,
    pub observation: ObsSignature,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EngineError {
    #[error("observation {observation:#x} has probability 0 after `{action}`")]
    ImpossibleObservation { action: String, observation: ObsSignature },
    #[error("`{action}` is not applicable")]
    NotApplicable { action: String },
}

/// One observation branch of a belief-level transition.
#[derive(Clone, Debug)]
pub struct Branch {
    pub observation: ObsSignature,
    pub probability: f64,
    pub belief: BeliefState,
}

type TransitionMap = HashMap<(State, ActionId), Arc<[Transition]>>;

pub struct Engine {
    problem: Arc<Problem>,
    cache: Option<RwLock<TransitionMap>>,
}

impl Engine {
    pub fn new(problem: Arc<Problem>) -> Self {
        Engine {
            problem,
            cache: Some(RwLock::new(HashMap::new())),
        }
    }

    pub fn without_cache(problem: Arc<Problem>) -> Self {
        Engine {
            problem,
            cache: None,
        }
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn shared_problem(&self) -> &Arc<Problem> {
        &self.problem
    }

    pub fn cached_transitions(&self) -> usize {
        self.cache.as_ref().map_or(0, |c| c.read().len())
    }

    pub fn is_applicable(&self, s: &State, a: ActionId) -> bool {
        s.holds_all(&self.problem.action(a).precondition)
    }

    /// Actions whose preconditions hold in every support state, by id.
    pub fn applicable_actions(&self, b: &BeliefState) -> Vec<ActionId> {
        self.problem
            .actions
            .iter()
            .filter(|a| b.states().all(|s| s.holds_all(&a.precondition)))
            .map(|a| a.id)
            .collect()
    }

    pub fn applicable_in_state(&self, s: &State) -> Vec<ActionId> {
        self.problem
            .actions
            .iter()
            .filter(|a| s.holds_all(&a.precondition))
            .map(|a| a.id)
            .collect()
    }

    pub fn observe(&self, s: &State, a: ActionId) -> ObsSignature {
        let mut sig = 0;
        for (i, &f) in self.problem.action(a).observed.iter().enumerate() {
            if s.holds(f) {
                sig |= 1 << i;
            }
        }
        sig
    }

    /// tr(s, a, ·) with duplicate successors merged, sorted by state.
    pub fn transitions(&self, s: &State, a: ActionId) -> Arc<[Transition]> {
        if let Some(cache) = &self.cache {
            if let Some(t) = cache.read().get(&(s.clone(), a)) {
                return t.clone();
            }
        }
        let t: Arc<[Transition]> = self.expand(s, a).into();
        if let Some(cache) = &self.cache {
            cache.write().insert((s.clone(), a), t.clone());
        }
        t
    }

    fn expand(&self, s: &State, a: ActionId) -> Vec<Transition> {
        let action = self.problem.action(a);
        let active: Vec<_> = action
            .effects
            .iter()
            .filter(|e| s.holds_all(&e.condition))
            .collect();
        if active.is_empty() && !action.effects.is_empty() {
            log::debug!("`{}` has no active effect; treated as a no-op", action.name);
        }
        // effects read the pre-state and write independently
        let mut partial: Vec<(State, f64)> = vec![(s.clone(), 1.0)];
        for e in active {
            let mut next = Vec::with_capacity(partial.len() * e.outcomes.len());
            for (st, p) in &partial {
                for o in &e.outcomes {
                    let mut s2 = st.clone();
                    for &f in &o.added {
                        s2.set(f);
                    }
                    next.push((s2, p * o.probability));
                }
            }
            partial = next;
        }
        partial.sort_by(|x, y| x.0.cmp(&y.0));
        let mut out: Vec<Transition> = Vec::with_capacity(partial.len());
        for (st, p) in partial {
            match out.last_mut() {
                Some(last) if last.successor == st => last.probability += p,
                _ => {
                    let observation = self.observe(&st, a);
                    out.push(Transition {
                        successor: st,
                        probability: p,
                        observation,
                    })
                }
            }
        }
        out
    }

    /// All observation branches of `a` in `b`, sorted by signature.
    pub fn branches(&self, b: &BeliefState, a: ActionId) -> Vec<Branch> {
        let mut by_obs: BTreeMap<ObsSignature, Vec<(State, f64)>> = BTreeMap::new();
        for (s, p) in b.support() {
            for t in self.transitions(s, a).iter() {
                by_obs
                    .entry(t.observation)
                    .or_default()
                    .push((t.successor.clone(), p * t.probability));
            }
        }
        by_obs
            .into_iter()
            .map(|(observation, entries)| {
                let probability = entries.iter().map(|(_, p)| p).sum();
                Branch {
                    observation,
                    probability,
                    belief: BeliefState::from_weighted(entries),
                }
            })
            .collect()
    }

    pub fn observation_probability(&self, b: &BeliefState, a: ActionId, o: ObsSignature) -> f64 {
        b.support()
            .iter()
            .map(|(s, p)| {
                p * self
                    .transitions(s, a)
                    .iter()
                    .filter(|t| t.observation == o)
                    .map(|t| t.probability)
                    .sum::<f64>()
            })
            .sum()
    }

    pub fn update_belief(
        &self,
        b: &BeliefState,
        a: ActionId,
        o: ObsSignature,
    ) -> Result<BeliefState, EngineError> {
        let mut entries = Vec::new();
        for (s, p) in b.support() {
            for t in self.transitions(s, a).iter() {
                if t.observation == o {
                    entries.push((t.successor.clone(), p * t.probability));
                }
            }
        }
        if entries.iter().map(|(_, p)| p).sum::<f64>() <= 0.0 {
            return Err(EngineError::ImpossibleObservation {
                action: self.problem.action(a).name.clone(),
                observation: o,
            });
        }
        Ok(BeliefState::from_weighted(entries))
    }

    pub fn sample_transition<R: Rng + ?Sized>(
        &self,
        s: &State,
        a: ActionId,
        rng: &mut R,
    ) -> Result<(State, ObsSignature), EngineError> {
        if !self.is_applicable(s, a) {
            return Err(EngineError::NotApplicable {
                action: self.problem.action(a).name.clone(),
            });
        }
        let ts = self.transitions(s, a);
        let t = if ts.len() == 1 {
            &ts[0]
        } else {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            ts.iter()
                .find(|t| {
                    acc += t.probability;
                    u < acc
                })
                .unwrap_or(&ts[ts.len() - 1])
        };
        Ok((t.successor.clone(), t.observation))
    }

    /// Draws a state from `b` with one uniform variate.
    pub fn sample_state<'b, R: Rng + ?Sized>(&self, b: &'b BeliefState, rng: &mut R) -> &'b State {
        sample_support(b, rng.gen())
    }

    pub fn belief_is_goal(&self, b: &BeliefState) -> bool {
        b.states().all(|s| self.problem.is_goal_state(s))
    }
}

/// Inverse-CDF lookup of `u ∈ [0,1)` in the support of `b`.
pub fn sample_support(b: &BeliefState, u: f64) -> &State {
    let mut acc = 0.0;
    for (s, p) in b.support() {
        acc += p;
        if u < acc {
            return s;
        }
    }
    &b.support()[b.len() - 1].0
}
