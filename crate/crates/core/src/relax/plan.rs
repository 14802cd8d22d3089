//! Relaxed plan extraction by backward chaining over first achievers.

use std::collections::{BTreeMap, HashSet};

use super::graph::RelaxedBeliefGraph;
use crate::model::{ActionId, FactId, Problem};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Attribution {
    Unconditional,
    /// The effect that completed the fact across all valid states.
    LastConditional,
    /// The fact became common knowledge because states were eliminated.
    Sensing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlanStep {
    pub action: ActionId,
    pub layer: u32,
    /// Expected repetitions of a stochastic achiever; 1 when deterministic.
    pub cost: u32,
    pub attribution: Attribution,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RelaxedPlan {
    /// One entry per (layer, parent action), ordered by layer then id.
    pub steps: Vec<PlanStep>,
}

impl RelaxedPlan {
    pub fn actions(&self) -> Vec<ActionId> {
        self.steps.iter().map(|s| s.action).collect()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn cost(&self) -> u32 {
        self.steps.iter().map(|s| s.cost).sum()
    }
}

#[derive(Clone, Copy, Hash, PartialEq, Eq)]
enum Open {
    Common(FactId),
    InState(usize, FactId),
}

/// Extracts a plan from a graph that reached the goal.
///
/// Every step's layer is strictly below the layer of the fact it supports,
/// so the chain behind the last goal fact alone costs at least the goal
/// layer and the plan cost never falls below h_max.
///
/// # Panics
/// If the goal was not reached.
pub fn extract(g: &RelaxedBeliefGraph, p: &Problem) -> RelaxedPlan {
    assert!(g.goal_layer().is_some(), "plan extraction needs a goal layer");
    let mut steps: BTreeMap<(u32, ActionId), PlanStep> = BTreeMap::new();
    let add = |steps: &mut BTreeMap<(u32, ActionId), PlanStep>, step: PlanStep| {
        steps
            .entry((step.layer, step.action))
            .and_modify(|e| e.cost = e.cost.max(step.cost))
            .or_insert(step);
    };
    let mut seen: HashSet<Open> = HashSet::new();
    let mut stack: Vec<Open> = p.goal.iter().rev().map(|&f| Open::Common(f)).collect();
    while let Some(item) = stack.pop() {
        if !seen.insert(item) {
            continue;
        }
        match item {
            Open::Common(f) => {
                let l = g.intersection_level(f).expect("open fact is reached");
                if l == 0 {
                    continue;
                }
                let gainer = (0..g.num_states())
                    .filter(|&s| g.is_valid_at(s, l) && g.level(s, f) == Some(l))
                    .min_by_key(|&s| {
                        let a = g.achiever(s, f).expect("gained fact has an achiever");
                        (p.variants[a.variant as usize].parent, s)
                    });
                if let Some(s) = gainer {
                    stack.push(Open::InState(s, f));
                    continue;
                }
                // no valid state gained f at l: a state lacking it was ruled out
                let e = (0..g.num_states())
                    .find(|&s| {
                        g.elimination(s).map(|el| el.layer) == Some(l - 1)
                            && g.level(s, f).map_or(true, |lv| lv > l - 1)
                    })
                    .expect("intersection growth is explained by an elimination");
                let el = g.elimination(e).expect("eliminated");
                add(
                    &mut steps,
                    PlanStep {
                        action: el.action,
                        layer: el.layer,
                        cost: 1,
                        attribution: Attribution::Sensing,
                    },
                );
                for &q in p.action(el.action).precondition.iter().rev() {
                    stack.push(Open::Common(q));
                }
                let holder = if g.level(e, el.fact).is_some_and(|lv| lv <= el.layer) {
                    e
                } else {
                    g.ml
                };
                stack.push(Open::InState(holder, el.fact));
            }
            Open::InState(s, f) => {
                let Some(a) = g.achiever(s, f) else { continue };
                let v = &p.variants[a.variant as usize];
                add(
                    &mut steps,
                    PlanStep {
                        action: v.parent,
                        layer: a.applied,
                        cost: a.offset,
                        attribution: if v.effect.condition.is_empty() {
                            Attribution::Unconditional
                        } else {
                            Attribution::LastConditional
                        },
                    },
                );
                for &q in v.precondition.iter().rev() {
                    stack.push(Open::Common(q));
                }
                for &q in v.effect.condition.iter().rev() {
                    stack.push(Open::InState(s, q));
                }
            }
        }
    }
    RelaxedPlan {
        steps: steps.into_values().collect(),
    }
}
