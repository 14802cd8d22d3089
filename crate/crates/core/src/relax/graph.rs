//! Layered relaxed graphs over one or more states.
//!
//! The builder keeps one fact layer per support state. An action variant is
//! applicable when its precondition holds in the intersection over the
//! still-valid states; its condition is checked per state. With a single
//! state this is the classical relaxed planning graph.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::Compiled;
use crate::model::{ActionId, FactId, FactSet, Problem, State};

pub(crate) const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Achiever {
    /// Index into the problem's split variants.
    pub variant: u32,
    pub outcome: u32,
    /// Layer at which the variant was applied.
    pub applied: u32,
    pub offset: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Elimination {
    pub layer: u32,
    pub action: ActionId,
    /// Observed fact on which the state disagreed with the assumed one.
    pub fact: FactId,
}

/// Pending insertion: (due, offset, parent, variant, outcome).
type Pending = (u32, u32, u32, u32, u32);

#[derive(Clone, Debug)]
pub struct RelaxedBeliefGraph {
    pub states: Vec<State>,
    /// Index of the assumed true state in `states`.
    pub ml: usize,
    level: Vec<Vec<u32>>,
    achiever: Vec<Vec<Option<Achiever>>>,
    /// `Some(i)`: eliminated by a sensing action at layer `i`, valid up to `i`.
    removed_after: Vec<Option<u32>>,
    elimination: Vec<Option<Elimination>>,
    intersection_level: Vec<u32>,
    goal_layer: Option<u32>,
    last_layer: u32,
}

impl RelaxedBeliefGraph {
    pub(crate) fn build(c: &Compiled, p: &Problem, states: Vec<State>, ml: usize) -> Self {
        let n = p.num_facts();
        let k = states.len();
        let nv = c.variants.len();
        let mut cur: Vec<FactSet> = states.iter().map(|s| s.facts().clone()).collect();
        let mut level = vec![vec![NONE; n]; k];
        for (s, set) in cur.iter().enumerate() {
            for f in set.iter() {
                level[s][f.index()] = 0;
            }
        }
        let mut achiever = vec![vec![None; n]; k];
        let mut valid = vec![true; k];
        let mut removed_after = vec![None; k];
        let mut elimination = vec![None; k];
        let mut fired = vec![false; k * nv];
        let mut pending: Vec<BinaryHeap<Reverse<Pending>>> = vec![BinaryHeap::new(); k];
        let mut intersection_level = vec![NONE; n];
        let mut i: u32 = 0;
        let goal_layer;
        loop {
            let mut inter = cur[ml].clone();
            for (s, set) in cur.iter().enumerate() {
                if valid[s] && s != ml {
                    inter.intersect_with(set);
                }
            }
            for f in inter.iter() {
                if intersection_level[f.index()] == NONE {
                    intersection_level[f.index()] = i;
                }
            }
            if inter.contains_all(&p.goal) {
                goal_layer = Some(i);
                break;
            }

            for (vi, v) in c.variants.iter().enumerate() {
                if !inter.contains_all(&v.pre) {
                    continue;
                }
                for s in 0..k {
                    let slot = s * nv + vi;
                    if !valid[s] || fired[slot] || !cur[s].contains_all(&v.cond) {
                        continue;
                    }
                    fired[slot] = true;
                    for (oi, (offset, added)) in v.outcomes.iter().enumerate() {
                        if !added.is_empty() {
                            pending[s].push(Reverse((
                                i.saturating_add(*offset),
                                *offset,
                                v.parent.0,
                                vi as u32,
                                oi as u32,
                            )));
                        }
                    }
                }
            }

            // eliminations are decided on layer i and take effect at i + 1
            let mut eliminated = Vec::new();
            for &a in &c.sensing {
                let action = p.action(a);
                if !inter.contains_all(&action.precondition) {
                    continue;
                }
                for s in 0..k {
                    if !valid[s] || s == ml || elimination[s].is_some() {
                        continue;
                    }
                    if let Some(&fact) = action
                        .observed
                        .iter()
                        .find(|&&q| cur[s].contains(q) != cur[ml].contains(q))
                    {
                        elimination[s] = Some(Elimination {
                            layer: i,
                            action: a,
                            fact,
                        });
                        eliminated.push(s);
                    }
                }
            }
            for &s in &eliminated {
                valid[s] = false;
                removed_after[s] = Some(i);
            }

            let mut grew = false;
            for s in 0..k {
                if !valid[s] {
                    continue;
                }
                while let Some(&Reverse((due, offset, _, vi, oi))) = pending[s].peek() {
                    if due != i + 1 {
                        break;
                    }
                    pending[s].pop();
                    for &f in &c.variants[vi as usize].outcomes[oi as usize].1 {
                        if cur[s].insert(f) {
                            level[s][f.index()] = i + 1;
                            achiever[s][f.index()] = Some(Achiever {
                                variant: vi,
                                outcome: oi,
                                applied: i + 1 - offset,
                                offset,
                            });
                            grew = true;
                        }
                    }
                }
            }
            if !grew && eliminated.is_empty() {
                // nothing changed: skip straight to the next scheduled insertion
                let next = (0..k)
                    .filter(|&s| valid[s])
                    .filter_map(|s| pending[s].peek().map(|r| r.0 .0))
                    .min();
                match next {
                    Some(d) => {
                        i = d - 1;
                        continue;
                    }
                    None => {
                        goal_layer = None;
                        break;
                    }
                }
            }
            i += 1;
        }
        RelaxedBeliefGraph {
            states,
            ml,
            level,
            achiever,
            removed_after,
            elimination,
            intersection_level,
            goal_layer,
            last_layer: i,
        }
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    /// Layer at which the goal first holds in the intersection.
    pub fn goal_layer(&self) -> Option<u32> {
        self.goal_layer
    }

    pub fn last_layer(&self) -> u32 {
        self.last_layer
    }

    pub fn is_valid_at(&self, s: usize, layer: u32) -> bool {
        self.removed_after[s].map_or(true, |r| layer <= r)
    }

    pub fn valid_at(&self, layer: u32) -> Vec<usize> {
        (0..self.states.len())
            .filter(|&s| self.is_valid_at(s, layer))
            .collect()
    }

    pub fn level(&self, s: usize, f: FactId) -> Option<u32> {
        let l = self.level[s][f.index()];
        (l != NONE).then_some(l)
    }

    pub fn achiever(&self, s: usize, f: FactId) -> Option<Achiever> {
        self.achiever[s][f.index()]
    }

    pub fn elimination(&self, s: usize) -> Option<Elimination> {
        self.elimination[s]
    }

    /// First layer at which `f` holds in every then-valid state.
    pub fn intersection_level(&self, f: FactId) -> Option<u32> {
        let l = self.intersection_level[f.index()];
        (l != NONE).then_some(l)
    }

    /// F^s_i (facts of state `s` at `layer`).
    pub fn layer(&self, s: usize, layer: u32) -> FactSet {
        let n = self.level[s].len();
        FactSet::from_facts(
            n,
            (0..n as u32)
                .map(FactId)
                .filter(|f| self.level[s][f.index()] <= layer),
        )
    }

    /// Line-oriented dump of the layers and eliminations.
    pub fn trace(&self, p: &Problem) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let top = self.goal_layer.unwrap_or(self.last_layer);
        writeln!(out, "states {} ml {}", self.states.len(), self.ml).unwrap();
        for i in 0..=top {
            let valid: Vec<String> = self.valid_at(i).iter().map(|s| s.to_string()).collect();
            writeln!(out, "layer {i} valid {}", valid.join(",")).unwrap();
            for s in 0..self.states.len() {
                for f in 0..self.level[s].len() {
                    if self.level[s][f] == i && i > 0 {
                        let a = self.achiever[s][f].expect("achiever");
                        let parent = p.variants[a.variant as usize].parent;
                        writeln!(
                            out,
                            "  add s{s} {} by {} applied {}",
                            p.fact_name(FactId(f as u32)),
                            p.action(parent).name,
                            a.applied
                        )
                        .unwrap();
                    }
                }
                if let Some(e) = self.elimination[s] {
                    if e.layer == i {
                        writeln!(
                            out,
                            "  eliminate s{s} by {} on {}",
                            p.action(e.action).name,
                            p.fact_name(e.fact)
                        )
                        .unwrap();
                    }
                }
            }
        }
        match self.goal_layer {
            Some(g) => writeln!(out, "goal {g}").unwrap(),
            None => writeln!(out, "goal unreached").unwrap(),
        }
        out
    }
}

/// Relaxed graph of a single state.
#[derive(Clone, Debug)]
pub struct RelaxedStateGraph(pub(crate) RelaxedBeliefGraph);

impl RelaxedStateGraph {
    pub fn goal_layer(&self) -> Option<u32> {
        self.0.goal_layer
    }

    pub fn layer(&self, i: u32) -> FactSet {
        self.0.layer(0, i)
    }

    pub fn first_level(&self, f: FactId) -> Option<u32> {
        self.0.level(0, f)
    }

    /// Parent action of the first achiever; `None` for facts true initially.
    pub fn first_achiever(&self, p: &Problem, f: FactId) -> Option<ActionId> {
        self.0
            .achiever(0, f)
            .map(|a| p.variants[a.variant as usize].parent)
    }

    pub fn as_belief_graph(&self) -> &RelaxedBeliefGraph {
        &self.0
    }

    pub fn trace(&self, p: &Problem) -> String {
        self.0.trace(p)
    }
}
