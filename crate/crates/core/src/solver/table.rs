use std::collections::HashMap;

use crate::engine::Engine;
use crate::heuristic::Heuristic;
use crate::model::{belief_key, BeliefKey, BeliefState};

/// Belief values, initialized from the heuristic the first time a belief
/// is looked up.
#[derive(Clone, Debug, Default)]
pub struct BeliefValueTable {
    entries: HashMap<BeliefKey, f64>,
    discretization: Option<u32>,
    pub init_count: u64,
    pub hit_count: u64,
}

impl BeliefValueTable {
    pub fn new(discretization: Option<u32>) -> Self {
        BeliefValueTable {
            discretization,
            ..Default::default()
        }
    }

    pub fn discretization(&self) -> Option<u32> {
        self.discretization
    }

    pub fn key(&self, b: &BeliefState) -> BeliefKey {
        belief_key(b, self.discretization)
    }

    pub fn get(&self, b: &BeliefState) -> Option<f64> {
        self.entries.get(&self.key(b)).copied()
    }

    pub fn get_key(&self, k: &BeliefKey) -> Option<f64> {
        self.entries.get(k).copied()
    }

    pub fn set(&mut self, b: &BeliefState, v: f64) {
        let k = self.key(b);
        self.entries.insert(k, v);
    }

    pub fn insert_key(&mut self, k: BeliefKey, v: f64) {
        self.entries.insert(k, v);
    }

    /// V(b), inserting the heuristic value on a miss. Goal beliefs are 0.
    pub fn value_or_init(&mut self, b: &BeliefState, h: &Heuristic, engine: &Engine) -> f64 {
        let k = self.key(b);
        if let Some(&v) = self.entries.get(&k) {
            self.hit_count += 1;
            return v;
        }
        let v = if engine.belief_is_goal(b) {
            0.0
        } else {
            h.value(b)
        };
        self.init_count += 1;
        self.entries.insert(k, v);
        v
    }

    /// V(b) without touching the table; falls back to the heuristic.
    pub fn value_or_heuristic(&self, b: &BeliefState, h: &Heuristic, engine: &Engine) -> f64 {
        if engine.belief_is_goal(b) {
            return 0.0;
        }
        self.get(b).unwrap_or_else(|| h.value(b))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries sorted by key.
    pub fn sorted_entries(&self) -> Vec<(&BeliefKey, f64)> {
        let mut v: Vec<_> = self.entries.iter().map(|(k, v)| (k, *v)).collect();
        v.sort_by(|a, b| a.0.cmp(b.0));
        v
    }
}
