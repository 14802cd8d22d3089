//! Grounded problem representation, states and beliefs.
//!
//! Every ground atom `p` is materialized as two facts: `p` itself at an even
//! index and its complement `not p` at the following odd index. Preconditions,
//! conditions, goals and observations therefore only ever mention positive
//! (internal) facts, while a [`State`] always holds exactly one fact of each
//! complementary pair.

use std::cmp::Ordering;
use std::fmt;

use smallvec::SmallVec;
use thiserror::Error;

/// Tolerance for probability sums inside a grounded problem.
pub const PROB_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("action `{action}`: an outcome adds both `{fact}` and its complement")]
    ContradictoryOutcome { action: String, fact: String },
    #[error("action `{action}`: outcome probabilities sum to {sum}")]
    OutcomeSum { action: String, sum: f64 },
    #[error("action `{action}`: condition contains a fact and its complement")]
    ContradictoryCondition { action: String },
    #[error("goal is empty")]
    EmptyGoal,
    #[error("unknown fact id {0}")]
    UnknownFact(usize),
    #[error("initial belief probabilities sum to {0}")]
    InitialSum(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FactId(pub u32);

impl FactId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn complement(self) -> FactId {
        FactId(self.0 ^ 1)
    }

    /// True for the fact standing for the atom itself (even index).
    #[inline]
    pub fn is_atom(self) -> bool {
        self.0 & 1 == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionId(pub u32);

impl ActionId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fact {
    pub id: FactId,
    pub name: String,
    pub complement: FactId,
}

/// Fixed-width set of fact ids backed by 64-bit words.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct FactSet {
    words: SmallVec<[u64; 4]>,
}

impl FactSet {
    pub fn new(num_facts: usize) -> Self {
        FactSet {
            words: SmallVec::from_elem(0, num_facts.div_ceil(64)),
        }
    }

    pub fn from_facts(num_facts: usize, facts: impl IntoIterator<Item = FactId>) -> Self {
        let mut set = FactSet::new(num_facts);
        for f in facts {
            set.insert(f);
        }
        set
    }

    #[inline]
    pub fn contains(&self, f: FactId) -> bool {
        let i = f.index();
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    /// Returns true if the fact was newly inserted.
    #[inline]
    pub fn insert(&mut self, f: FactId) -> bool {
        let i = f.index();
        let mask = 1u64 << (i % 64);
        let w = &mut self.words[i / 64];
        let fresh = *w & mask == 0;
        *w |= mask;
        fresh
    }

    #[inline]
    pub fn remove(&mut self, f: FactId) {
        let i = f.index();
        self.words[i / 64] &= !(1u64 << (i % 64));
    }

    pub fn contains_all(&self, facts: &[FactId]) -> bool {
        facts.iter().all(|&f| self.contains(f))
    }

    pub fn is_subset(&self, other: &FactSet) -> bool {
        self.words
            .iter()
            .zip(other.words.iter())
            .all(|(a, b)| a & !b == 0)
    }

    pub fn intersect_with(&mut self, other: &FactSet) {
        for (a, b) in self.words.iter_mut().zip(other.words.iter()) {
            *a &= *b;
        }
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = FactId> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros();
                bits &= bits - 1;
                Some(FactId((wi * 64) as u32 + b))
            })
        })
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }

    pub(crate) fn from_words(words: &[u64]) -> Self {
        FactSet {
            words: SmallVec::from_slice(words),
        }
    }
}

impl fmt::Debug for FactSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(|x| x.0)).finish()
    }
}

/// Lexicographic order over bit positions, fact 0 first, `false < true`.
impl Ord for FactSet {
    fn cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.words.iter().zip(other.words.iter()) {
            if a != b {
                return a.reverse_bits().cmp(&b.reverse_bits());
            }
        }
        self.words.len().cmp(&other.words.len())
    }
}

impl PartialOrd for FactSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Total truth assignment over the non-fixed facts of a problem.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State(FactSet);

impl State {
    /// Builds a state from the set of true atoms; every other atom gets its
    /// complement set.
    pub fn from_true_atoms(num_facts: usize, atoms: impl IntoIterator<Item = FactId>) -> Self {
        let mut bits = FactSet::new(num_facts);
        for k in 0..num_facts / 2 {
            bits.insert(FactId(2 * k as u32 + 1));
        }
        let mut s = State(bits);
        for a in atoms {
            s.set(a);
        }
        s
    }

    #[inline]
    pub fn holds(&self, f: FactId) -> bool {
        self.0.contains(f)
    }

    pub fn holds_all(&self, facts: &[FactId]) -> bool {
        self.0.contains_all(facts)
    }

    /// Makes `f` true and its complement false.
    #[inline]
    pub fn set(&mut self, f: FactId) {
        self.0.insert(f);
        self.0.remove(f.complement());
    }

    pub fn facts(&self) -> &FactSet {
        &self.0
    }

    pub fn num_bits(&self) -> usize {
        self.0.words.len() * 64
    }

    /// Checks the complement invariant for `num_facts` facts.
    pub fn is_consistent(&self, num_facts: usize) -> bool {
        (0..num_facts / 2).all(|k| {
            let p = FactId(2 * k as u32);
            self.holds(p) != self.holds(p.complement())
        })
    }

    /// Hex encoding of the underlying words, little-endian word order.
    pub fn to_hex(&self) -> String {
        self.0
            .words()
            .iter()
            .map(|w| format!("{w:016x}"))
            .collect::<Vec<_>>()
            .join("")
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        if s.is_empty() || s.len() % 16 != 0 || !s.is_ascii() {
            return None;
        }
        let words: Option<Vec<u64>> = (0..s.len() / 16)
            .map(|i| u64::from_str_radix(&s[i * 16..(i + 1) * 16], 16).ok())
            .collect();
        Some(State(FactSet::from_words(&words?)))
    }
}

impl fmt::Debug for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "State(")?;
        let mut first = true;
        for fact in self.0.iter().filter(|x| x.is_atom()) {
            if !first {
                write!(f, ",")?;
            }
            write!(f, "{}", fact.0)?;
            first = false;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilisticOutcome {
    pub probability: f64,
    /// Facts made true; their complements become false.
    pub added: Vec<FactId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalEffect {
    /// Positive facts; empty for an unconditional effect.
    pub condition: Vec<FactId>,
    pub outcomes: Vec<ProbabilisticOutcome>,
}

impl ConditionalEffect {
    pub fn is_deterministic(&self) -> bool {
        self.outcomes.len() == 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Action {
    pub id: ActionId,
    pub name: String,
    pub precondition: Vec<FactId>,
    pub effects: Vec<ConditionalEffect>,
    pub observed: Vec<FactId>,
    pub cost: f64,
}

impl Action {
    pub fn is_sensing(&self) -> bool {
        !self.observed.is_empty()
    }
}

/// A single-condition copy of an action used by the relaxation heuristics.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitVariant {
    pub parent: ActionId,
    pub precondition: Vec<FactId>,
    pub effect: ConditionalEffect,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitialFragment {
    /// Facts assigned by this fragment (atoms or complements).
    pub facts: Vec<FactId>,
    pub probability: f64,
}

/// One `oneof-weighted` group: exactly one fragment holds.
pub type InitialGroup = Vec<InitialFragment>;

#[derive(Clone, Debug, PartialEq)]
pub struct Predicate {
    pub name: String,
    pub arity: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    pub domain_name: String,
    pub name: String,
    pub predicates: Vec<Predicate>,
    pub objects: Vec<String>,
    pub facts: Vec<Fact>,
    pub actions: Vec<Action>,
    pub goal: Vec<FactId>,
    /// Atoms true in every initial state (non-fixed).
    pub init_true: Vec<FactId>,
    /// Independent groups whose product defines the initial belief.
    pub initial_groups: Vec<InitialGroup>,
    /// Atoms that no action changes and that are true; factored out of states.
    pub fixed_facts: Vec<String>,
    /// Relaxation copies: one per (action, conditional effect).
    pub variants: Vec<SplitVariant>,
}

impl Problem {
    pub fn num_facts(&self) -> usize {
        self.facts.len()
    }

    pub fn fact_name(&self, f: FactId) -> &str {
        &self.facts[f.index()].name
    }

    pub fn action(&self, a: ActionId) -> &Action {
        &self.actions[a.index()]
    }

    pub fn fact_by_name(&self, name: &str) -> Option<FactId> {
        self.facts.iter().find(|f| f.name == name).map(|f| f.id)
    }

    pub fn action_by_name(&self, name: &str) -> Option<ActionId> {
        self.actions.iter().find(|a| a.name == name).map(|a| a.id)
    }

    pub fn is_goal_state(&self, s: &State) -> bool {
        s.holds_all(&self.goal)
    }

    /// Expands the initial groups into the initial belief.
    pub fn initial_belief(&self) -> Result<BeliefState, ModelError> {
        let n = self.num_facts();
        let base = State::from_true_atoms(n, self.init_true.iter().copied());
        let mut partial: Vec<(State, f64)> = vec![(base, 1.0)];
        for group in &self.initial_groups {
            let mut next = Vec::with_capacity(partial.len() * group.len());
            for (s, p) in &partial {
                for frag in group {
                    let mut s2 = s.clone();
                    for &f in &frag.facts {
                        s2.set(f);
                    }
                    next.push((s2, p * frag.probability));
                }
            }
            partial = next;
        }
        let total: f64 = partial.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(ModelError::InitialSum(total));
        }
        Ok(BeliefState::from_weighted(partial))
    }

    /// Checks the type invariants of a grounded problem.
    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.num_facts();
        let check = |f: FactId| {
            if f.index() < n {
                Ok(())
            } else {
                Err(ModelError::UnknownFact(f.index()))
            }
        };
        if self.goal.is_empty() {
            return Err(ModelError::EmptyGoal);
        }
        for &g in &self.goal {
            check(g)?;
        }
        for a in &self.actions {
            for &f in a.precondition.iter().chain(&a.observed) {
                check(f)?;
            }
            for e in &a.effects {
                for &c in &e.condition {
                    check(c)?;
                    if e.condition.contains(&c.complement()) {
                        return Err(ModelError::ContradictoryCondition {
                            action: a.name.clone(),
                        });
                    }
                }
                let sum: f64 = e.outcomes.iter().map(|o| o.probability).sum();
                if (sum - 1.0).abs() > 1e-6 {
                    return Err(ModelError::OutcomeSum {
                        action: a.name.clone(),
                        sum,
                    });
                }
                for o in &e.outcomes {
                    for &f in &o.added {
                        check(f)?;
                        if o.added.contains(&f.complement()) {
                            let atom = if f.is_atom() { f } else { f.complement() };
                            return Err(ModelError::ContradictoryOutcome {
                                action: a.name.clone(),
                                fact: self.fact_name(atom).to_string(),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Rebuilds the relaxation copies of `problem`: every conditional effect of
/// every action becomes one [`SplitVariant`] carrying the parent's id. The
/// executable action list is left untouched.
pub fn ground_split_conditionals(mut problem: Problem) -> Result<Problem, ModelError> {
    problem.validate()?;
    problem.variants = problem
        .actions
        .iter()
        .flat_map(|a| {
            a.effects.iter().map(move |e| SplitVariant {
                parent: a.id,
                precondition: a.precondition.clone(),
                effect: e.clone(),
            })
        })
        .collect();
    Ok(problem)
}

/// Distribution over states, stored as its support sorted by state order.
#[derive(Clone, Debug, PartialEq)]
pub struct BeliefState {
    support: Vec<(State, f64)>,
}

impl BeliefState {
    /// Merges duplicates, drops zero entries and normalizes.
    pub fn from_weighted(entries: impl IntoIterator<Item = (State, f64)>) -> Self {
        let mut v: Vec<(State, f64)> = entries.into_iter().filter(|(_, p)| *p > 0.0).collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        let mut merged: Vec<(State, f64)> = Vec::with_capacity(v.len());
        for (s, p) in v {
            match merged.last_mut() {
                Some((last, q)) if *last == s => *q += p,
                _ => merged.push((s, p)),
            }
        }
        let total: f64 = merged.iter().map(|(_, p)| p).sum();
        for (_, p) in merged.iter_mut() {
            *p /= total;
        }
        BeliefState { support: merged }
    }

    /// Builds a belief from an already sorted, merged, normalized support.
    #[cfg(test)]
    pub(crate) fn from_sorted_unchecked(support: Vec<(State, f64)>) -> Self {
        BeliefState { support }
    }

    pub fn singleton(s: State) -> Self {
        BeliefState {
            support: vec![(s, 1.0)],
        }
    }

    pub fn support(&self) -> &[(State, f64)] {
        &self.support
    }

    pub fn states(&self) -> impl Iterator<Item = &State> {
        self.support.iter().map(|(s, _)| s)
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn probability(&self, s: &State) -> f64 {
        self.support
            .binary_search_by(|(x, _)| x.cmp(s))
            .map(|i| self.support[i].1)
            .unwrap_or(0.0)
    }
}

/// Max-probability state; ties go to the smallest state in bit order.
pub fn most_likely_state(b: &BeliefState) -> &State {
    let mut best = &b.support[0];
    for entry in &b.support[1..] {
        if entry.1 > best.1 {
            best = entry;
        }
    }
    &best.0
}

/// Hashable identity of a belief in the value table.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BeliefKey(pub Vec<(State, u64)>);

/// Without discretization the probability is rounded to 1e-9; with `D` the
/// level is `ceil(D * b(s))`.
pub fn belief_key(b: &BeliefState, discretization: Option<u32>) -> BeliefKey {
    BeliefKey(
        b.support
            .iter()
            .map(|(s, p)| {
                let level = match discretization {
                    None => (p * 1e9).round() as u64,
                    Some(d) => (f64::from(d) * p - 1e-9).ceil().max(1.0) as u64,
                };
                (s.clone(), level)
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(n: usize, atoms: &[u32]) -> State {
        State::from_true_atoms(n, atoms.iter().map(|&a| FactId(a)))
    }

    #[test]
    fn complement_is_involution() {
        for i in 0..64 {
            let f = FactId(i);
            assert_eq!(f.complement().complement(), f);
            assert_ne!(f.complement(), f);
        }
    }

    #[test]
    fn state_keeps_pairs_consistent() {
        let mut s = st(6, &[0]);
        assert!(s.is_consistent(6));
        s.set(FactId(3));
        s.set(FactId(1));
        assert!(s.holds(FactId(1)) && !s.holds(FactId(0)));
        assert!(s.is_consistent(6));
    }

    #[test]
    fn most_likely_unique_and_tie() {
        let s1 = st(4, &[]);
        let s2 = st(4, &[0]);
        assert!(s1 < s2);
        let b = BeliefState::from_weighted([(s1.clone(), 0.7), (s2.clone(), 0.3)]);
        assert_eq!(most_likely_state(&b), &s1);
        let b = BeliefState::from_weighted([(s2.clone(), 0.5), (s1.clone(), 0.5)]);
        assert_eq!(most_likely_state(&b), &s1);
        let b = BeliefState::from_weighted([(s2.clone(), 0.3), (s1.clone(), 0.7)]);
        assert_eq!(most_likely_state(&b), &s1);
        let b = BeliefState::singleton(s2.clone());
        assert_eq!(most_likely_state(&b), &s2);
    }

    #[test]
    fn key_rounding_and_levels() {
        let s1 = st(4, &[]);
        let s2 = st(4, &[0]);
        let a = BeliefState::from_sorted_unchecked(vec![
            (s1.clone(), 0.5 + 1e-12),
            (s2.clone(), 0.5 - 1e-12),
        ]);
        let b = BeliefState::from_weighted([(s1.clone(), 0.5), (s2.clone(), 0.5)]);
        assert_eq!(belief_key(&a, None), belief_key(&b, None));
        assert_eq!(belief_key(&b, None), belief_key(&b.clone(), None));

        let c = BeliefState::from_sorted_unchecked(vec![(s1.clone(), 0.41), (s2, 0.59)]);
        let k = belief_key(&c, Some(10));
        assert_eq!(k.0[0].1, 5);
        assert_eq!(k.0[1].1, 6);
    }

    #[test]
    fn hex_round_trip() {
        let s = st(130, &[0, 64, 128]);
        assert_eq!(State::from_hex(&s.to_hex()), Some(s));
        assert_eq!(State::from_hex("xyz"), None);
    }

    #[test]
    fn ordering_is_bitwise_lexicographic() {
        // fact 0 differs: the state lacking it sorts first, regardless of
        // higher bits.
        let a = st(200, &[]);
        let mut b = st(200, &[]);
        b.set(FactId(0));
        let mut c = a.clone();
        c.set(FactId(198));
        assert!(a < b);
        assert!(c < b);
        assert!(a < c);
    }

    #[test]
    fn split_keeps_every_condition_outcome_pair() {
        let g = crate::generators::localize::generate(4, true).unwrap();
        let mut p = g.parse().unwrap();
        let original = p.variants.clone();
        p.variants.clear();
        let p = ground_split_conditionals(p).unwrap();
        assert_eq!(p.variants, original);
        let pairs = |v: &[SplitVariant]| {
            let mut out: Vec<String> = v
                .iter()
                .flat_map(|sv| {
                    sv.effect
                        .outcomes
                        .iter()
                        .map(move |o| format!("{:?} {:?} {:?}", sv.parent, sv.effect.condition, o))
                })
                .collect();
            out.sort();
            out
        };
        let mut from_actions: Vec<String> = p
            .actions
            .iter()
            .flat_map(|a| {
                a.effects.iter().flat_map(move |e| {
                    e.outcomes
                        .iter()
                        .map(move |o| format!("{:?} {:?} {:?}", a.id, e.condition, o))
                })
            })
            .collect();
        from_actions.sort();
        assert!(p.variants.iter().any(|v| !v.effect.condition.is_empty()));
        assert_eq!(pairs(&p.variants), from_actions);
    }
}
