//! A fixed instance on which the most-likely-state heuristic overestimates
//! the optimal cost and steers the solver away from the best first move.
//!
//! From `start` a safe chain of nine steps reaches the goal. Alternatively
//! the agent steps to `hub` and tries a shortcut that works only in the
//! lucky world (probability 0.4, goal reached and observed); otherwise a
//! nine-step route from the hub remains. V*(b0) = 1 + 0.4 + 0.6 * 10 = 7.4
//! via the hub, against 9 for the safe chain. The most likely world is the
//! unlucky one, in which the hub is worth 9, so the greedy choice at b0
//! compares 1 + 9 for the hub with 1 + 8 for the chain and never looks back.

use std::fmt::Write;

use super::{weight, Generated};
use crate::model::Problem;

pub const LUCKY: f64 = 0.4;
pub const CHAIN: usize = 9;
pub const OPTIMUM: f64 = 1.0 + LUCKY + (1.0 - LUCKY) * (1.0 + CHAIN as f64);

pub fn generate() -> Generated {
    let domain = "(define (domain trap)
  (:predicates (at ?p) (next ?a ?b) (lucky))
  (:constants hub goal)
  (:action walk
    :parameters (?a ?b)
    :precondition (and (next ?a ?b) (at ?a))
    :effect (and (not (at ?a)) (at ?b)))
  (:action try
    :precondition (at hub)
    :effect (when (lucky) (and (not (at hub)) (at goal)))
    :observe (at goal)))
"
    .to_string();

    let mut p = String::new();
    writeln!(p, "(define (problem trap-1)").unwrap();
    writeln!(p, "  (:domain trap)").unwrap();
    write!(p, "  (:objects start").unwrap();
    for k in 1..CHAIN {
        write!(p, " s{k} r{k}").unwrap();
    }
    writeln!(p, ")").unwrap();
    write!(p, "  (:init (at start) (next start hub) (next start s1) (next hub r1)").unwrap();
    for k in 1..CHAIN - 1 {
        write!(p, " (next s{k} s{}) (next r{k} r{})", k + 1, k + 1).unwrap();
    }
    writeln!(p, " (next s{0} goal) (next r{0} goal))", CHAIN - 1).unwrap();
    writeln!(
        p,
        "  (:init-belief (oneof-weighted {} (lucky) {} ()))",
        weight(LUCKY),
        weight(1.0 - LUCKY)
    )
    .unwrap();
    writeln!(p, "  (:goal (at goal)))").unwrap();

    Generated {
        name: "trap".into(),
        domain,
        problem: p,
    }
}

pub fn problem() -> Problem {
    generate().parse().expect("trap instance parses")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Engine;
    use crate::oracle::{enumerate_beliefs, exact_values};
    use std::sync::Arc;

    #[test]
    fn optimum_goes_through_the_hub() {
        let e = Engine::new(Arc::new(problem()));
        let idx = enumerate_beliefs(&e, 1000).unwrap();
        let ex = exact_values(&idx, 1e-12);
        assert!((ex.values[0] - OPTIMUM).abs() < 1e-9);
        assert_eq!(e.problem().action(ex.policy[0].unwrap()).name, "walk_start_hub");
    }
}
