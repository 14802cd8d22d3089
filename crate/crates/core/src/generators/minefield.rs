//! Six-atom instance used for hand-checked values.
//!
//! The agent stands at `a` and must reach `b`. A fast move is legal only
//! when the field is known to be clear; a four-step careful route always
//! works. Whether the field is mined is a fair coin, and `sense-safe`
//! reveals it.
//!
//! Hand values: h_max(clear) = 1, h_max(mined) = 4, weighted h_max(b0) = 2.5,
//! belief h_max(b0) = 2 with relaxed plan {sense-safe, move-fast} and
//! V*(b0) = 1 + 0.5 * 1 + 0.5 * 4 = 3.5.

use super::Generated;
use crate::model::Problem;

pub const DOMAIN: &str = "(define (domain minefield)
  (:constants a c1 c2 c3 b)
  (:predicates (at ?l) (mined))
  (:action move-careful1
    :precondition (at a)
    :effect (and (at c1) (not (at a))))
  (:action move-careful2
    :precondition (at c1)
    :effect (and (at c2) (not (at c1))))
  (:action move-careful3
    :precondition (at c2)
    :effect (and (at c3) (not (at c2))))
  (:action move-careful4
    :precondition (at c3)
    :effect (and (at b) (not (at c3))))
  (:action move-fast
    :precondition (and (at a) (not (mined)))
    :effect (and (at b) (not (at a))))
  (:action sense-safe
    :precondition (at a)
    :observe (mined)))
";

pub const PROBLEM: &str = "(define (problem minefield-1)
  (:domain minefield)
  (:init (at a))
  (:init-belief (oneof-weighted 0.5 (mined) 0.5 ()))
  (:goal (at b)))
";

pub fn generate() -> Generated {
    Generated {
        name: "minefield".into(),
        domain: DOMAIN.into(),
        problem: PROBLEM.into(),
    }
}

pub fn problem() -> Problem {
    generate().parse().expect("minefield parses")
}
