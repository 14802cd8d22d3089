//! Writes a grounded problem back out as a parameterless domain and problem.

use std::fmt::Write;

use crate::model::{ConditionalEffect, FactId, Problem};

fn literal(p: &Problem, f: FactId) -> &str {
    p.fact_name(f)
}

fn conjunction(p: &Problem, facts: &[FactId]) -> String {
    let mut s = String::from("(and");
    for &f in facts {
        s.push(' ');
        s.push_str(literal(p, f));
    }
    s.push(')');
    s
}

fn probabilistic(p: &Problem, e: &ConditionalEffect) -> String {
    let mut s = String::from("(probabilistic");
    for o in &e.outcomes {
        write!(s, " {} {}", o.probability, conjunction(p, &o.added)).unwrap();
    }
    s.push(')');
    s
}

fn effect(p: &Problem, index: usize, e: &ConditionalEffect) -> String {
    let deterministic = e.is_deterministic() && !e.outcomes[0].added.is_empty();
    if e.condition.is_empty() {
        // top-level plain literals always form the first effect
        if index == 0 && deterministic {
            let lits: Vec<&str> = e.outcomes[0].added.iter().map(|&f| literal(p, f)).collect();
            lits.join(" ")
        } else {
            probabilistic(p, e)
        }
    } else {
        let body = if deterministic {
            conjunction(p, &e.outcomes[0].added)
        } else {
            probabilistic(p, e)
        };
        format!("(when {} {})", conjunction(p, &e.condition), body)
    }
}

/// Returns `(domain_text, problem_text)`; parsing them yields `p` again.
pub fn serialize_problem(p: &Problem) -> (String, String) {
    let mut d = String::new();
    writeln!(d, "(define (domain {})", p.domain_name).unwrap();
    d.push_str("  (:predicates");
    for pred in &p.predicates {
        write!(d, "\n    ({}", pred.name).unwrap();
        for i in 0..pred.arity {
            write!(d, " ?x{i}").unwrap();
        }
        d.push(')');
    }
    d.push_str(")\n");
    for a in &p.actions {
        writeln!(d, "  (:action {}", a.name).unwrap();
        if !a.precondition.is_empty() {
            writeln!(d, "    :precondition {}", conjunction(p, &a.precondition)).unwrap();
        }
        if !a.effects.is_empty() {
            let parts: Vec<String> = a
                .effects
                .iter()
                .enumerate()
                .map(|(i, e)| effect(p, i, e))
                .collect();
            writeln!(d, "    :effect (and {})", parts.join(" ")).unwrap();
        }
        if !a.observed.is_empty() {
            writeln!(d, "    :observe {}", conjunction(p, &a.observed)).unwrap();
        }
        if a.cost != 1.0 {
            writeln!(d, "    :cost {}", a.cost).unwrap();
        }
        d.truncate(d.trim_end().len());
        d.push_str(")\n");
    }
    d.push_str(")\n");

    let mut q = String::new();
    writeln!(q, "(define (problem {})", p.name).unwrap();
    writeln!(q, "  (:domain {})", p.domain_name).unwrap();
    if !p.objects.is_empty() {
        writeln!(q, "  (:objects {})", p.objects.join(" ")).unwrap();
    }
    q.push_str("  (:init");
    for &f in &p.init_true {
        write!(q, " {}", literal(p, f)).unwrap();
    }
    for name in &p.fixed_facts {
        write!(q, " {name}").unwrap();
    }
    q.push_str(")\n");
    if !p.initial_groups.is_empty() {
        q.push_str("  (:init-belief");
        for g in &p.initial_groups {
            q.push_str("\n    (oneof-weighted");
            for frag in g {
                write!(q, " {} {}", frag.probability, conjunction(p, &frag.facts)).unwrap();
            }
            q.push(')');
        }
        q.push_str(")\n");
    }
    writeln!(q, "  (:goal {}))", conjunction(p, &p.goal)).unwrap();
    (d, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_problem;

    #[test]
    fn round_trip_keeps_probabilities_exact() {
        let d = "(define (domain d) (:predicates (a) (b) (c))
          (:action x :precondition (not (c))
             :effect (and (c) (probabilistic 0.1 (a) 0.9 ()) (when (a) (probabilistic 0.30000000000000004 (b) 0.7 ())))
             :cost 2.5)
          (:action look :observe (a)))";
        let q = "(define (problem p) (:domain d)
          (:init-belief (oneof-weighted 0.3333333333333333 (b) 0.6666666666666667 ()))
          (:goal (and (a) (b))))";
        let p = parse_problem(d, q).unwrap();
        let (d2, q2) = serialize_problem(&p);
        let p2 = parse_problem(&d2, &q2).unwrap();
        assert_eq!(p, p2);
        assert_eq!(
            p2.actions[0].effects[2].outcomes[0].probability,
            0.30000000000000004
        );
    }
}
