//! Wumpus hunt on an n×n grid.
//!
//! The agent starts at (1,1) and must grab the gold at (n,n). For every
//! k in 2..n there is one hazard next to the diagonal, either at (k,k+1)
//! or at (k+1,k): a wumpus for even k, a pit for odd k. Cells next to a
//! wumpus smell and cells next to a pit are breezy; the agent senses the
//! cell it stands on. Entering a cell requires knowing it is safe.
//!
//! The uniform variant gives both hazard positions 0.5; the skewed one puts
//! 0.7 on the position above the diagonal.

use std::fmt::Write;

use super::{cell, weight, Generated, GeneratorError};

pub const SKEW: f64 = 0.7;

fn neighbors(n: usize, (x, y): (usize, usize)) -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    if x > 1 {
        v.push((x - 1, y));
    }
    if x < n {
        v.push((x + 1, y));
    }
    if y > 1 {
        v.push((x, y - 1));
    }
    if y < n {
        v.push((x, y + 1));
    }
    v
}

pub fn generate(n: usize, uniform: bool) -> Result<Generated, GeneratorError> {
    if n < 3 {
        return Err(GeneratorError(format!("wumpus needs n >= 3, got {n}")));
    }
    let name = format!("wumpus-{n}{}", if uniform { "" } else { "-n" });

    let domain = format!(
        "(define (domain {name})
  (:types cell)
  (:predicates (at ?c - cell) (adj ?a ?b - cell) (gold ?c - cell) (has-gold)
    (wumpus ?c - cell) (pit ?c - cell) (stench ?c - cell) (breeze ?c - cell))
  (:action move
    :parameters (?from ?to - cell)
    :precondition (and (adj ?from ?to) (at ?from) (not (wumpus ?to)) (not (pit ?to)))
    :effect (and (not (at ?from)) (at ?to)))
  (:action smell
    :parameters (?c - cell)
    :precondition (at ?c)
    :observe (stench ?c))
  (:action feel
    :parameters (?c - cell)
    :precondition (at ?c)
    :observe (breeze ?c))
  (:action grab
    :parameters (?c - cell)
    :precondition (and (at ?c) (gold ?c))
    :effect (has-gold)))
"
    );

    let mut p = String::new();
    writeln!(p, "(define (problem {name})").unwrap();
    writeln!(p, "  (:domain {name})").unwrap();
    write!(p, "  (:objects").unwrap();
    for y in 1..=n {
        for x in 1..=n {
            write!(p, " {}", cell(x, y)).unwrap();
        }
    }
    writeln!(p, " - cell)").unwrap();
    write!(p, "  (:init (at c1-1) (gold {})", cell(n, n)).unwrap();
    for y in 1..=n {
        for x in 1..=n {
            for (a, b) in neighbors(n, (x, y)) {
                write!(p, "\n    (adj {} {})", cell(x, y), cell(a, b)).unwrap();
            }
        }
    }
    writeln!(p, ")").unwrap();
    let (above, below) = if uniform { (0.5, 0.5) } else { (SKEW, 1.0 - SKEW) };
    write!(p, "  (:init-belief").unwrap();
    for k in 2..n {
        let (hazard, sign) = if k % 2 == 0 {
            ("wumpus", "stench")
        } else {
            ("pit", "breeze")
        };
        write!(p, "\n    (oneof-weighted").unwrap();
        for (w, pos) in [(above, (k, k + 1)), (below, (k + 1, k))] {
            write!(p, "\n      {} (and ({hazard} {})", weight(w), cell(pos.0, pos.1)).unwrap();
            for c in neighbors(n, pos) {
                write!(p, " ({sign} {})", cell(c.0, c.1)).unwrap();
            }
            write!(p, ")").unwrap();
        }
        write!(p, ")").unwrap();
    }
    writeln!(p, ")").unwrap();
    writeln!(p, "  (:goal (has-gold)))").unwrap();

    Ok(Generated {
        name,
        domain,
        problem: p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_has_81_actions() {
        let p = generate(4, true).unwrap().parse().unwrap();
        assert_eq!(p.actions.len(), 81);
        assert_eq!(p.initial_belief().unwrap().len(), 4);
    }

    #[test]
    fn skewed_prior() {
        let p = generate(4, false).unwrap().parse().unwrap();
        let mut ps: Vec<f64> = p
            .initial_belief()
            .unwrap()
            .support()
            .iter()
            .map(|(_, q)| *q)
            .collect();
        ps.sort_by(f64::total_cmp);
        let expect = [0.09, 0.21, 0.21, 0.49];
        for (a, b) in ps.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn too_small() {
        assert!(generate(2, true).is_err());
    }
}
