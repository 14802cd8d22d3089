//! Maze with bottlenecks whose easy passage is hidden.
//!
//! The grid is n×n; the agent starts at the middle of the left column and
//! must reach the middle of the right column. Each bottleneck is a wall
//! column with two passages, at rows 2 and n-1. Exactly one passage per
//! bottleneck is easy, each assignment equally likely. Entering a passage
//! known to be easy always succeeds; entering without that knowledge
//! succeeds with probability 0.1 whatever the passage. The corners of the
//! start column are observation cells: from the bottom corner the agent
//! sees whether the upper passage of the first bottleneck is easy, from the
//! top corner the second, and so on alternately.

use std::fmt::Write;

use super::{cell, weight, Generated, GeneratorError};

pub const UNSURE_SUCCESS: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MazeParams {
    pub n: usize,
    pub bottlenecks: usize,
    /// Emit the observation actions; without them the only way across is
    /// the unsure passage move.
    pub sensing: bool,
}

impl MazeParams {
    pub fn new(n: usize, bottlenecks: usize) -> Self {
        MazeParams {
            n,
            bottlenecks,
            sensing: true,
        }
    }

    /// Columns of the bottleneck walls.
    pub fn walls(&self) -> Result<Vec<usize>, GeneratorError> {
        let (n, b) = (self.n, self.bottlenecks);
        if n < 5 {
            return Err(GeneratorError(format!("maze needs n >= 5, got {n}")));
        }
        if b == 0 {
            return Err(GeneratorError("maze needs at least one bottleneck".into()));
        }
        let walls: Vec<usize> = (1..=b).map(|j| 1 + j * (n - 1) / (b + 1)).collect();
        let spaced = walls.windows(2).all(|w| w[1] >= w[0] + 2);
        if !spaced || walls[0] < 3 || walls[b - 1] > n - 2 {
            return Err(GeneratorError(format!(
                "{b} bottlenecks do not fit a maze of width {n}"
            )));
        }
        Ok(walls)
    }
}

/// Bottleneck `j` (from 0) is observed from a corner of the start column,
/// alternating bottom and top.
pub fn observation_cell(n: usize, j: usize) -> (usize, usize) {
    (1, if j % 2 == 0 { 1 } else { n })
}

pub fn generate(n: usize, bottlenecks: usize) -> Result<Generated, GeneratorError> {
    generate_with(&MazeParams::new(n, bottlenecks))
}

pub fn generate_with(params: &MazeParams) -> Result<Generated, GeneratorError> {
    let walls = params.walls()?;
    let n = params.n;
    let name = format!(
        "maze-{n}-{}{}",
        params.bottlenecks,
        if params.sensing { "" } else { "-blind" }
    );
    let passages = |w: usize| [(w, n - 1), (w, 2)];
    let is_wall = |x: usize, y: usize| walls.contains(&x) && !passages(x).contains(&(x, y));
    let is_passage = |x: usize, y: usize| walls.contains(&x) && passages(x).contains(&(x, y));

    let mut d = String::new();
    writeln!(d, "(define (domain {name})").unwrap();
    writeln!(d, "  (:types cell)").unwrap();
    writeln!(
        d,
        "  (:predicates (at ?c - cell) (adj ?a ?b - cell) (door ?a ?p - cell) (easy ?p - cell)
    (views ?o ?p - cell))"
    )
    .unwrap();
    writeln!(
        d,
        "  (:action move
    :parameters (?a ?b - cell)
    :precondition (and (adj ?a ?b) (at ?a))
    :effect (and (not (at ?a)) (at ?b)))
  (:action enter-easy
    :parameters (?a ?p - cell)
    :precondition (and (door ?a ?p) (at ?a) (easy ?p))
    :effect (and (not (at ?a)) (at ?p)))
  (:action enter
    :parameters (?a ?p - cell)
    :precondition (and (door ?a ?p) (at ?a))
    :effect (probabilistic {} (and (not (at ?a)) (at ?p)) {} ())
    :observe (at ?p))",
        weight(UNSURE_SUCCESS),
        weight(1.0 - UNSURE_SUCCESS)
    )
    .unwrap();
    if params.sensing {
        writeln!(
            d,
            "  (:action look
    :parameters (?o ?p - cell)
    :precondition (and (at ?o) (views ?o ?p))
    :observe (easy ?p))"
        )
        .unwrap();
    }
    writeln!(d, ")").unwrap();

    let mut p = String::new();
    writeln!(p, "(define (problem {name})").unwrap();
    writeln!(p, "  (:domain {name})").unwrap();
    write!(p, "  (:objects").unwrap();
    for y in 1..=n {
        for x in 1..=n {
            if !is_wall(x, y) {
                write!(p, " {}", cell(x, y)).unwrap();
            }
        }
    }
    writeln!(p, " - cell)").unwrap();
    let mid = n.div_ceil(2);
    write!(p, "  (:init (at {})", cell(1, mid)).unwrap();
    let open = |x: usize, y: usize| (1..=n).contains(&x) && (1..=n).contains(&y) && !walls.contains(&x);
    for y in 1..=n {
        for x in 1..=n {
            if open(x, y) {
                let mut adj = vec![(x + 1, y), (x, y + 1)];
                if x > 1 {
                    adj.push((x - 1, y));
                }
                if y > 1 {
                    adj.push((x, y - 1));
                }
                for (a, b) in adj {
                    if open(a, b) {
                        write!(p, "\n    (adj {} {})", cell(x, y), cell(a, b)).unwrap();
                    }
                }
            } else if is_passage(x, y) {
                write!(p, "\n    (adj {} {})", cell(x, y), cell(x + 1, y)).unwrap();
                write!(p, "\n    (door {} {})", cell(x - 1, y), cell(x, y)).unwrap();
            }
        }
    }
    if params.sensing {
        for (j, &w) in walls.iter().enumerate() {
            let [top, _] = passages(w);
            let o = observation_cell(n, j);
            write!(p, "\n    (views {} {})", cell(o.0, o.1), cell(top.0, top.1)).unwrap();
        }
    }
    writeln!(p, ")").unwrap();
    write!(p, "  (:init-belief").unwrap();
    for &w in &walls {
        let [top, bottom] = passages(w);
        write!(
            p,
            "\n    (oneof-weighted 0.5 (easy {}) 0.5 (easy {}))",
            cell(top.0, top.1),
            cell(bottom.0, bottom.1)
        )
        .unwrap();
    }
    writeln!(p, ")").unwrap();
    writeln!(p, "  (:goal (at {})))", cell(n, mid)).unwrap();

    Ok(Generated {
        name,
        domain: d,
        problem: p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn walls_are_spread() {
        assert_eq!(MazeParams::new(5, 1).walls().unwrap(), vec![3]);
        assert_eq!(MazeParams::new(7, 2).walls().unwrap(), vec![3, 5]);
        assert!(MazeParams::new(7, 3).walls().is_err());
        assert!(MazeParams::new(4, 1).walls().is_err());
    }

    #[test]
    fn no_bottleneck_is_an_error() {
        assert!(generate(7, 0).is_err());
    }

    #[test]
    fn hidden_assignment_is_uniform() {
        let p = generate(7, 2).unwrap().parse().unwrap();
        let b0 = p.initial_belief().unwrap();
        assert_eq!(b0.len(), 4);
        assert!(b0.support().iter().all(|(_, q)| (q - 0.25).abs() < 1e-12));
    }
}
