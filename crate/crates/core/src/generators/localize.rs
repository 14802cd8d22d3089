//! Hallway-style localization.
//!
//! The agent occupies a cell of an n×n grid and faces one of four
//! headings; neither is known at the start. It can move in four directions
//! relative to its heading when the way is known to be clear, turn
//! clockwise, and sense the wall in each relative direction. Pillars sit
//! on even-even cells, the top-left corner is blocked and, from n = 5 on,
//! so is (3, 1), which leaves the layout without rotational symmetry.
//! The goal is the top-right cell; the agent starts anywhere else.
//!
//! In the stochastic variant moves starting in the lower half of the grid
//! succeed with probability 0.8 and otherwise leave the agent in place.

use std::fmt::Write;

use super::{cell, weight, Generated, GeneratorError};

const HEADINGS: [&str; 4] = ["north", "east", "south", "west"];
const STEP: [(i64, i64); 4] = [(0, 1), (1, 0), (0, -1), (-1, 0)];
/// (name, heading offset) of each relative direction.
const RELATIVE: [(&str, usize); 4] = [("front", 0), ("right", 1), ("back", 2), ("left", 3)];
const MOVES: [(&str, usize); 4] = [("forward", 0), ("right", 1), ("back", 2), ("left", 3)];

pub const SLIP_SUCCESS: f64 = 0.8;

pub struct Layout {
    pub n: usize,
    blocked: Vec<bool>,
}

impl Layout {
    pub fn new(n: usize) -> Self {
        let mut blocked = vec![false; n * n];
        let mut block = |x: usize, y: usize| blocked[(y - 1) * n + (x - 1)] = true;
        for x in (2..n).step_by(2) {
            for y in (2..n).step_by(2) {
                block(x, y);
            }
        }
        block(1, n);
        if n >= 5 {
            block(3, 1);
        }
        Layout { n, blocked }
    }

    pub fn is_free(&self, x: i64, y: i64) -> bool {
        let n = self.n as i64;
        (1..=n).contains(&x) && (1..=n).contains(&y) && !self.blocked[((y - 1) * n + (x - 1)) as usize]
    }

    pub fn free_cells(&self) -> Vec<(usize, usize)> {
        let mut v = Vec::new();
        for y in 1..=self.n {
            for x in 1..=self.n {
                if self.is_free(x as i64, y as i64) {
                    v.push((x, y));
                }
            }
        }
        v
    }

    fn neighbor(&self, (x, y): (usize, usize), heading: usize) -> Option<(usize, usize)> {
        let (dx, dy) = STEP[heading % 4];
        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
        self.is_free(nx, ny).then_some((nx as usize, ny as usize))
    }

    pub fn goal(&self) -> (usize, usize) {
        (self.n, self.n)
    }
}

/// Literals fixing the four relative wall facts for `c` facing `heading`.
fn walls(layout: &Layout, c: (usize, usize), heading: usize, out: &mut String) {
    for (rel, off) in RELATIVE {
        if layout.neighbor(c, heading + off).is_some() {
            write!(out, " (not (wall-{rel}))").unwrap();
        } else {
            write!(out, " (wall-{rel})").unwrap();
        }
    }
}

pub fn generate(n: usize, stochastic: bool) -> Result<Generated, GeneratorError> {
    if n < 3 {
        return Err(GeneratorError(format!("localize needs n >= 3, got {n}")));
    }
    let layout = Layout::new(n);
    let cells = layout.free_cells();
    let name = format!("localize-{n}{}", if stochastic { "-s" } else { "" });

    let mut d = String::new();
    writeln!(d, "(define (domain {name})").unwrap();
    writeln!(d, "  (:types cell heading)").unwrap();
    write!(d, "  (:constants").unwrap();
    for &(x, y) in &cells {
        write!(d, " {}", cell(x, y)).unwrap();
    }
    writeln!(d, " - cell {} - heading)", HEADINGS.join(" ")).unwrap();
    writeln!(
        d,
        "  (:predicates (at ?c - cell) (facing ?h - heading) (wall-front) (wall-right) (wall-back) (wall-left))"
    )
    .unwrap();
    for (mv, off) in MOVES {
        writeln!(d, "  (:action {mv}").unwrap();
        writeln!(d, "    :precondition (not (wall-{}))", RELATIVE[off].0).unwrap();
        write!(d, "    :effect (and").unwrap();
        for &c in &cells {
            for h in 0..4 {
                let Some(t) = layout.neighbor(c, h + off) else {
                    continue;
                };
                let mut body = format!("(not (at {})) (at {})", cell(c.0, c.1), cell(t.0, t.1));
                walls(&layout, t, h, &mut body);
                let p = if stochastic && 2 * c.1 <= n { SLIP_SUCCESS } else { 1.0 };
                write!(
                    d,
                    "\n      (when (and (at {}) (facing {}))",
                    cell(c.0, c.1),
                    HEADINGS[h]
                )
                .unwrap();
                if p < 1.0 {
                    write!(
                        d,
                        " (probabilistic {} (and {body}) {} ()))",
                        weight(p),
                        weight(1.0 - p)
                    )
                    .unwrap();
                } else {
                    write!(d, " (and {body}))").unwrap();
                }
            }
        }
        writeln!(d, "))").unwrap();
    }
    writeln!(d, "  (:action turn").unwrap();
    write!(d, "    :effect (and").unwrap();
    for &c in &cells {
        for h in 0..4 {
            let h2 = (h + 1) % 4;
            let mut body = format!("(not (facing {})) (facing {})", HEADINGS[h], HEADINGS[h2]);
            walls(&layout, c, h2, &mut body);
            write!(
                d,
                "\n      (when (and (at {}) (facing {})) (and {body}))",
                cell(c.0, c.1),
                HEADINGS[h]
            )
            .unwrap();
        }
    }
    writeln!(d, "))").unwrap();
    for (rel, _) in RELATIVE {
        writeln!(d, "  (:action sense-{rel} :observe (wall-{rel}))").unwrap();
    }
    writeln!(d, ")").unwrap();

    let mut p = String::new();
    writeln!(p, "(define (problem {name})").unwrap();
    writeln!(p, "  (:domain {name})").unwrap();
    write!(p, "  (:init-belief (oneof-weighted").unwrap();
    let g = layout.goal();
    let starts: Vec<(usize, usize)> = cells.iter().copied().filter(|&c| c != g).collect();
    let w = weight(1.0 / (4 * starts.len()) as f64);
    for &c in &starts {
        for h in 0..4 {
            let mut frag = format!("(at {}) (facing {})", cell(c.0, c.1), HEADINGS[h]);
            for (rel, off) in RELATIVE {
                if layout.neighbor(c, h + off).is_none() {
                    write!(frag, " (wall-{rel})").unwrap();
                }
            }
            write!(p, "\n    {w} (and {frag})").unwrap();
        }
    }
    writeln!(p, "))").unwrap();
    writeln!(p, "  (:goal (at {})))", cell(g.0, g.1)).unwrap();

    Ok(Generated {
        name,
        domain: d,
        problem: p,
    })
}
