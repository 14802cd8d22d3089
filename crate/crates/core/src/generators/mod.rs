//! Benchmark instance generators.

pub mod localize;
pub mod maze;
pub mod minefield;
pub mod trap;
pub mod wumpus;

use crate::model::Problem;
use crate::parser::{parse_named, ParseError};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("{0}")]
pub struct GeneratorError(pub String);

/// Domain and problem text of a generated instance.
#[derive(Clone, Debug)]
pub struct Generated {
    pub name: String,
    pub domain: String,
    pub problem: String,
}

impl Generated {
    pub fn parse(&self) -> Result<Problem, ParseError> {
        parse_named(
            &format!("{}.ppond", self.name),
            &self.domain,
            &format!("{}.ppondp", self.name),
            &self.problem,
        )
    }
}

/// Grid cell name used by the grid generators.
pub(crate) fn cell(x: usize, y: usize) -> String {
    format!("c{x}-{y}")
}

/// Shortest decimal form that parses back to the same weight.
pub(crate) fn weight(p: f64) -> String {
    format!("{p:?}")
}
