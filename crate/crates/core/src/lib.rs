//! Goal-POMDP planning with RTDP over beliefs and delete-relaxation
//! heuristics that account for sensing.

pub mod bench;
pub mod engine;
pub mod generators;
pub mod heuristic;
pub mod mdp;
pub mod model;
pub mod oracle;
pub mod parser;
pub mod relax;
pub mod solver;
pub mod table_io;

pub use model::{
    belief_key, most_likely_state, Action, ActionId, BeliefKey, BeliefState, FactId, Problem,
    State,
};
pub use parser::{parse_problem, serialize_problem, ParseError};
