//! Reader for the `.ppond` / `.ppondp` problem language.
//!
//! The grammar is a small PDDL dialect with probabilistic effects,
//! `:observe` lists on actions and weighted `:init-belief` groups; see
//! `docs/grammar.ebnf`.

pub mod ast;
mod ground;
pub mod serialize;
pub mod sexpr;

use std::fmt;
use std::path::Path;

use crate::model::Problem;

pub use serialize::serialize_problem;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceSpan {
    pub file: String,
    pub line: usize,
    pub column: usize,
}

impl SourceSpan {
    pub fn unknown(file: &str) -> Self {
        SourceSpan {
            file: file.to_string(),
            line: 1,
            column: 1,
        }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{span}: {message}")]
pub struct ParseError {
    pub span: SourceSpan,
    pub message: String,
}

impl ParseError {
    pub fn new(span: SourceSpan, message: impl Into<String>) -> Self {
        ParseError {
            span,
            message: message.into(),
        }
    }
}

/// Parses and grounds a domain/problem pair.
pub fn parse_problem(domain_text: &str, problem_text: &str) -> Result<Problem, ParseError> {
    parse_named("domain", domain_text, "problem", problem_text)
}

/// As [`parse_problem`], with file names used in diagnostics.
pub fn parse_named(
    domain_file: &str,
    domain_text: &str,
    problem_file: &str,
    problem_text: &str,
) -> Result<Problem, ParseError> {
    let d = ast::domain(&sexpr::read(domain_file, domain_text)?)?;
    let p = ast::problem(&sexpr::read(problem_file, problem_text)?)?;
    ground::ground(&d, &p)
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Parse(#[from] ParseError),
}

pub fn load_problem(domain: &Path, problem: &Path) -> Result<Problem, LoadError> {
    let read = |p: &Path| {
        std::fs::read_to_string(p).map_err(|source| LoadError::Io {
            path: p.display().to_string(),
            source,
        })
    };
    let dt = read(domain)?;
    let pt = read(problem)?;
    Ok(parse_named(
        &domain.display().to_string(),
        &dt,
        &problem.display().to_string(),
        &pt,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FactId;

    const DOMAIN: &str = "(define (domain tiny)
      (:predicates (done))
      (:action finish :effect (done)))";
    const PROBLEM: &str = "(define (problem t1) (:domain tiny) (:goal (done)))";

    #[test]
    fn minimal_model() {
        let p = parse_problem(DOMAIN, PROBLEM).unwrap();
        assert_eq!(p.num_facts(), 2);
        assert_eq!(p.actions.len(), 1);
        assert_eq!(p.goal, vec![FactId(0)]);
        assert_eq!(p.fact_name(FactId(1)), "(not (done))");
    }

    #[test]
    fn outcome_sum_is_checked() {
        let d = "(define (domain d) (:predicates (a) (b))
          (:action x :effect (probabilistic 0.5 (a) 0.4 (b))))";
        let e = parse_problem(d, "(define (problem p) (:domain d) (:goal (a)))").unwrap_err();
        assert!(e.message.contains("outcomes sum to 0.9"), "{e}");
        assert_eq!(e.span.line, 2);
    }

    #[test]
    fn unknown_names_are_reported() {
        let e = parse_problem(DOMAIN, "(define (problem p) (:domain tiny) (:goal (gone)))")
            .unwrap_err();
        assert!(e.message.contains("unknown predicate"));
        let d = "(define (domain d) (:predicates (at ?x))
          (:action x :effect (at nowhere)))";
        let e = parse_problem(d, "(define (problem p) (:domain d) (:goal (at nowhere)))")
            .unwrap_err();
        assert!(e.message.contains("unknown object"), "{e}");
    }

    #[test]
    fn overlapping_fragments() {
        let d = "(define (domain d) (:predicates (a) (g)) (:action x :effect (g)))";
        let p = "(define (problem p) (:domain d)
          (:init-belief (oneof-weighted 0.5 (a) 0.5 ()) (oneof-weighted 0.5 (not (a)) 0.5 ()))
          (:goal (g)))";
        let e = parse_problem(d, p).unwrap_err();
        assert!(e.message.contains("overlap"), "{e}");
    }

    #[test]
    fn static_facts_are_fixed_and_pruned() {
        let d = "(define (domain d) (:types cell)
          (:predicates (at ?c - cell) (adj ?a ?b - cell))
          (:action move :parameters (?a ?b - cell)
             :precondition (and (at ?a) (adj ?a ?b))
             :effect (and (at ?b) (not (at ?a)))))";
        let p = "(define (problem p) (:domain d) (:objects c1 c2 c3 - cell)
          (:init (at c1) (adj c1 c2) (adj c2 c3))
          (:goal (at c3)))";
        let prob = parse_problem(d, p).unwrap();
        assert_eq!(prob.actions.len(), 2);
        assert_eq!(prob.actions[0].name, "move_c1_c2");
        assert_eq!(prob.num_facts(), 6);
        assert_eq!(prob.fixed_facts, vec!["(adj c1 c2)", "(adj c2 c3)"]);
        // the adjacency literal is gone from the grounded precondition
        assert_eq!(prob.actions[0].precondition.len(), 1);
    }

    #[test]
    fn syntax_error_has_position() {
        let e = parse_problem("(define (domain d)\n  (:predicates (a)", PROBLEM).unwrap_err();
        assert_eq!(e.to_string(), "domain:2:3: unbalanced parenthesis");
    }
}
