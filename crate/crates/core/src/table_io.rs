//! Text format for belief value tables.
//!
//! ```text
//! # beliefplan value table 1
//! # problem <sha256 of the serialized problem>
//! # heuristic hff-b
//! # seed 1
//! # discretization none
//! <state hex>:<level>;<state hex>:<level><TAB><value>
//! ```
//!
//! Entries are sorted by key. Levels are the integers of the belief key
//! (probability in units of 1e-9, or the discretized level). Values use the
//! shortest representation that reads back to the same float; `inf` marks
//! dead ends.

use std::fmt::Write;

use sha2::{Digest, Sha256};

use crate::model::{BeliefKey, Problem, State};
use crate::parser::serialize_problem;
use crate::solver::BeliefValueTable;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TableHeader {
    pub problem_hash: String,
    pub heuristic: String,
    pub seed: u64,
    pub discretization: Option<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableFile {
    pub header: TableHeader,
    pub entries: Vec<(BeliefKey, f64)>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TableError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("table was written for problem {found}, expected {expected}")]
    ProblemMismatch { expected: String, found: String },
    #[error("table uses discretization {found:?}, expected {expected:?}")]
    DiscretizationMismatch {
        expected: Option<u32>,
        found: Option<u32>,
    },
    #[error("line {line}: state does not fit the problem")]
    ForeignState { line: usize },
}

/// SHA-256 over the canonical serialization of the problem.
pub fn problem_hash(p: &Problem) -> String {
    let (d, q) = serialize_problem(p);
    let mut h = Sha256::new();
    h.update(d.as_bytes());
    h.update([0u8]);
    h.update(q.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn format_value(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{v:?}")
    }
}

pub fn write_entries(header: &TableHeader, entries: &[(&BeliefKey, f64)]) -> String {
    let mut out = String::new();
    writeln!(out, "# beliefplan value table {FORMAT_VERSION}").unwrap();
    writeln!(out, "# problem {}", header.problem_hash).unwrap();
    writeln!(out, "# heuristic {}", header.heuristic).unwrap();
    writeln!(out, "# seed {}", header.seed).unwrap();
    match header.discretization {
        Some(d) => writeln!(out, "# discretization {d}").unwrap(),
        None => writeln!(out, "# discretization none").unwrap(),
    }
    for (k, v) in entries {
        let parts: Vec<String> = k.0.iter().map(|(s, l)| format!("{}:{l}", s.to_hex())).collect();
        writeln!(out, "{}\t{}", parts.join(";"), format_value(*v)).unwrap();
    }
    out
}

pub fn write_table(table: &BeliefValueTable, header: &TableHeader) -> String {
    write_entries(header, &table.sorted_entries())
}

pub fn parse_table(text: &str) -> Result<TableFile, TableError> {
    let syntax = |line: usize, message: &str| TableError::Syntax {
        line,
        message: message.to_string(),
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut header_field = |name: &str| -> Result<String, TableError> {
        let (no, l) = lines
            .next()
            .ok_or_else(|| syntax(0, &format!("missing `{name}` header")))?;
        l.strip_prefix("# ")
            .and_then(|r| r.strip_prefix(name))
            .and_then(|r| r.strip_prefix(' '))
            .map(str::to_string)
            .ok_or_else(|| syntax(no, &format!("expected `# {name} ...`")))
    };
    let version = header_field("beliefplan value table")?;
    if version != FORMAT_VERSION.to_string() {
        return Err(syntax(1, &format!("unsupported format version `{version}`")));
    }
    let problem_hash = header_field("problem")?;
    if problem_hash.len() != 64 || !problem_hash.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(syntax(2, "problem hash must be 64 hex digits"));
    }
    let heuristic = header_field("heuristic")?;
    let seed = header_field("seed")?
        .parse()
        .map_err(|_| syntax(4, "invalid seed"))?;
    let discretization = match header_field("discretization")?.as_str() {
        "none" => None,
        d => Some(
            d.parse()
                .ok()
                .filter(|&d: &u32| d > 0)
                .ok_or_else(|| syntax(5, "invalid discretization"))?,
        ),
    };
    let mut entries: Vec<(BeliefKey, f64)> = Vec::new();
    for (no, l) in lines {
        let (key, value) = l
            .split_once('\t')
            .ok_or_else(|| syntax(no, "expected key and value separated by a tab"))?;
        let value = match value {
            "inf" => f64::INFINITY,
            v => v
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| syntax(no, "value must be a non-negative number or `inf`"))?,
        };
        let mut parts = Vec::new();
        for part in key.split(';') {
            let (hex, level) = part
                .split_once(':')
                .ok_or_else(|| syntax(no, "expected `state:level`"))?;
            if !hex.bytes().all(|b| b.is_ascii_hexdigit()) {
                return Err(syntax(no, "state must be hex"));
            }
            let s = State::from_hex(hex).ok_or_else(|| syntax(no, "invalid state"))?;
            if !level.bytes().all(|b| b.is_ascii_digit()) {
                return Err(syntax(no, "invalid level"));
            }
            let level: u64 = level.parse().map_err(|_| syntax(no, "invalid level"))?;
            parts.push((s, level));
        }
        if parts.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(syntax(no, "states of a key must be strictly increasing"));
        }
        let k = BeliefKey(parts);
        if entries.last().is_some_and(|(prev, _)| *prev >= k) {
            return Err(syntax(no, "entries must be sorted and unique"));
        }
        entries.push((k, value));
    }
    Ok(TableFile {
        header: TableHeader {
            problem_hash,
            heuristic,
            seed,
            discretization,
        },
        entries,
    })
}

/// Parses a table and checks it against `problem`.
pub fn load_table(
    text: &str,
    problem: &Problem,
    discretization: Option<u32>,
) -> Result<(TableHeader, BeliefValueTable), TableError> {
    let file = parse_table(text)?;
    let expected = problem_hash(problem);
    if file.header.problem_hash != expected {
        return Err(TableError::ProblemMismatch {
            expected,
            found: file.header.problem_hash,
        });
    }
    if file.header.discretization != discretization {
        return Err(TableError::DiscretizationMismatch {
            expected: discretization,
            found: file.header.discretization,
        });
    }
    let n = problem.num_facts();
    let words = n.div_ceil(64);
    let mut table = BeliefValueTable::new(discretization);
    for (i, (k, v)) in file.entries.into_iter().enumerate() {
        let fits = k
            .0
            .iter()
            .all(|(s, _)| s.num_bits() == words * 64 && s.is_consistent(n) && s.facts().iter().all(|f| f.index() < n));
        if !fits {
            // entries start on line 6
            return Err(TableError::ForeignState { line: i + 6 });
        }
        table.insert_key(k, v);
    }
    Ok((file.header, table))
}
