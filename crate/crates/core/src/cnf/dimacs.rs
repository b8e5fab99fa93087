//! DIMACS CNF reading and writing.

use std::fmt::{self, Write as _};

use thiserror::Error;

use super::{Clause, ClauseId, Formula, Lit};

/// What went wrong while parsing, without the position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    EmptyInput,
    MalformedHeader(String),
    MissingHeader,
    InvalidToken(String),
    LiteralOutOfRange { literal: i64, declared: u32 },
    MissingTerminator,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::EmptyInput => write!(f, "empty input"),
            ParseErrorKind::MalformedHeader(h) => write!(f, "malformed header {h:?}"),
            ParseErrorKind::MissingHeader => write!(f, "clause data before the `p cnf` header"),
            ParseErrorKind::InvalidToken(t) => write!(f, "invalid token {t:?}"),
            ParseErrorKind::LiteralOutOfRange { literal, declared } => {
                write!(f, "literal {literal} outside the declared {declared} variables")
            }
            ParseErrorKind::MissingTerminator => write!(f, "last clause is not terminated by 0"),
        }
    }
}

/// A DIMACS parse failure at a 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

/// Non-fatal observations made while parsing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseWarnings {
    /// Clauses dropped because they contained `x` and `¬x`.
    pub tautologies: usize,
    /// Repeated literals removed from within clauses.
    pub duplicate_literals: usize,
    /// Clause count from the header, when it differs from the body.
    pub clause_count_mismatch: Option<(usize, usize)>,
}

impl ParseWarnings {
    pub fn is_empty(&self) -> bool {
        *self == ParseWarnings::default()
    }
}

#[derive(Debug, Clone)]
pub struct ParseOutput {
    pub formula: Formula,
    pub declared_vars: u32,
    pub warnings: ParseWarnings,
}

/// Parses DIMACS CNF text.
///
/// Clause ids follow the input order starting at 1; a dropped tautology still
/// consumes its id, so ids of later clauses match their position in the file.
pub fn parse_dimacs(text: &str) -> Result<ParseOutput, ParseError> {
    let err = |line, kind| ParseError { line, kind };
    if text.trim().is_empty() {
        return Err(err(1, ParseErrorKind::EmptyInput));
    }

    let mut header: Option<(u32, usize)> = None;
    let mut warnings = ParseWarnings::default();
    let mut clauses = Vec::new();
    let mut current: Vec<Lit> = Vec::new();
    let mut current_line = 0;
    let mut next_id = 1u32;
    let mut seen_clauses = 0usize;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(err(line_no, ParseErrorKind::MalformedHeader(line.into())));
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let parsed = match parts.as_slice() {
                ["p", "cnf", v, c] => v.parse::<u32>().ok().zip(c.parse::<usize>().ok()),
                _ => None,
            };
            match parsed {
                Some(h) => header = Some(h),
                None => return Err(err(line_no, ParseErrorKind::MalformedHeader(line.into()))),
            }
            continue;
        }
        let Some((declared, _)) = header else {
            return Err(err(line_no, ParseErrorKind::MissingHeader));
        };
        for token in line.split_whitespace() {
            let code: i64 = token.parse().map_err(|_| err(line_no, ParseErrorKind::InvalidToken(token.into())))?;
            if code == 0 {
                seen_clauses += 1;
                let id = ClauseId(next_id);
                next_id += 1;
                let before = current.len();
                current.sort_unstable();
                current.dedup();
                warnings.duplicate_literals += before - current.len();
                match Clause::new(id, std::mem::take(&mut current)) {
                    Ok(clause) => clauses.push(clause),
                    Err(_) => warnings.tautologies += 1,
                }
                continue;
            }
            if code.unsigned_abs() > declared as u64 {
                return Err(err(line_no, ParseErrorKind::LiteralOutOfRange { literal: code, declared }));
            }
            current.push(Lit::from_dimacs(code).expect("nonzero literal"));
            current_line = line_no;
        }
    }

    let Some((declared_vars, declared_clauses)) = header else {
        return Err(err(1, ParseErrorKind::MissingHeader));
    };
    if !current.is_empty() {
        return Err(err(current_line, ParseErrorKind::MissingTerminator));
    }
    if declared_clauses != seen_clauses {
        warnings.clause_count_mismatch = Some((declared_clauses, seen_clauses));
    }
    Ok(ParseOutput { formula: Formula::from_sorted(clauses), declared_vars, warnings })
}

/// Writes `f` as DIMACS, clauses in id order.
pub fn to_dimacs(f: &Formula) -> String {
    to_dimacs_with_comments(f, &[])
}

/// Writes `f` as DIMACS, preceded by `c` comment lines.
pub fn to_dimacs_with_comments(f: &Formula, comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "c {c}");
    }
    let _ = writeln!(out, "p cnf {} {}", f.max_var(), f.len());
    for clause in f.clauses() {
        for lit in clause.lits() {
            let _ = write!(out, "{} ", lit.to_dimacs());
        }
        out.push_str("0\n");
    }
    out
}
