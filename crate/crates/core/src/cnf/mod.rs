//! CNF data model: literals, clauses with stable ids, formulas, partial
//! assignments and incidence-graph vertices.
//!
//! A [`Formula`] keeps its clauses sorted by [`ClauseId`]. Instantiation keeps
//! the id of every surviving clause, so a clause of `F[τ]` can always be traced
//! back to the clause of `F` it came from.

mod brute;
mod dimacs;
mod graph;

pub use brute::{brute_force_sat, brute_force_sat_capped, DEFAULT_VAR_CAP};
pub use dimacs::{
    parse_dimacs, to_dimacs, to_dimacs_with_comments, ParseError, ParseErrorKind, ParseOutput, ParseWarnings,
};
pub use graph::{bfs_distances, connected_components, shortest_path, IncidenceIndex};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A propositional variable, identified by a positive integer.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Var(pub u32);

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

/// Identifier of a clause, stable under instantiation.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClauseId(pub u32);

impl fmt::Display for ClauseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

/// A literal: a variable together with a polarity.
///
/// Literals order by variable first and put the positive literal first.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(into = "i64", try_from = "i64")]
pub struct Lit {
    var: Var,
    negative: bool,
}

impl Lit {
    pub fn new(var: Var, positive: bool) -> Lit {
        assert!(var.0 >= 1, "variable ids start at 1");
        Lit { var, negative: !positive }
    }

    pub fn pos(var: u32) -> Lit {
        Lit::new(Var(var), true)
    }

    pub fn neg(var: u32) -> Lit {
        Lit::new(Var(var), false)
    }

    /// Builds a literal from its DIMACS encoding; `None` for 0.
    pub fn from_dimacs(code: i64) -> Option<Lit> {
        if code == 0 || code.unsigned_abs() > u32::MAX as u64 {
            return None;
        }
        Some(Lit::new(Var(code.unsigned_abs() as u32), code > 0))
    }

    pub fn to_dimacs(self) -> i64 {
        if self.negative {
            -(self.var.0 as i64)
        } else {
            self.var.0 as i64
        }
    }

    pub fn var(self) -> Var {
        self.var
    }

    pub fn is_positive(self) -> bool {
        !self.negative
    }

    pub fn negated(self) -> Lit {
        Lit { var: self.var, negative: !self.negative }
    }

    /// Truth value of the literal under `value` for its variable.
    pub fn eval(self, value: bool) -> bool {
        value != self.negative
    }
}

impl From<Lit> for i64 {
    fn from(lit: Lit) -> i64 {
        lit.to_dimacs()
    }
}

impl TryFrom<i64> for Lit {
    type Error = String;
    fn try_from(code: i64) -> Result<Lit, String> {
        Lit::from_dimacs(code).ok_or_else(|| format!("invalid literal {code}"))
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// Errors raised when building or querying CNF values.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CnfError {
    #[error("clause {0} contains a complementary pair")]
    ComplementaryPair(ClauseId),
    #[error("clause id {0} occurs twice")]
    DuplicateClauseId(ClauseId),
    #[error("vertex {0} is not present in the formula")]
    VertexNotPresent(Vertex),
    #[error("{vars} variables exceed the brute-force cap of {cap}")]
    VarCapExceeded { vars: usize, cap: usize },
    #[error("variable {0} is assigned twice with different values")]
    ConflictingBinding(Var),
}

/// A clause: a set of literals without complementary pairs.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct Clause {
    id: ClauseId,
    lits: Vec<Lit>,
}

impl Clause {
    /// Sorts and deduplicates `lits`; rejects complementary pairs.
    pub fn new(id: ClauseId, mut lits: Vec<Lit>) -> Result<Clause, CnfError> {
        lits.sort_unstable();
        lits.dedup();
        if lits.windows(2).any(|w| w[0].var == w[1].var) {
            return Err(CnfError::ComplementaryPair(id));
        }
        Ok(Clause { id, lits })
    }

    pub fn id(&self) -> ClauseId {
        self.id
    }

    pub fn lits(&self) -> &[Lit] {
        &self.lits
    }

    pub fn len(&self) -> usize {
        self.lits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lits.is_empty()
    }

    /// Variables of the clause in increasing order.
    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.lits.iter().map(|l| l.var)
    }

    /// The literal of `var` in this clause, if any.
    pub fn lit_of(&self, var: Var) -> Option<Lit> {
        self.lits.binary_search_by(|l| l.var.cmp(&var)).ok().map(|i| self.lits[i])
    }

    pub fn contains_var(&self, var: Var) -> bool {
        self.lit_of(var).is_some()
    }

    /// `None` if the clause is satisfied by `tau`, otherwise the clause with
    /// its falsified literals removed.
    pub fn instantiate(&self, tau: &PartialAssignment) -> Option<Clause> {
        if tau.is_empty() {
            return Some(self.clone());
        }
        let mut kept = Vec::with_capacity(self.lits.len());
        for &lit in &self.lits {
            match tau.get(lit.var) {
                Some(value) if lit.eval(value) => return None,
                Some(_) => {}
                None => kept.push(lit),
            }
        }
        Some(Clause { id: self.id, lits: kept })
    }

    /// The same clause with every literal negated.
    pub fn flipped(&self) -> Clause {
        Clause { id: self.id, lits: self.lits.iter().map(|l| l.negated()).collect() }
    }
}

/// A CNF formula: clauses with unique ids, kept sorted by id.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<Clause>", into = "Vec<Clause>")]
pub struct Formula {
    clauses: Vec<Clause>,
}

impl TryFrom<Vec<Clause>> for Formula {
    type Error = CnfError;
    fn try_from(clauses: Vec<Clause>) -> Result<Formula, CnfError> {
        Formula::new(clauses)
    }
}

impl From<Formula> for Vec<Clause> {
    fn from(f: Formula) -> Vec<Clause> {
        f.clauses
    }
}

impl Formula {
    pub fn empty() -> Formula {
        Formula::default()
    }

    /// Sorts clauses by id; rejects duplicate ids.
    pub fn new(mut clauses: Vec<Clause>) -> Result<Formula, CnfError> {
        clauses.sort_by_key(|c| c.id);
        if let Some(w) = clauses.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(CnfError::DuplicateClauseId(w[0].id));
        }
        Ok(Formula { clauses })
    }

    pub(crate) fn from_sorted(clauses: Vec<Clause>) -> Formula {
        debug_assert!(clauses.windows(2).all(|w| w[0].id < w[1].id));
        Formula { clauses }
    }

    /// Builds a formula from DIMACS-style literal lists; ids are 1, 2, ...
    pub fn from_lits(clauses: &[&[i64]]) -> Result<Formula, CnfError> {
        Formula::from_lit_lists(clauses.iter().map(|c| c.to_vec()))
    }

    /// Owned-input variant of [`Formula::from_lits`].
    pub fn from_lit_lists<I: IntoIterator<Item = Vec<i64>>>(clauses: I) -> Result<Formula, CnfError> {
        let built = clauses
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                let lits = c.iter().map(|&code| Lit::from_dimacs(code).expect("literal 0 in clause")).collect();
                Clause::new(ClauseId(i as u32 + 1), lits)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Formula::new(built)
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    /// ‖F‖, the total number of literal occurrences.
    pub fn size(&self) -> usize {
        self.clauses.iter().map(Clause::len).sum()
    }

    /// var(F) in increasing order.
    pub fn vars(&self) -> Vec<Var> {
        let mut vars: Vec<Var> = self.clauses.iter().flat_map(|c| c.vars()).collect();
        vars.sort_unstable();
        vars.dedup();
        vars
    }

    pub fn max_var(&self) -> u32 {
        self.clauses.iter().filter_map(|c| c.lits.last()).map(|l| l.var.0).max().unwrap_or(0)
    }

    pub fn clause_ids(&self) -> Vec<ClauseId> {
        self.clauses.iter().map(|c| c.id).collect()
    }

    pub fn clause(&self, id: ClauseId) -> Option<&Clause> {
        self.clauses.binary_search_by(|c| c.id.cmp(&id)).ok().map(|i| &self.clauses[i])
    }

    pub fn contains_clause(&self, id: ClauseId) -> bool {
        self.clause(id).is_some()
    }

    pub fn contains_var(&self, var: Var) -> bool {
        self.clauses.iter().any(|c| c.contains_var(var))
    }

    pub fn has_empty_clause(&self) -> bool {
        self.clauses.iter().any(Clause::is_empty)
    }

    /// F[τ]: satisfied clauses vanish, falsified literals are removed.
    pub fn apply(&self, tau: &PartialAssignment) -> Formula {
        Formula { clauses: self.clauses.iter().filter_map(|c| c.instantiate(tau)).collect() }
    }

    /// Shorthand for `F[var = value]`.
    pub fn assign(&self, var: Var, value: bool) -> Formula {
        Formula {
            clauses: self
                .clauses
                .iter()
                .filter_map(|c| match c.lit_of(var) {
                    None => Some(c.clone()),
                    Some(l) if l.eval(value) => None,
                    Some(_) => {
                        Some(Clause { id: c.id, lits: c.lits.iter().copied().filter(|l| l.var != var).collect() })
                    }
                })
                .collect(),
        }
    }

    /// The subformula made of the clauses whose ids are listed.
    pub fn restrict_to(&self, ids: &[ClauseId]) -> Formula {
        Formula { clauses: self.clauses.iter().filter(|c| ids.binary_search(&c.id).is_ok()).cloned().collect() }
    }

    /// Every literal negated.
    pub fn flipped(&self) -> Formula {
        Formula { clauses: self.clauses.iter().map(Clause::flipped).collect() }
    }

    /// Whether `tau` satisfies every clause.
    pub fn is_satisfied_by(&self, tau: &PartialAssignment) -> bool {
        self.clauses.iter().all(|c| c.instantiate(tau).is_none())
    }
}

/// Convenience for `F.apply(tau)`.
pub fn apply_assignment(f: &Formula, tau: &PartialAssignment) -> Formula {
    f.apply(tau)
}

/// A partial map from variables to truth values.
///
/// Serializes as a list of DIMACS literals, the true ones.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default, Serialize, Deserialize)]
#[serde(into = "Vec<Lit>", try_from = "Vec<Lit>")]
pub struct PartialAssignment {
    bindings: BTreeMap<Var, bool>,
}

impl From<PartialAssignment> for Vec<Lit> {
    fn from(tau: PartialAssignment) -> Vec<Lit> {
        tau.lits()
    }
}

impl TryFrom<Vec<Lit>> for PartialAssignment {
    type Error = CnfError;
    fn try_from(lits: Vec<Lit>) -> Result<PartialAssignment, CnfError> {
        let mut tau = PartialAssignment::new();
        for lit in lits {
            tau.bind(lit.var, lit.is_positive())?;
        }
        Ok(tau)
    }
}

impl PartialAssignment {
    pub fn new() -> PartialAssignment {
        PartialAssignment::default()
    }

    pub fn from_pairs<I: IntoIterator<Item = (Var, bool)>>(pairs: I) -> Result<PartialAssignment, CnfError> {
        let mut tau = PartialAssignment::new();
        for (var, value) in pairs {
            tau.bind(var, value)?;
        }
        Ok(tau)
    }

    pub fn get(&self, var: Var) -> Option<bool> {
        self.bindings.get(&var).copied()
    }

    pub fn contains(&self, var: Var) -> bool {
        self.bindings.contains_key(&var)
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    /// Binds `var`; rebinding to the same value is a no-op.
    pub fn bind(&mut self, var: Var, value: bool) -> Result<(), CnfError> {
        match self.bindings.insert(var, value) {
            Some(old) if old != value => {
                self.bindings.insert(var, old);
                Err(CnfError::ConflictingBinding(var))
            }
            _ => Ok(()),
        }
    }

    /// Binds `var`, overwriting any previous value.
    pub fn set(&mut self, var: Var, value: bool) {
        self.bindings.insert(var, value);
    }

    /// Removes the binding of `var`, returning its value.
    pub fn unset(&mut self, var: Var) -> Option<bool> {
        self.bindings.remove(&var)
    }

    pub fn with(&self, var: Var, value: bool) -> PartialAssignment {
        let mut next = self.clone();
        next.set(var, value);
        next
    }

    /// Union of two assignments; fails if they disagree on a variable.
    pub fn union(&self, other: &PartialAssignment) -> Result<PartialAssignment, CnfError> {
        let mut out = self.clone();
        for (&var, &value) in &other.bindings {
            out.bind(var, value)?;
        }
        Ok(out)
    }

    pub fn is_compatible(&self, other: &PartialAssignment) -> bool {
        other.bindings.iter().all(|(v, &b)| self.get(*v).is_none_or(|a| a == b))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Var, bool)> + '_ {
        self.bindings.iter().map(|(&v, &b)| (v, b))
    }

    pub fn domain(&self) -> impl Iterator<Item = Var> + '_ {
        self.bindings.keys().copied()
    }

    /// The bindings as literals made true, in variable order.
    pub fn lits(&self) -> Vec<Lit> {
        self.iter().map(|(v, b)| Lit::new(v, b)).collect()
    }

    /// The restriction to the variables accepted by `keep`.
    pub fn restricted<F: Fn(Var) -> bool>(&self, keep: F) -> PartialAssignment {
        PartialAssignment { bindings: self.bindings.iter().filter(|(v, _)| keep(**v)).map(|(&v, &b)| (v, b)).collect() }
    }

    /// Every value negated.
    pub fn flipped(&self) -> PartialAssignment {
        PartialAssignment { bindings: self.bindings.iter().map(|(&v, &b)| (v, !b)).collect() }
    }
}

/// A vertex of the incidence graph.
///
/// Variables order before clauses; within a kind, by id.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Vertex {
    Var(Var),
    Clause(ClauseId),
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Vertex::Var(v) => write!(f, "{v}"),
            Vertex::Clause(c) => write!(f, "{c}"),
        }
    }
}

impl Vertex {
    pub fn as_clause(self) -> Option<ClauseId> {
        match self {
            Vertex::Clause(c) => Some(c),
            Vertex::Var(_) => None,
        }
    }

    pub fn as_var(self) -> Option<Var> {
        match self {
            Vertex::Var(v) => Some(v),
            Vertex::Clause(_) => None,
        }
    }

    /// Whether the vertex exists in the incidence graph of `f`.
    pub fn is_in(self, f: &Formula) -> bool {
        match self {
            Vertex::Var(v) => f.contains_var(v),
            Vertex::Clause(c) => f.contains_clause(c),
        }
    }
}

/// A path in the incidence graph, listed vertex by vertex.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IncidencePath {
    vertices: Vec<Vertex>,
}

impl IncidencePath {
    pub fn new(vertices: Vec<Vertex>) -> IncidencePath {
        IncidencePath { vertices }
    }

    pub fn single(v: Vertex) -> IncidencePath {
        IncidencePath { vertices: vec![v] }
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    /// Number of edges.
    pub fn len(&self) -> usize {
        self.vertices.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn first(&self) -> Option<Vertex> {
        self.vertices.first().copied()
    }

    pub fn last(&self) -> Option<Vertex> {
        self.vertices.last().copied()
    }

    /// Clause vertices in path order.
    pub fn clauses(&self) -> Vec<ClauseId> {
        self.vertices.iter().filter_map(|v| v.as_clause()).collect()
    }

    /// Variable vertices in path order.
    pub fn variables(&self) -> Vec<Var> {
        self.vertices.iter().filter_map(|v| v.as_var()).collect()
    }

    pub fn reversed(&self) -> IncidencePath {
        let mut vertices = self.vertices.clone();
        vertices.reverse();
        IncidencePath { vertices }
    }

    /// Edges as ordered pairs `(variable, clause)`.
    pub fn edges(&self) -> Vec<(Var, ClauseId)> {
        self.vertices
            .windows(2)
            .filter_map(|w| match (w[0], w[1]) {
                (Vertex::Var(v), Vertex::Clause(c)) | (Vertex::Clause(c), Vertex::Var(v)) => Some((v, c)),
                _ => None,
            })
            .collect()
    }

    /// Checks that the path is nonempty, alternates kinds, has no repeated
    /// vertex and uses only incidences of `f`.
    pub fn check_in(&self, f: &Formula) -> Result<(), String> {
        if self.vertices.is_empty() {
            return Err("path has no vertices".into());
        }
        let mut seen = std::collections::HashSet::new();
        for &v in &self.vertices {
            if !seen.insert(v) {
                return Err(format!("vertex {v} repeats on the path"));
            }
            if !v.is_in(f) {
                return Err(format!("vertex {v} is not in the formula"));
            }
        }
        for w in self.vertices.windows(2) {
            let (var, clause) = match (w[0], w[1]) {
                (Vertex::Var(v), Vertex::Clause(c)) | (Vertex::Clause(c), Vertex::Var(v)) => (v, c),
                _ => return Err(format!("{} and {} are of the same kind", w[0], w[1])),
            };
            let incident = f.clause(clause).is_some_and(|c| c.contains_var(var));
            if !incident {
                return Err(format!("{var} does not occur in {clause}"));
            }
        }
        Ok(())
    }
}

/// Outcome of a satisfiability check.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum SatResult {
    /// Satisfiable; the witness is total over the variables of the formula.
    Sat(PartialAssignment),
    Unsat,
}

impl SatResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SatResult::Sat(_))
    }

    pub fn witness(&self) -> Option<&PartialAssignment> {
        match self {
            SatResult::Sat(w) => Some(w),
            SatResult::Unsat => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(clauses: &[&[i64]]) -> Formula {
        Formula::from_lits(clauses).unwrap()
    }

    #[test]
    fn clause_dedups_and_rejects_complements() {
        let c = Clause::new(ClauseId(1), vec![Lit::pos(2), Lit::neg(1), Lit::pos(2)]).unwrap();
        assert_eq!(c.lits(), &[Lit::neg(1), Lit::pos(2)]);
        assert_eq!(
            Clause::new(ClauseId(4), vec![Lit::pos(1), Lit::neg(1)]),
            Err(CnfError::ComplementaryPair(ClauseId(4)))
        );
    }

    #[test]
    fn apply_examples() {
        let x = Var(1);
        let g = f(&[&[1, -2]]);
        assert!(g.assign(x, true).is_empty());
        assert_eq!(g.assign(x, false), f(&[&[-2]]));
        let h = f(&[&[1], &[-1, 2]]);
        let out = h.assign(x, true);
        assert_eq!(out.len(), 1);
        assert_eq!(out.clauses()[0].id(), ClauseId(2));
        assert_eq!(out.clauses()[0].lits(), &[Lit::pos(2)]);
    }

    #[test]
    fn instantiation_may_leave_empty_clause() {
        let g = f(&[&[1]]);
        let out = g.assign(Var(1), false);
        assert!(out.has_empty_clause());
        assert_eq!(out.size(), 0);
    }

    #[test]
    fn assignment_bind_conflict() {
        let mut tau = PartialAssignment::new();
        tau.bind(Var(3), true).unwrap();
        tau.bind(Var(3), true).unwrap();
        assert_eq!(tau.bind(Var(3), false), Err(CnfError::ConflictingBinding(Var(3))));
        assert_eq!(tau.get(Var(3)), Some(true));
    }

    #[test]
    fn assignment_json_is_literal_list() {
        let tau = PartialAssignment::from_pairs([(Var(2), false), (Var(1), true)]).unwrap();
        let json = serde_json::to_string(&tau).unwrap();
        assert_eq!(json, "[1,-2]");
        let back: PartialAssignment = serde_json::from_str(&json).unwrap();
        assert_eq!(back, tau);
    }

    #[test]
    fn path_check() {
        let g = f(&[&[1, 2], &[2, 3]]);
        let p = IncidencePath::new(vec![Vertex::Clause(ClauseId(1)), Vertex::Var(Var(2)), Vertex::Clause(ClauseId(2))]);
        assert!(p.check_in(&g).is_ok());
        assert_eq!(p.len(), 2);
        let bad = IncidencePath::new(vec![Vertex::Clause(ClauseId(1)), Vertex::Var(Var(3))]);
        assert!(bad.check_in(&g).is_err());
    }
}
