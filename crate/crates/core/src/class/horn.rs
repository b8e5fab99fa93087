//! Linear-time Horn satisfiability by unit propagation from all-false.

use std::collections::HashMap;

use super::{is_member, BaseClassSpec, ClassError};
use crate::cnf::{Formula, PartialAssignment, SatResult, Var};

/// Decides a Horn formula.
///
/// Every variable starts false. A clause whose negative literals are all
/// made false (their variables forced true) forces its positive literal, or
/// refutes the formula when it has none. Unforced variables stay 0.
pub fn solve_horn(f: &Formula) -> Result<SatResult, ClassError> {
    if !is_member(f, BaseClassSpec::HORN) {
        return Err(ClassError::NotMember(BaseClassSpec::HORN));
    }
    let mut index: HashMap<Var, usize> = HashMap::new();
    let mut vars: Vec<Var> = Vec::new();
    let mut id_of = |v: Var| {
        *index.entry(v).or_insert_with(|| {
            vars.push(v);
            vars.len() - 1
        })
    };

    // Per clause: remaining negative literals whose variable is not yet true,
    // and the positive variable if any.
    let mut pending: Vec<usize> = Vec::with_capacity(f.len());
    let mut head: Vec<Option<usize>> = Vec::with_capacity(f.len());
    let mut negative_in: Vec<Vec<usize>> = Vec::new();
    for (ci, clause) in f.clauses().iter().enumerate() {
        let mut negatives = 0;
        let mut positive = None;
        for lit in clause.lits() {
            let v = id_of(lit.var());
            if negative_in.len() <= v {
                negative_in.resize_with(v + 1, Vec::new);
            }
            if lit.is_positive() {
                positive = Some(v);
            } else {
                negatives += 1;
                negative_in[v].push(ci);
            }
        }
        pending.push(negatives);
        head.push(positive);
    }

    let mut value = vec![false; vars.len()];
    let mut queue = Vec::new();
    for ci in 0..pending.len() {
        if pending[ci] == 0 {
            match head[ci] {
                None => return Ok(SatResult::Unsat),
                Some(v) if !value[v] => {
                    value[v] = true;
                    queue.push(v);
                }
                Some(_) => {}
            }
        }
    }
    while let Some(v) = queue.pop() {
        for &ci in &negative_in[v] {
            pending[ci] -= 1;
            if pending[ci] == 0 {
                match head[ci] {
                    None => return Ok(SatResult::Unsat),
                    Some(w) if !value[w] => {
                        value[w] = true;
                        queue.push(w);
                    }
                    Some(_) => {}
                }
            }
        }
    }
    let witness = PartialAssignment::from_pairs(vars.into_iter().zip(value)).expect("each variable indexed once");
    Ok(SatResult::Sat(witness))
}
