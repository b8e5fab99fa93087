//! Exhaustive satisfiability check, used as a test oracle.

use super::{CnfError, Formula, PartialAssignment, SatResult};

/// Default bound on the number of variables enumerated.
pub const DEFAULT_VAR_CAP: usize = 24;

/// [`brute_force_sat_capped`] with [`DEFAULT_VAR_CAP`].
pub fn brute_force_sat(f: &Formula) -> Result<SatResult, CnfError> {
    brute_force_sat_capped(f, DEFAULT_VAR_CAP)
}

/// Enumerates all assignments of var(F) in binary counting order (first
/// variable is the lowest bit) and returns the first model found.
pub fn brute_force_sat_capped(f: &Formula, cap: usize) -> Result<SatResult, CnfError> {
    let vars = f.vars();
    if vars.len() > cap.min(63) {
        return Err(CnfError::VarCapExceeded { vars: vars.len(), cap });
    }
    let masks: Vec<(u64, u64)> = f
        .clauses()
        .iter()
        .map(|c| {
            c.lits().iter().fold((0u64, 0u64), |(p, n), l| {
                let bit = 1u64 << vars.binary_search(&l.var()).expect("variable of formula");
                if l.is_positive() {
                    (p | bit, n)
                } else {
                    (p, n | bit)
                }
            })
        })
        .collect();
    let full = if vars.is_empty() { 0 } else { u64::MAX >> (64 - vars.len()) };
    let mut bits = 0u64;
    loop {
        if masks.iter().all(|&(p, n)| bits & p != 0 || !bits & n != 0) {
            let witness = PartialAssignment::from_pairs(vars.iter().enumerate().map(|(i, &v)| (v, bits >> i & 1 == 1)))
                .expect("fresh assignment");
            return Ok(SatResult::Sat(witness));
        }
        if bits == full {
            return Ok(SatResult::Unsat);
        }
        bits += 1;
    }
}
