//! Linear-time 2-SAT via the implication graph and Tarjan's SCC algorithm.

use std::collections::HashMap;

use super::{is_member, BaseClassSpec, ClassError};
use crate::cnf::{Formula, Lit, PartialAssignment, SatResult, Var};

/// Decides a Krom formula.
///
/// A binary clause `{a, b}` adds `¬a → b` and `¬b → a`; a unit `{a}` adds
/// `¬a → a`. The formula is unsatisfiable iff some variable shares a strongly
/// connected component with its negation. Otherwise each variable takes the
/// value of whichever of its literals comes later in topological order.
pub fn solve_krom(f: &Formula) -> Result<SatResult, ClassError> {
    if !is_member(f, BaseClassSpec::KROM) {
        return Err(ClassError::NotMember(BaseClassSpec::KROM));
    }
    if f.has_empty_clause() {
        return Ok(SatResult::Unsat);
    }
    let mut index: HashMap<Var, usize> = HashMap::new();
    let mut vars: Vec<Var> = Vec::new();
    let mut node = |lit: Lit| {
        let v = *index.entry(lit.var()).or_insert_with(|| {
            vars.push(lit.var());
            vars.len() - 1
        });
        2 * v + usize::from(!lit.is_positive())
    };

    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(2 * f.len());
    for clause in f.clauses() {
        match *clause.lits() {
            [a] => {
                let (a, na) = (node(a), node(a.negated()));
                edges.push((na, a));
            }
            [a, b] => {
                let (a, na, b, nb) = (node(a), node(a.negated()), node(b), node(b.negated()));
                edges.push((na, b));
                edges.push((nb, a));
            }
            _ => unreachable!("Krom clauses have at most two literals"),
        }
    }
    let n = 2 * vars.len();

    // Compressed adjacency.
    let mut start = vec![0usize; n + 1];
    for &(u, _) in &edges {
        start[u + 1] += 1;
    }
    for i in 0..n {
        start[i + 1] += start[i];
    }
    let mut fill = start.clone();
    let mut targets = vec![0usize; edges.len()];
    for &(u, w) in &edges {
        targets[fill[u]] = w;
        fill[u] += 1;
    }

    let comp = tarjan(n, &start, &targets);
    let mut witness = PartialAssignment::new();
    for (i, &v) in vars.iter().enumerate() {
        let (pos, neg) = (comp[2 * i], comp[2 * i + 1]);
        if pos == neg {
            return Ok(SatResult::Unsat);
        }
        // Components are numbered sinks first.
        witness.set(v, pos < neg);
    }
    Ok(SatResult::Sat(witness))
}

/// Iterative Tarjan; components are numbered in completion order, which is
/// a reverse topological order of the condensation.
fn tarjan(n: usize, start: &[usize], targets: &[usize]) -> Vec<usize> {
    const UNSEEN: usize = usize::MAX;
    let mut order = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut comp = vec![UNSEEN; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut call: Vec<(usize, usize)> = Vec::new();
    let (mut counter, mut comps) = (0usize, 0usize);

    for root in 0..n {
        if order[root] != UNSEEN {
            continue;
        }
        call.push((root, start[root]));
        order[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (u, ref mut next)) = call.last_mut() {
            if *next < start[u + 1] {
                let w = targets[*next];
                *next += 1;
                if order[w] == UNSEEN {
                    order[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, start[w]));
                } else if on_stack[w] {
                    low[u] = low[u].min(order[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[u]);
            }
            if low[u] == order[u] {
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    comp[w] = comps;
                    if w == u {
                        break;
                    }
                }
                comps += 1;
            }
        }
    }
    comp
}
