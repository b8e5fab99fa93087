//! Independent checkers for the three kinds of evidence.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::{
    rule_bound, Evidence, LowerBoundCertificate, ObstructionError, ObstructionTree, SeparatorObstruction, Verdict,
};
use crate::class::{alpha_literal_count, alpha_vars, is_good, BaseClassSpec};
use crate::cnf::{ClauseId, Formula, IncidenceIndex, IncidencePath, PartialAssignment, Var, Vertex};

/// Checks the evidence and that the claimed bound equals the rule's bound.
pub fn verify_certificate(f: &Formula, cert: &LowerBoundCertificate) -> Result<Verdict, ObstructionError> {
    let verdict = verify_evidence(f, cert.spec, &cert.evidence)?;
    if !verdict.is_valid() {
        return Ok(verdict);
    }
    let rule = rule_bound(cert.spec, &cert.evidence);
    if rule != cert.claimed_bound {
        return Ok(Verdict::Invalid(format!("claimed bound {} but the evidence yields {rule}", cert.claimed_bound)));
    }
    Ok(Verdict::Valid)
}

pub(super) fn verify_evidence(
    f: &Formula,
    spec: BaseClassSpec,
    evidence: &Evidence,
) -> Result<Verdict, ObstructionError> {
    match evidence {
        Evidence::ObstructionTree(t) => verify_obstruction_tree(f, t, spec),
        Evidence::SeparatorObstruction(x) => verify_separator_obstruction(f, x, spec),
        Evidence::WideClause(w) => {
            let c = f.clause(w.clause).ok_or(ObstructionError::DanglingClause(w.clause))?;
            let count = alpha_literal_count(c, spec);
            Ok(if count >= w.alpha_count {
                Verdict::Valid
            } else {
                Verdict::Invalid(format!("{} has {count} alpha-literals, not {}", w.clause, w.alpha_count))
            })
        }
    }
}

fn check_exists(f: &Formula, vars: &HashSet<Var>, v: Vertex) -> Result<(), ObstructionError> {
    match v {
        Vertex::Clause(c) if !f.contains_clause(c) => Err(ObstructionError::DanglingClause(c)),
        Vertex::Var(x) if !vars.contains(&x) => Err(ObstructionError::DanglingVar(x)),
        _ => Ok(()),
    }
}

/// Checks that `t` is an obstruction tree in `f`.
pub fn verify_obstruction_tree(
    f: &Formula,
    t: &ObstructionTree,
    spec: BaseClassSpec,
) -> Result<Verdict, ObstructionError> {
    let vars: HashSet<Var> = f.vars().into_iter().collect();
    for v in t.vertices() {
        check_exists(f, &vars, v)?;
    }
    Ok(Verdict::from_check(check_tree(f, t, spec)))
}

fn check_tree(f: &Formula, t: &ObstructionTree, spec: BaseClassSpec) -> Result<(), String> {
    match t {
        ObstructionTree::Leaf(c) => match f.clause(*c) {
            None => Err(format!("leaf {c} is not a clause of the formula")),
            Some(clause) if is_good(clause, spec) => Err(format!("leaf {c} is {spec}-good")),
            Some(_) => Ok(()),
        },
        ObstructionTree::Join(j) => {
            if j.left.depth() != j.right.depth() {
                return Err("joined trees differ in depth".into());
            }
            check_tree(f, &j.left, spec)?;
            let g = f.apply(&j.beta);
            check_tree(&g, &j.right, spec).map_err(|e| format!("right subtree under beta: {e}"))?;

            let occurring = |h: &Formula, clauses: BTreeSet<ClauseId>| -> BTreeSet<Var> {
                clauses.into_iter().filter_map(|c| h.clause(c)).flat_map(|c| c.vars().collect::<Vec<_>>()).collect()
            };
            let left_vars = occurring(f, j.left.clauses());
            let right_vars = occurring(&g, j.right.clauses());
            if let Some(v) = left_vars.intersection(&right_vars).find(|&&v| g.contains_var(v)) {
                return Err(format!("{v} occurs in a clause of both subtrees"));
            }

            j.path.check_in(f).map_err(|e| format!("join path: {e}"))?;
            let (left, right) = (j.left.vertices(), j.right.vertices());
            let (a, b) = (j.path.first().unwrap(), j.path.last().unwrap());
            let connects = (left.contains(&a) && right.contains(&b)) || (left.contains(&b) && right.contains(&a));
            if !connects {
                return Err("join path does not connect the two subtrees".into());
            }
            Ok(())
        }
    }
}

/// The sets recomputed while replaying a separator obstruction.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SeparatorReplay {
    /// `V_i \ V_{i-1}` for every step; the first entry is `V_1`.
    pub increments: Vec<BTreeSet<Var>>,
    /// `B_i \ B_{i-1}` for every step.
    pub registered: Vec<BTreeSet<ClauseId>>,
    /// `dom(prefix) ∪ dom(origin)`.
    pub preassigned: BTreeSet<Var>,
}

/// A structural property that failed at some step.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PropertyViolation {
    /// 1 through 7.
    pub property: u8,
    /// 1-based step `i`.
    pub step: usize,
    pub detail: String,
}

/// Variables added to `V` and clauses added to `B` by a path.
///
/// For the first path both endpoints are registered; later paths register
/// their far endpoint and, depending on whether they attach at a variable or
/// a clause, the nearest clauses around the attachment point.
pub(crate) fn registration(
    g: &Formula,
    spec: BaseClassSpec,
    path: &IncidencePath,
    first: bool,
) -> (BTreeSet<ClauseId>, BTreeSet<Var>) {
    let mut b = BTreeSet::new();
    let mut v = BTreeSet::new();
    let add = |c: ClauseId, b: &mut BTreeSet<ClauseId>, v: &mut BTreeSet<Var>| {
        b.insert(c);
        if let Some(clause) = g.clause(c) {
            v.extend(alpha_vars(clause, spec));
        }
    };
    let vs = path.vertices();
    let far = vs.last().and_then(|x| x.as_clause()).expect("paths end at clauses");
    add(far, &mut b, &mut v);
    if first {
        let near = vs[0].as_clause().expect("paths end at clauses");
        add(near, &mut b, &mut v);
        return (b, v);
    }
    match vs[0] {
        Vertex::Var(a) => {
            v.insert(a);
            add(vs[1].as_clause().expect("alternating path"), &mut b, &mut v);
        }
        Vertex::Clause(a) if vs.len() > 1 => {
            add(a, &mut b, &mut v);
            add(vs[2].as_clause().expect("alternating path"), &mut b, &mut v);
        }
        Vertex::Clause(_) => {}
    }
    (b, v)
}

/// Replays the construction of `x` in `f`: every path is checked to be a
/// shortest path to a nearest bad clause in its formula, and `V_i`, `B_i`
/// are recomputed. Returns `Ok(Err(..))` when the replay fails.
pub fn replay_separator(
    f: &Formula,
    x: &SeparatorObstruction,
    spec: BaseClassSpec,
) -> Result<Result<SeparatorReplay, String>, ObstructionError> {
    let vars: HashSet<Var> = f.vars().into_iter().collect();
    for p in &x.paths {
        for &v in p.vertices() {
            check_exists(f, &vars, v)?;
        }
    }
    for v in x.tau.domain() {
        check_exists(f, &vars, Vertex::Var(v))?;
    }
    Ok(replay_inner(f, x, spec))
}

fn replay_inner(f: &Formula, x: &SeparatorObstruction, spec: BaseClassSpec) -> Result<SeparatorReplay, String> {
    let fixed = x.origin.union(&x.prefix).map_err(|_| "origin and prefix disagree".to_string())?;
    let first = x.paths.first().ok_or("no paths")?;
    let f1 = f.apply(&x.origin);
    first.check_in(&f1).map_err(|e| format!("path 1: {e}"))?;
    let ends = [first.first().unwrap(), first.last().unwrap()];
    for end in ends {
        let c = end.as_clause().ok_or("path 1 must join two clauses")?;
        if is_good(f1.clause(c).unwrap(), spec) {
            return Err(format!("path 1 endpoint {c} is not bad"));
        }
    }
    let dist = IncidenceIndex::new(&f1).distances(&ends[..1]);
    if dist.get(&ends[1]) != Some(&first.len()) {
        return Err("path 1 is not a shortest path".into());
    }

    let (b1, v1) = registration(&f1, spec, first, true);
    let mut important = v1.clone();
    let mut tree: BTreeSet<Vertex> = first.vertices().iter().copied().collect();
    let mut replay =
        SeparatorReplay { increments: vec![v1], registered: vec![b1], preassigned: fixed.domain().collect() };

    for (k, path) in x.paths.iter().enumerate().skip(1) {
        let step = k + 1;
        let tau = x.tau.restricted(|v| important.contains(&v));
        let assignment =
            fixed.union(&tau).map_err(|_| format!("step {step}: tau disagrees with the fixed assignment"))?;
        let fi = f.apply(&assignment);
        path.check_in(&fi).map_err(|e| format!("path {step}: {e}"))?;
        let a = path.first().unwrap();
        let b = path.last().unwrap().as_clause().ok_or(format!("path {step} must end at a clause"))?;
        if !tree.contains(&a) {
            return Err(format!("path {step} does not start in the tree"));
        }
        if is_good(fi.clause(b).unwrap(), spec) {
            return Err(format!("path {step} ends at a good clause"));
        }
        let index = IncidenceIndex::new(&fi);
        let sources: Vec<Vertex> = tree.iter().copied().filter(|&v| index.contains(v)).collect();
        let dist = index.distances(&sources);
        if dist.get(&Vertex::Clause(b)) != Some(&path.len()) {
            return Err(format!("path {step} is not a shortest path from the tree"));
        }
        let component = index.distances(&[Vertex::Clause(b)]);
        for c in fi.clauses().iter().filter(|c| !is_good(c, spec)) {
            let v = Vertex::Clause(c.id());
            if component.contains_key(&v) && dist[&v] < path.len() {
                return Err(format!("step {step}: {} is a nearer bad clause than {b}", c.id()));
            }
        }
        let (bi, vi) = registration(&fi, spec, path, false);
        let fresh: BTreeSet<Var> = vi.difference(&important).copied().collect();
        important.extend(fresh.iter().copied());
        tree.extend(path.vertices().iter().copied());
        replay.increments.push(fresh);
        replay.registered.push(bi);
    }

    let domain: BTreeSet<Var> = x.tau.domain().collect();
    if domain != important {
        return Err("tau does not assign exactly the important variables".into());
    }
    if !x.tau.is_compatible(&fixed) {
        return Err("tau disagrees with the fixed assignment".into());
    }
    Ok(replay)
}

/// Replays `x` and checks the structural properties at every step.
pub fn verify_separator_obstruction(
    f: &Formula,
    x: &SeparatorObstruction,
    spec: BaseClassSpec,
) -> Result<Verdict, ObstructionError> {
    let replay = match replay_separator(f, x, spec)? {
        Ok(r) => r,
        Err(reason) => return Ok(Verdict::Invalid(reason)),
    };
    let width = f.clauses().iter().map(|c| alpha_literal_count(c, spec)).max().unwrap_or(0);
    let violations = replay.violations(f, x, spec, width);
    Ok(match violations.first() {
        None => Verdict::Valid,
        Some(v) => Verdict::Invalid(format!("property C{} fails at step {}: {}", v.property, v.step, v.detail)),
    })
}

impl SeparatorReplay {
    /// Checks (C1)–(C7) for every prefix `T_i` of the obstruction.
    ///
    /// Occurrences are read from the clause contents in `f`; variables fixed
    /// before the construction started are exempt. The increment bound is
    /// checked from the second step on, with `width` the largest α-count of
    /// a clause.
    pub fn violations(
        &self,
        f: &Formula,
        x: &SeparatorObstruction,
        spec: BaseClassSpec,
        width: usize,
    ) -> Vec<PropertyViolation> {
        let mut out = Vec::new();
        let mut important: BTreeSet<Var> = BTreeSet::new();
        for i in 1..=x.paths.len() {
            let previous = important.clone();
            important.extend(self.increments[i - 1].iter().copied());
            let exempt = |v: Var| important.contains(&v) || self.preassigned.contains(&v);
            let mut fail = |property: u8, detail: String| out.push(PropertyViolation { property, step: i, detail });
            let paths = &x.paths[..i];

            // Edges and degrees of T_i.
            let mut vertices: BTreeSet<Vertex> = BTreeSet::new();
            let mut edges: BTreeSet<(Var, ClauseId)> = BTreeSet::new();
            for p in paths {
                vertices.extend(p.vertices().iter().copied());
                edges.extend(p.edges());
            }
            let mut degree: BTreeMap<Vertex, usize> = BTreeMap::new();
            for &(v, c) in &edges {
                *degree.entry(Vertex::Var(v)).or_default() += 1;
                *degree.entry(Vertex::Clause(c)).or_default() += 1;
            }

            // (C1)
            if edges.len() + 1 != vertices.len() || !connected(&vertices, &edges) {
                fail(1, "T is not a tree".into());
            }

            let clause_of = |c: ClauseId| f.clause(c).expect("checked during replay");
            let tree_clauses: BTreeSet<ClauseId> = vertices.iter().filter_map(|v| v.as_clause()).collect();
            let tree_vars: BTreeSet<Var> =
                tree_clauses.iter().flat_map(|&c| clause_of(c).vars().collect::<Vec<_>>()).collect();

            // (C2)
            for (j, p) in paths.iter().enumerate() {
                let clauses = p.clauses();
                let mut at: BTreeMap<Var, Vec<usize>> = BTreeMap::new();
                for (pos, &c) in clauses.iter().enumerate() {
                    for v in clause_of(c).vars().filter(|&v| !exempt(v)) {
                        at.entry(v).or_default().push(pos);
                    }
                }
                for (v, positions) in at {
                    if positions.len() > 2 || (positions.len() == 2 && positions[1] != positions[0] + 1) {
                        fail(2, format!("{v} occurs at clause positions {positions:?} of path {}", j + 1));
                    }
                }
            }

            // (C3), (C5)
            for &v in tree_vars.iter().filter(|&&v| !exempt(v)) {
                let hosts: Vec<ClauseId> =
                    tree_clauses.iter().copied().filter(|&c| alpha_vars(clause_of(c), spec).contains(&v)).collect();
                if hosts.len() > 2 {
                    fail(3, format!("{v} alpha-occurs in {} tree clauses", hosts.len()));
                } else if hosts.len() == 2 {
                    let consecutive = paths.iter().any(|p| {
                        p.clauses()
                            .windows(2)
                            .any(|w| (w[0] == hosts[0] && w[1] == hosts[1]) || (w[0] == hosts[1] && w[1] == hosts[0]))
                    });
                    if !consecutive {
                        fail(3, format!("{v} alpha-occurs in non-consecutive clauses {} and {}", hosts[0], hosts[1]));
                    }
                }
                for c in hosts {
                    if degree.get(&Vertex::Clause(c)).copied().unwrap_or(0) > 2 {
                        fail(5, format!("{v} alpha-occurs in {c} of degree above two"));
                    }
                }
            }

            // (C4)
            for &v in important.difference(&previous) {
                if self.preassigned.contains(&v) {
                    continue;
                }
                let hosts = tree_clauses.iter().filter(|&&c| alpha_vars(clause_of(c), spec).contains(&v)).count();
                if hosts > 4 {
                    fail(4, format!("new important {v} alpha-occurs in {hosts} tree clauses"));
                }
            }

            // (C6)
            for (vertex, d) in &degree {
                if matches!(vertex, Vertex::Var(_)) && *d > 3 {
                    fail(6, format!("{vertex} has degree {d}"));
                }
            }

            // (C7)
            let fresh = self.increments[i - 1].len();
            if i >= 2 && fresh > 2 * spec.s() as usize + width + 1 {
                fail(7, format!("{fresh} new important variables"));
            }
        }
        out
    }
}

fn connected(vertices: &BTreeSet<Vertex>, edges: &BTreeSet<(Var, ClauseId)>) -> bool {
    let Some(&start) = vertices.iter().next() else { return true };
    let mut adjacency: BTreeMap<Vertex, Vec<Vertex>> = BTreeMap::new();
    for &(v, c) in edges {
        adjacency.entry(Vertex::Var(v)).or_default().push(Vertex::Clause(c));
        adjacency.entry(Vertex::Clause(c)).or_default().push(Vertex::Var(v));
    }
    let mut seen = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some(u) = stack.pop() {
        for &w in adjacency.get(&u).map(Vec::as_slice).unwrap_or(&[]) {
            if seen.insert(w) {
                stack.push(w);
            }
        }
    }
    seen.len() == vertices.len()
}

/// The first path of a separator started on `path`, checked against `g`.
pub(crate) fn check_first_path(g: &Formula, path: &IncidencePath, spec: BaseClassSpec) -> Result<(), String> {
    let x = SeparatorObstruction {
        origin: PartialAssignment::new(),
        prefix: PartialAssignment::new(),
        paths: vec![path.clone()],
        tau: PartialAssignment::new(),
    };
    match replay_inner(g, &x, spec) {
        Ok(_) => Ok(()),
        // The empty tau is only wrong about the important variables.
        Err(e) if e.starts_with("tau") => Ok(()),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::obstruction::WideClause;

    fn f(clauses: &[&[i64]]) -> Formula {
        Formula::from_lits(clauses).unwrap()
    }

    fn cl(id: u32) -> Vertex {
        Vertex::Clause(ClauseId(id))
    }

    fn var(id: u32) -> Vertex {
        Vertex::Var(Var(id))
    }

    #[test]
    fn leaves() {
        let g = f(&[&[1, 2], &[-1, -2]]);
        let spec = BaseClassSpec::HORN;
        assert!(verify_obstruction_tree(&g, &ObstructionTree::Leaf(ClauseId(1)), spec).unwrap().is_valid());
        assert!(!verify_obstruction_tree(&g, &ObstructionTree::Leaf(ClauseId(2)), spec).unwrap().is_valid());
        assert_eq!(
            verify_obstruction_tree(&g, &ObstructionTree::Leaf(ClauseId(9)), spec),
            Err(ObstructionError::DanglingClause(ClauseId(9)))
        );
    }

    #[test]
    fn join_of_two_bad_clauses() {
        // {1,2} - 2 - {2,3,-4} - 3 - {3,5}; x4 assigned to split nothing.
        let g = f(&[&[1, 2], &[2, -3, -4], &[3, 5]]);
        let path = IncidencePath::new(vec![cl(1), var(2), cl(2), var(3), cl(3)]);
        let t = ObstructionTree::join(
            ObstructionTree::Leaf(ClauseId(1)),
            PartialAssignment::from_pairs([(Var(2), false)]).unwrap(),
            ObstructionTree::Leaf(ClauseId(3)),
            path.clone(),
        );
        assert!(verify_obstruction_tree(&g, &t, BaseClassSpec::HORN).unwrap().is_valid());

        // Without an assignment both leaves... still share nothing; but a
        // shared variable alive under beta is rejected.
        let h = f(&[&[1, 2], &[2, 3]]);
        let bad = ObstructionTree::join(
            ObstructionTree::Leaf(ClauseId(1)),
            PartialAssignment::new(),
            ObstructionTree::Leaf(ClauseId(2)),
            IncidencePath::new(vec![cl(1), var(2), cl(2)]),
        );
        assert!(!verify_obstruction_tree(&h, &bad, BaseClassSpec::HORN).unwrap().is_valid());
        let shifted = ObstructionTree::join(
            ObstructionTree::Leaf(ClauseId(1)),
            PartialAssignment::new(),
            ObstructionTree::Leaf(ClauseId(3)),
            IncidencePath::new(vec![cl(1), var(2), cl(3)]),
        );
        assert!(!verify_obstruction_tree(&g, &shifted, BaseClassSpec::HORN).unwrap().is_valid());
    }

    fn separator(paths: Vec<IncidencePath>, tau: &[(u32, bool)]) -> SeparatorObstruction {
        SeparatorObstruction {
            origin: PartialAssignment::new(),
            prefix: PartialAssignment::new(),
            paths,
            tau: PartialAssignment::from_pairs(tau.iter().map(|&(v, b)| (Var(v), b))).unwrap(),
        }
    }

    #[test]
    fn single_path_separator() {
        let g = f(&[&[1, 2], &[-2, 3], &[3, 4]]);
        let p = IncidencePath::new(vec![cl(1), var(2), cl(2), var(3), cl(3)]);
        let x = separator(vec![p], &[(1, false), (2, false), (3, false), (4, true)]);
        assert!(verify_separator_obstruction(&g, &x, BaseClassSpec::HORN).unwrap().is_valid());

        let missing = separator(x.paths.clone(), &[(1, false), (2, false), (3, false)]);
        assert!(!verify_separator_obstruction(&g, &missing, BaseClassSpec::HORN).unwrap().is_valid());
    }

    #[test]
    fn detour_is_not_shortest() {
        let g = f(&[&[1, 2], &[-2, 5], &[-5, 3], &[2, 3]]);
        let long = IncidencePath::new(vec![cl(1), var(2), cl(2), var(5), cl(3), var(3), cl(4)]);
        let x = separator(vec![long], &[(1, false), (2, false), (3, false)]);
        assert!(!verify_separator_obstruction(&g, &x, BaseClassSpec::HORN).unwrap().is_valid());
    }

    #[test]
    fn second_path_and_registration() {
        // Path 1 joins c1 and c2 through x2; c3 hangs off x9 of c2.
        let g = f(&[&[1, 2], &[2, 3, -9], &[-9, 7, 8]]);
        let p1 = IncidencePath::new(vec![cl(1), var(2), cl(2)]);
        // Under x2 = x3 = 0 clause 2 shrinks to {-9}; clause 3 stays bad.
        let p2 = IncidencePath::new(vec![cl(2), var(9), cl(3)]);
        let x = separator(vec![p1, p2.clone()], &[(1, false), (2, false), (3, false), (7, false), (8, false)]);
        let replay = replay_separator(&g, &x, BaseClassSpec::HORN).unwrap().unwrap();
        assert_eq!(replay.increments[0], BTreeSet::from([Var(1), Var(2), Var(3)]));
        assert_eq!(replay.increments[1], BTreeSet::from([Var(7), Var(8)]));
        assert_eq!(replay.registered[1], BTreeSet::from([ClauseId(2), ClauseId(3)]));
        assert!(verify_separator_obstruction(&g, &x, BaseClassSpec::HORN).unwrap().is_valid());

        // With x3 = 1 clause 2 is satisfied and the path no longer exists.
        let y = separator(vec![x.paths[0].clone(), p2], &[(1, false), (2, false), (3, true), (7, false), (8, false)]);
        assert!(!verify_separator_obstruction(&g, &y, BaseClassSpec::HORN).unwrap().is_valid());
    }

    #[test]
    fn wide_clause_evidence() {
        let g = f(&[&[1, 2, 3, 4]]);
        let good = LowerBoundCertificate::new(
            BaseClassSpec::HORN,
            Evidence::WideClause(WideClause { clause: ClauseId(1), alpha_count: 4 }),
        );
        assert_eq!(good.claimed_bound, 3);
        assert!(verify_certificate(&g, &good).unwrap().is_valid());
        let mut inflated = good.clone();
        inflated.claimed_bound = 4;
        assert!(!verify_certificate(&g, &inflated).unwrap().is_valid());
        let mut wrong = good.clone();
        wrong.evidence = Evidence::WideClause(WideClause { clause: ClauseId(1), alpha_count: 5 });
        assert!(!verify_certificate(&g, &wrong).unwrap().is_valid());
        assert!(crate::obstruction::certificate_bound(&g, &wrong).is_err());
    }
}
