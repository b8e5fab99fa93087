//! Component backdoor trees.
//!
//! Each node carries its formula φ(t). The root carries the input formula,
//! a variable node on `x` has children for `φ[x=0]` and `φ[x=1]`, a component
//! node has one child per connected component (at least two), and every leaf
//! formula lies in the base class. The depth of a tree is the largest number
//! of variable nodes on a root-to-leaf path.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::class::{is_member, solve_in_class, BaseClassSpec, ClassError};
use crate::cnf::{connected_components, ClauseId, Formula, PartialAssignment, SatResult, Var};

/// A tree node together with its formula.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Node {
    pub formula: Formula,
    pub kind: NodeKind,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum NodeKind {
    /// Branches on `var`; `children[e]` carries `φ[var=e]`.
    Variable {
        var: Var,
        children: Box<[Node; 2]>,
    },
    /// One child per connected component of φ.
    Component(Vec<Node>),
    Leaf,
}

impl Node {
    pub fn leaf(formula: Formula) -> Node {
        Node { formula, kind: NodeKind::Leaf }
    }

    pub fn variable(formula: Formula, var: Var, zero: Node, one: Node) -> Node {
        Node { formula, kind: NodeKind::Variable { var, children: Box::new([zero, one]) } }
    }

    pub fn component(formula: Formula, children: Vec<Node>) -> Node {
        Node { formula, kind: NodeKind::Component(children) }
    }

    pub fn children(&self) -> &[Node] {
        match &self.kind {
            NodeKind::Variable { children, .. } => &children[..],
            NodeKind::Component(children) => children,
            NodeKind::Leaf => &[],
        }
    }
}

/// A component backdoor tree.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ComponentBackdoorTree {
    root: Node,
}

/// Where and why a tree failed validation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("node at {location:?}: {reason}")]
pub struct InvalidTree {
    /// Child indices from the root.
    pub location: Vec<usize>,
    pub reason: String,
}

#[derive(Debug, Error)]
pub enum TreeError {
    #[error(transparent)]
    Invalid(#[from] InvalidTree),
    #[error(transparent)]
    Class(#[from] ClassError),
    #[error("malformed tree document: {0}")]
    Json(String),
}

impl ComponentBackdoorTree {
    pub fn new(root: Node) -> ComponentBackdoorTree {
        ComponentBackdoorTree { root }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn into_root(self) -> Node {
        self.root
    }

    /// The canonical tree for a formula that needs no branching: a leaf, or a
    /// component node over leaves when φ is disconnected.
    pub fn trivial(f: &Formula) -> ComponentBackdoorTree {
        let comps = connected_components(f);
        let root = if comps.len() >= 2 {
            Node::component(f.clone(), comps.into_iter().map(Node::leaf).collect())
        } else {
            Node::leaf(f.clone())
        };
        ComponentBackdoorTree { root }
    }

    /// Largest number of variable nodes on a root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn go(n: &Node) -> usize {
            let below = n.children().iter().map(go).max().unwrap_or(0);
            below + usize::from(matches!(n.kind, NodeKind::Variable { .. }))
        }
        go(&self.root)
    }

    /// var(T): the variables branched on, in increasing order.
    pub fn variables(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.visit(&mut |n| {
            if let NodeKind::Variable { var, .. } = n.kind {
                out.push(var);
            }
        });
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Σ ‖φ(ℓ)‖ over the leaves.
    pub fn leaf_size_sum(&self) -> usize {
        let mut sum = 0;
        self.visit(&mut |n| {
            if matches!(n.kind, NodeKind::Leaf) {
                sum += n.formula.size();
            }
        });
        sum
    }

    pub fn variable_node_count(&self) -> usize {
        let mut count = 0;
        self.visit(&mut |n| count += usize::from(matches!(n.kind, NodeKind::Variable { .. })));
        count
    }

    pub fn leaves(&self) -> Vec<&Node> {
        let mut out = Vec::new();
        collect_leaves(&self.root, &mut out);
        out
    }

    /// Pre-order traversal.
    pub fn visit<F: FnMut(&Node)>(&self, f: &mut F) {
        let mut stack = vec![&self.root];
        while let Some(n) = stack.pop() {
            f(n);
            stack.extend(n.children().iter().rev());
        }
    }
}

fn collect_leaves<'a>(n: &'a Node, out: &mut Vec<&'a Node>) {
    match &n.kind {
        NodeKind::Leaf => out.push(n),
        _ => n.children().iter().for_each(|c| collect_leaves(c, out)),
    }
}

/// Checks every defining condition by recomputing the node formulas from `f`.
pub fn validate_tree(f: &Formula, tree: &ComponentBackdoorTree, spec: BaseClassSpec) -> Result<(), InvalidTree> {
    let mut location = Vec::new();
    let mut on_path = HashSet::new();
    check_node(&tree.root, f, spec, &mut on_path, &mut location)
}

/// Boolean form of [`validate_tree`].
pub fn is_valid_tree(f: &Formula, tree: &ComponentBackdoorTree, spec: BaseClassSpec) -> bool {
    validate_tree(f, tree, spec).is_ok()
}

fn check_node(
    node: &Node,
    expected: &Formula,
    spec: BaseClassSpec,
    on_path: &mut HashSet<Var>,
    location: &mut Vec<usize>,
) -> Result<(), InvalidTree> {
    let fail = |location: &Vec<usize>, reason: String| InvalidTree { location: location.clone(), reason };
    if node.formula != *expected {
        return Err(fail(location, "stored formula differs from the recomputed one".into()));
    }
    match &node.kind {
        NodeKind::Leaf => {
            if !is_member(expected, spec) {
                return Err(fail(location, format!("leaf formula is not in {spec}")));
            }
        }
        NodeKind::Variable { var, children } => {
            if !expected.contains_var(*var) {
                return Err(fail(location, format!("branch variable {var} does not occur in the formula")));
            }
            if !on_path.insert(*var) {
                return Err(fail(location, format!("variable {var} repeats on a root-to-leaf path")));
            }
            for (value, child) in children.iter().enumerate() {
                location.push(value);
                let sub = expected.assign(*var, value == 1);
                check_node(child, &sub, spec, on_path, location)?;
                location.pop();
            }
            on_path.remove(var);
        }
        NodeKind::Component(children) => {
            let comps = connected_components(expected);
            if comps.len() < 2 {
                return Err(fail(location, "component node over a connected formula".into()));
            }
            if comps.len() != children.len() {
                return Err(fail(location, format!("{} children for {} components", children.len(), comps.len())));
            }
            let mut by_first: Vec<(ClauseId, &Formula)> = comps.iter().map(|c| (c.clauses()[0].id(), c)).collect();
            by_first.sort_by_key(|p| p.0);
            for (i, child) in children.iter().enumerate() {
                location.push(i);
                let first = child.formula.clauses().first().map(|c| c.id());
                let comp = first.and_then(|id| by_first.binary_search_by_key(&id, |p| p.0).ok()).map(|k| by_first[k].1);
                match comp {
                    Some(comp) => check_node(child, comp, spec, on_path, location)?,
                    None => return Err(fail(location, "child is not a component of its parent".into())),
                }
                location.pop();
            }
            let mut firsts: Vec<_> =
                children.iter().filter_map(|c| c.formula.clauses().first()).map(|c| c.id()).collect();
            firsts.sort_unstable();
            firsts.dedup();
            if firsts.len() != children.len() {
                return Err(fail(location, "a component appears twice".into()));
            }
        }
    }
    Ok(())
}

/// Decides satisfiability through the tree: leaves are solved in the class,
/// component nodes combine by conjunction, variable nodes by disjunction.
///
/// When both branches of a variable node are satisfiable the 0-branch is
/// used. The witness covers var(F); variables fixed nowhere are set to 0.
/// The tree is assumed valid.
pub fn decide_sat_with_tree(
    f: &Formula,
    tree: &ComponentBackdoorTree,
    spec: BaseClassSpec,
) -> Result<SatResult, ClassError> {
    decide(f, tree, spec, false)
}

/// [`decide_sat_with_tree`] with the leaves solved on the rayon pool.
pub fn decide_sat_with_tree_parallel(
    f: &Formula,
    tree: &ComponentBackdoorTree,
    spec: BaseClassSpec,
) -> Result<SatResult, ClassError> {
    decide(f, tree, spec, true)
}

fn decide(
    f: &Formula,
    tree: &ComponentBackdoorTree,
    spec: BaseClassSpec,
    parallel: bool,
) -> Result<SatResult, ClassError> {
    if spec.preset().is_none() {
        return Err(ClassError::Unsupported(spec));
    }
    let leaves = tree.leaves();
    let solved: Vec<SatResult> = if parallel {
        leaves.par_iter().map(|l| solve_in_class(&l.formula, spec)).collect::<Result<_, _>>()?
    } else {
        leaves.iter().map(|l| solve_in_class(&l.formula, spec)).collect::<Result<_, _>>()?
    };

    // Upward pass over the leaves in the same order as `leaves`.
    let mut next_leaf = 0;
    let sat = upward(&tree.root, &solved, &mut next_leaf);
    debug_assert_eq!(next_leaf, solved.len());
    if !sat {
        return Ok(SatResult::Unsat);
    }
    let mut values: Vec<Option<bool>> = vec![None; f.max_var() as usize + 1];
    let mut next_leaf = 0;
    descend(&tree.root, &solved, &mut next_leaf, &mut values);
    for clause in f.clauses() {
        for v in clause.vars() {
            values[v.0 as usize].get_or_insert(false);
        }
    }
    let witness =
        PartialAssignment::from_pairs(values.iter().enumerate().filter_map(|(i, v)| v.map(|b| (Var(i as u32), b))))
            .expect("one value per variable");
    Ok(SatResult::Sat(witness))
}

/// Satisfiability of a subtree; advances `next` past its leaves.
fn upward(node: &Node, solved: &[SatResult], next: &mut usize) -> bool {
    match &node.kind {
        NodeKind::Leaf => {
            *next += 1;
            solved[*next - 1].is_sat()
        }
        NodeKind::Variable { children, .. } => {
            let zero = upward(&children[0], solved, next);
            let one = upward(&children[1], solved, next);
            zero || one
        }
        NodeKind::Component(children) => {
            let mut all = true;
            for c in children {
                all &= upward(c, solved, next);
            }
            all
        }
    }
}

/// Writes a model of a satisfiable subtree into `values`.
fn descend(node: &Node, solved: &[SatResult], next: &mut usize, values: &mut [Option<bool>]) {
    match &node.kind {
        NodeKind::Leaf => {
            if let SatResult::Sat(w) = &solved[*next] {
                for (v, b) in w.iter() {
                    values[v.0 as usize] = Some(b);
                }
            }
            *next += 1;
        }
        NodeKind::Variable { var, children } => {
            let start = *next;
            let zero_sat = upward(&children[0], solved, next);
            if zero_sat {
                *next = start;
                values[var.0 as usize] = Some(false);
                descend(&children[0], solved, next, values);
                skip(&children[1], next);
            } else {
                values[var.0 as usize] = Some(true);
                descend(&children[1], solved, next, values);
            }
        }
        NodeKind::Component(children) => {
            for c in children {
                descend(c, solved, next, values);
            }
        }
    }
}

fn skip(node: &Node, next: &mut usize) {
    match &node.kind {
        NodeKind::Leaf => *next += 1,
        _ => node.children().iter().for_each(|c| skip(c, next)),
    }
}

/// Serialized node: `{ node, variable?, children, clause_ids }`.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct NodeJson {
    pub node: NodeTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variable: Option<Var>,
    #[serde(default)]
    pub children: Vec<NodeJson>,
    pub clause_ids: Vec<ClauseId>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeTag {
    Var,
    Comp,
    Leaf,
}

/// A tree together with the class it targets.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct TreeDocument {
    pub class: BaseClassSpec,
    pub depth: usize,
    pub root: NodeJson,
}

impl ComponentBackdoorTree {
    pub fn to_json_node(&self) -> NodeJson {
        fn go(n: &Node) -> NodeJson {
            let (node, variable) = match &n.kind {
                NodeKind::Variable { var, .. } => (NodeTag::Var, Some(*var)),
                NodeKind::Component(_) => (NodeTag::Comp, None),
                NodeKind::Leaf => (NodeTag::Leaf, None),
            };
            NodeJson {
                node,
                variable,
                children: n.children().iter().map(go).collect(),
                clause_ids: n.formula.clause_ids(),
            }
        }
        go(&self.root)
    }

    pub fn to_document(&self, spec: BaseClassSpec) -> TreeDocument {
        TreeDocument { class: spec, depth: self.depth(), root: self.to_json_node() }
    }

    /// Rebuilds node formulas from `f`: the clauses listed at a node,
    /// instantiated by the branch assignment leading to it.
    pub fn from_json_node(f: &Formula, root: &NodeJson) -> Result<ComponentBackdoorTree, TreeError> {
        fn go(f: &Formula, n: &NodeJson, tau: &mut PartialAssignment) -> Result<Node, TreeError> {
            let mut clauses = Vec::with_capacity(n.clause_ids.len());
            for &id in &n.clause_ids {
                let clause =
                    f.clause(id).ok_or_else(|| TreeError::Json(format!("clause {id} is not in the formula")))?;
                let residual = clause
                    .instantiate(tau)
                    .ok_or_else(|| TreeError::Json(format!("clause {id} is satisfied on the branch leading to it")))?;
                clauses.push(residual);
            }
            let formula = Formula::new(clauses).map_err(|e| TreeError::Json(e.to_string()))?;
            let kind = match (n.node, n.variable, n.children.len()) {
                (NodeTag::Leaf, None, 0) => NodeKind::Leaf,
                (NodeTag::Var, Some(var), 2) => {
                    if tau.contains(var) {
                        return Err(TreeError::Json(format!("variable {var} repeats on a path")));
                    }
                    tau.set(var, false);
                    let zero = go(f, &n.children[0], tau);
                    tau.set(var, true);
                    let one = go(f, &n.children[1], tau);
                    tau.unset(var);
                    NodeKind::Variable { var, children: Box::new([zero?, one?]) }
                }
                (NodeTag::Comp, None, k) if k >= 2 => {
                    NodeKind::Component(n.children.iter().map(|c| go(f, c, tau)).collect::<Result<_, _>>()?)
                }
                _ => return Err(TreeError::Json("node tag, variable and children disagree".into())),
            };
            Ok(Node { formula, kind })
        }
        let mut tau = PartialAssignment::new();
        Ok(ComponentBackdoorTree { root: go(f, root, &mut tau)? })
    }

    pub fn to_json_string(&self, spec: BaseClassSpec) -> String {
        serde_json::to_string_pretty(&self.to_document(spec)).expect("tree serializes")
    }

    pub fn from_json_str(f: &Formula, text: &str) -> Result<(ComponentBackdoorTree, BaseClassSpec), TreeError> {
        let doc: TreeDocument = serde_json::from_str(text).map_err(|e| TreeError::Json(e.to_string()))?;
        Ok((ComponentBackdoorTree::from_json_node(f, &doc.root)?, doc.class))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::brute_force_sat;

    fn f(clauses: &[&[i64]]) -> Formula {
        Formula::from_lits(clauses).unwrap()
    }

    fn branch(formula: &Formula, var: u32) -> Node {
        let v = Var(var);
        Node::variable(formula.clone(), v, Node::leaf(formula.assign(v, false)), Node::leaf(formula.assign(v, true)))
    }

    #[test]
    fn single_leaf() {
        let g = f(&[&[1, -2]]);
        let t = ComponentBackdoorTree::trivial(&g);
        assert!(validate_tree(&g, &t, BaseClassSpec::HORN).is_ok());
        assert_eq!(t.depth(), 0);
        assert!(t.variables().is_empty());
        assert_eq!(decide_sat_with_tree(&g, &t, BaseClassSpec::HORN).unwrap(), crate::class::solve_horn(&g).unwrap());
    }

    #[test]
    fn contradiction_into_null() {
        let g = f(&[&[1], &[-1]]);
        let t = ComponentBackdoorTree::new(branch(&g, 1));
        assert!(validate_tree(&g, &t, BaseClassSpec::NULL).is_ok());
        assert_eq!(t.depth(), 1);
        assert_eq!(decide_sat_with_tree(&g, &t, BaseClassSpec::NULL).unwrap(), SatResult::Unsat);
    }

    #[test]
    fn wrong_child_is_reported() {
        let g = f(&[&[1, 2]]);
        let mut root = branch(&g, 1);
        if let NodeKind::Variable { children, .. } = &mut root.kind {
            children[0] = Node::leaf(g.assign(Var(1), true));
        }
        let err = validate_tree(&g, &ComponentBackdoorTree::new(root), BaseClassSpec::HORN).unwrap_err();
        assert_eq!(err.location, vec![0]);
    }

    #[test]
    fn component_depth_ignores_component_nodes() {
        let g = f(&[&[1, 2], &[3, 4]]);
        let comps = connected_components(&g);
        let root = Node::component(g.clone(), vec![branch(&comps[0], 1), branch(&comps[1], 3)]);
        let t = ComponentBackdoorTree::new(root);
        validate_tree(&g, &t, BaseClassSpec::HORN).unwrap();
        assert_eq!(t.depth(), 1);
        assert_eq!(t.variables(), vec![Var(1), Var(3)]);
        let res = decide_sat_with_tree(&g, &t, BaseClassSpec::HORN).unwrap();
        assert!(g.is_satisfied_by(res.witness().unwrap()));
        assert_eq!(res.is_sat(), brute_force_sat(&g).unwrap().is_sat());
        assert!(t.leaf_size_sum() <= (1 << t.depth()) * g.size());
    }

    #[test]
    fn json_round_trip() {
        let g = f(&[&[1, 2], &[3, 4], &[-1, 5]]);
        let comps = connected_components(&g);
        let root = Node::component(g.clone(), vec![branch(&comps[0], 1), branch(&comps[1], 3)]);
        let t = ComponentBackdoorTree::new(root);
        let text = t.to_json_string(BaseClassSpec::HORN);
        let (back, spec) = ComponentBackdoorTree::from_json_str(&g, &text).unwrap();
        assert_eq!(back, t);
        assert_eq!(spec, BaseClassSpec::HORN);
        assert!(text.contains("\"node\": \"comp\""));
    }

    #[test]
    fn json_against_wrong_formula_fails_validation() {
        let g = f(&[&[1, 2]]);
        let t = ComponentBackdoorTree::new(branch(&g, 1));
        let other = f(&[&[1, 2], &[2, 3]]);
        let (loaded, _) = ComponentBackdoorTree::from_json_str(&other, &t.to_json_string(BaseClassSpec::HORN)).unwrap();
        assert!(validate_tree(&other, &loaded, BaseClassSpec::HORN).is_err());
    }
}
