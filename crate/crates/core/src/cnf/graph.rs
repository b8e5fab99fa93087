//! Incidence-graph connectivity and breadth-first shortest paths.

use std::collections::HashMap;

use super::{CnfError, Formula, IncidencePath, Var, Vertex};

/// Adjacency of the incidence graph, built once per formula.
///
/// Variable neighbourhoods list clause positions in increasing id order.
pub struct IncidenceIndex<'a> {
    formula: &'a Formula,
    occurrences: HashMap<crate::cnf::Var, Vec<usize>>,
}

impl<'a> IncidenceIndex<'a> {
    pub fn new(formula: &'a Formula) -> IncidenceIndex<'a> {
        let mut occurrences: HashMap<Var, Vec<usize>> = HashMap::new();
        for (i, clause) in formula.clauses().iter().enumerate() {
            for v in clause.vars() {
                occurrences.entry(v).or_default().push(i);
            }
        }
        IncidenceIndex { formula, occurrences }
    }

    pub fn formula(&self) -> &'a Formula {
        self.formula
    }

    pub fn contains(&self, v: Vertex) -> bool {
        match v {
            Vertex::Var(x) => self.occurrences.contains_key(&x),
            Vertex::Clause(c) => self.formula.contains_clause(c),
        }
    }

    /// Number of clauses containing `var`.
    pub fn occurrence_count(&self, var: Var) -> usize {
        self.occurrences.get(&var).map_or(0, Vec::len)
    }

    /// Neighbours of `v` in increasing order.
    pub fn neighbours(&self, v: Vertex, out: &mut Vec<Vertex>) {
        out.clear();
        match v {
            Vertex::Var(x) => {
                if let Some(list) = self.occurrences.get(&x) {
                    out.extend(list.iter().map(|&i| Vertex::Clause(self.formula.clauses()[i].id())));
                }
            }
            Vertex::Clause(c) => {
                if let Some(clause) = self.formula.clause(c) {
                    out.extend(clause.vars().map(Vertex::Var));
                }
            }
        }
    }

    /// Layered BFS from `sources`. Each vertex records the first frontier
    /// vertex (in increasing order) that reached it.
    fn bfs<F: FnMut(&[Vertex]) -> bool>(
        &self,
        sources: &[Vertex],
        mut stop: F,
    ) -> HashMap<Vertex, (usize, Option<Vertex>)> {
        let mut seen: HashMap<Vertex, (usize, Option<Vertex>)> = HashMap::new();
        let mut frontier: Vec<Vertex> = sources.to_vec();
        frontier.sort_unstable();
        frontier.dedup();
        for &s in &frontier {
            seen.insert(s, (0, None));
        }
        let mut depth = 0;
        let mut scratch = Vec::new();
        while !frontier.is_empty() && !stop(&frontier) {
            depth += 1;
            let mut next = Vec::new();
            for &u in &frontier {
                self.neighbours(u, &mut scratch);
                for &w in &scratch {
                    seen.entry(w).or_insert_with(|| {
                        next.push(w);
                        (depth, Some(u))
                    });
                }
            }
            next.sort_unstable();
            frontier = next;
        }
        seen
    }

    /// Distances from the source set to every reachable vertex.
    pub fn distances(&self, sources: &[Vertex]) -> HashMap<Vertex, usize> {
        self.bfs(sources, |_| false).into_iter().map(|(v, (d, _))| (v, d)).collect()
    }

    /// See [`shortest_path`].
    pub fn shortest_path(&self, sources: &[Vertex], targets: &[Vertex]) -> Result<Option<IncidencePath>, CnfError> {
        for &v in sources.iter().chain(targets) {
            if !self.contains(v) {
                return Err(CnfError::VertexNotPresent(v));
            }
        }
        let mut targets = targets.to_vec();
        targets.sort_unstable();
        let mut hit = None;
        let seen = self.bfs(sources, |layer| {
            hit = layer.iter().copied().find(|v| targets.binary_search(v).is_ok());
            hit.is_some()
        });
        let Some(end) = hit else { return Ok(None) };
        let mut vertices = vec![end];
        let mut cur = end;
        while let Some((_, Some(parent))) = seen.get(&cur) {
            vertices.push(*parent);
            cur = *parent;
        }
        vertices.reverse();
        Ok(Some(IncidencePath::new(vertices)))
    }
}

/// Conn(F): the connected components, ordered by smallest clause id.
pub fn connected_components(f: &Formula) -> Vec<Formula> {
    let n = f.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut first_with: HashMap<Var, usize> = HashMap::new();
    for (i, clause) in f.clauses().iter().enumerate() {
        for v in clause.vars() {
            match first_with.get(&v) {
                Some(&j) => {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    if a != b {
                        // Attach to the smaller index so roots stay minimal.
                        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                        parent[hi] = lo;
                    }
                }
                None => {
                    first_with.insert(v, i);
                }
            }
        }
    }
    let mut slot_of_root: HashMap<usize, usize> = HashMap::new();
    let mut groups: Vec<Vec<super::Clause>> = Vec::new();
    for (i, clause) in f.clauses().iter().enumerate() {
        let root = find(&mut parent, i);
        let slot = *slot_of_root.entry(root).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[slot].push(clause.clone());
    }
    groups.into_iter().map(Formula::from_sorted).collect()
}

/// A shortest path from some source to some target.
///
/// BFS layers are expanded in increasing vertex order and the smallest target
/// of the first layer that contains one is chosen, so the result is
/// deterministic. A source that is also a target yields a length-zero path.
pub fn shortest_path(f: &Formula, sources: &[Vertex], targets: &[Vertex]) -> Result<Option<IncidencePath>, CnfError> {
    IncidenceIndex::new(f).shortest_path(sources, targets)
}

/// BFS distances from `sources` to every reachable vertex of `f`.
pub fn bfs_distances(f: &Formula, sources: &[Vertex]) -> HashMap<Vertex, usize> {
    IncidenceIndex::new(f).distances(sources)
}
