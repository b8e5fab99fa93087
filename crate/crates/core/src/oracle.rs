//! Exact backdoor depth and size by exhaustive search, plus the instance
//! families used to exercise the approximation pipeline.

use std::collections::HashMap;
use std::fmt;
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::class::{alpha_literal_count, alpha_vars, bad_clauses, is_member, BaseClassSpec};
use crate::cnf::{connected_components, Clause, ClauseId, Formula, Lit, PartialAssignment, Var};
use crate::game::{Connector, ConnectorReply, GameError, GamePosition, Halt, SplitterAlgorithm, Step};

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum OracleValue {
    Exact(usize),
    AboveBudget,
}

impl OracleValue {
    pub fn exact(self) -> Option<usize> {
        match self {
            OracleValue::Exact(v) => Some(v),
            OracleValue::AboveBudget => None,
        }
    }
}

impl fmt::Display for OracleValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleValue::Exact(v) => write!(f, "{v}"),
            OracleValue::AboveBudget => f.write_str("above budget"),
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Known {
    Exact(usize),
    AtLeast(usize),
}

/// Memoized budgeted search over the recursive depth characterization.
///
/// Connected formulas are memoized by their residual clauses (ids and
/// literals). A cached lower bound is reused whenever it already exceeds the
/// budget of a later query.
#[derive(Debug)]
pub struct DepthOracle {
    spec: BaseClassSpec,
    memo: HashMap<Formula, Known>,
}

impl DepthOracle {
    pub fn new(spec: BaseClassSpec) -> DepthOracle {
        DepthOracle { spec, memo: HashMap::new() }
    }

    pub fn spec(&self) -> BaseClassSpec {
        self.spec
    }

    pub fn memo_len(&self) -> usize {
        self.memo.len()
    }

    pub fn depth(&mut self, f: &Formula, budget: usize) -> OracleValue {
        match self.search(f, budget) {
            Some(d) => OracleValue::Exact(d),
            None => OracleValue::AboveBudget,
        }
    }

    fn search(&mut self, f: &Formula, budget: usize) -> Option<usize> {
        if is_member(f, self.spec) {
            return Some(0);
        }
        let parts = connected_components(f);
        if parts.len() > 1 {
            let mut worst = 0;
            for part in &parts {
                worst = worst.max(self.connected(part, budget)?);
            }
            return Some(worst);
        }
        self.connected(f, budget)
    }

    fn connected(&mut self, f: &Formula, budget: usize) -> Option<usize> {
        if is_member(f, self.spec) {
            return Some(0);
        }
        match self.memo.get(f) {
            Some(Known::Exact(d)) => return (*d <= budget).then_some(*d),
            Some(Known::AtLeast(lower)) if *lower > budget => return None,
            _ => {}
        }
        let lower = wide_lower_bound(f, self.spec).max(1);
        if lower > budget {
            self.memo.insert(f.clone(), Known::AtLeast(lower));
            return None;
        }
        let mut best: Option<usize> = None;
        for var in occurrence_order(f) {
            let limit = best.map_or(budget, |b| b - 1);
            if limit < lower {
                break;
            }
            let Some(d0) = self.search(&f.assign(var, false), limit - 1) else { continue };
            let Some(d1) = self.search(&f.assign(var, true), limit - 1) else { continue };
            best = Some(1 + d0.max(d1));
        }
        match best {
            Some(d) => {
                self.memo.insert(f.clone(), Known::Exact(d));
                Some(d)
            }
            None => {
                self.memo.insert(f.clone(), Known::AtLeast(budget + 1));
                None
            }
        }
    }

    /// A variable attaining the depth of the connected non-member `f`,
    /// smallest occurrence-order first.
    pub fn best_move(&mut self, f: &Formula) -> Option<Var> {
        let budget = f.vars().len();
        let target = self.search(f, budget)?;
        if target == 0 {
            return None;
        }
        occurrence_order(f).into_iter().find(|&var| {
            let d0 = self.search(&f.assign(var, false), target - 1);
            let d1 = self.search(&f.assign(var, true), target - 1);
            d0.is_some() && d1.is_some()
        })
    }
}

/// A clause with `k` α-literals forces depth at least `k - s`.
fn wide_lower_bound(f: &Formula, spec: BaseClassSpec) -> usize {
    let s = spec.s() as usize;
    f.clauses().iter().map(|c| alpha_literal_count(c, spec).saturating_sub(s)).max().unwrap_or(0)
}

/// Variables by descending occurrence count, ties by id.
fn occurrence_order(f: &Formula) -> Vec<Var> {
    let mut count: HashMap<Var, usize> = HashMap::new();
    for c in f.clauses() {
        for v in c.vars() {
            *count.entry(v).or_default() += 1;
        }
    }
    let mut vars: Vec<Var> = count.keys().copied().collect();
    vars.sort_by_key(|v| (std::cmp::Reverse(count[v]), *v));
    vars
}

/// Exact backdoor depth, or `AboveBudget` when it exceeds `budget`.
pub fn exact_backdoor_depth(f: &Formula, spec: BaseClassSpec, budget: usize) -> OracleValue {
    DepthOracle::new(spec).depth(f, budget)
}

/// Direct evaluation of the depth recursion without memo or pruning.
/// Exponential; only for cross-checking on tiny formulas.
pub fn reference_depth(f: &Formula, spec: BaseClassSpec) -> usize {
    if is_member(f, spec) {
        return 0;
    }
    let parts = connected_components(f);
    if parts.len() > 1 {
        return parts.iter().map(|p| reference_depth(p, spec)).max().unwrap_or(0);
    }
    f.vars()
        .into_iter()
        .map(|x| 1 + reference_depth(&f.assign(x, false), spec).max(reference_depth(&f.assign(x, true), spec)))
        .min()
        .expect("a non-member has a variable")
}

/// True when every assignment of `vars` sends `f` into the class.
pub fn is_strong_backdoor(f: &Formula, spec: BaseClassSpec, vars: &[Var]) -> bool {
    assert!(vars.len() < 32, "brute force over 2^{} assignments", vars.len());
    (0u32..1 << vars.len()).all(|mask| {
        let tau = PartialAssignment::from_pairs(vars.iter().enumerate().map(|(k, &v)| (v, mask >> k & 1 == 1)))
            .expect("distinct variables");
        is_member(&f.apply(&tau), spec)
    })
}

/// Smallest strong backdoor set size, or `AboveBudget`.
///
/// An assignment can falsify every literal of a clause over `B`, so `B` is a
/// strong backdoor exactly when it contains at least `α(c) - s` of the
/// α-variables of every clause `c`. The search branches on the α-variables of
/// the first clause still short of that count.
pub fn exact_backdoor_size(f: &Formula, spec: BaseClassSpec, budget: usize) -> OracleValue {
    let s = spec.s() as usize;
    let demands: Vec<(Vec<Var>, usize)> = f
        .clauses()
        .iter()
        .filter_map(|c| {
            let vars = alpha_vars(c, spec);
            (vars.len() > s).then(|| {
                let need = vars.len() - s;
                (vars, need)
            })
        })
        .collect();
    let mut chosen = Vec::new();
    for k in 0..=budget {
        if hitting(&demands, k, &mut chosen) {
            return OracleValue::Exact(k);
        }
    }
    OracleValue::AboveBudget
}

fn hitting(demands: &[(Vec<Var>, usize)], left: usize, chosen: &mut Vec<Var>) -> bool {
    let short = demands.iter().find(|(vars, need)| vars.iter().filter(|v| chosen.contains(v)).count() < *need);
    let Some((vars, _)) = short else { return true };
    if left == 0 {
        return false;
    }
    for &v in vars {
        if chosen.contains(&v) {
            continue;
        }
        chosen.push(v);
        let found = hitting(demands, left - 1, chosen);
        chosen.pop();
        if found {
            return true;
        }
    }
    false
}

/// Plays optimal moves according to the oracle, so the resulting tree has
/// exactly the backdoor depth.
#[derive(Debug)]
pub struct OracleSplitter {
    oracle: Mutex<DepthOracle>,
}

impl OracleSplitter {
    pub fn new(spec: BaseClassSpec) -> OracleSplitter {
        OracleSplitter { oracle: Mutex::new(DepthOracle::new(spec)) }
    }
}

impl SplitterAlgorithm for OracleSplitter {
    type State = ();

    fn initial_state(&self, _: &GamePosition) {}

    fn step(&self, position: &GamePosition, _: ()) -> Result<Step<()>, GameError> {
        let mut oracle = self.oracle.lock().expect("oracle lock");
        if is_member(&position.formula, oracle.spec()) {
            return Ok(Step::Halt(Halt::Win));
        }
        match oracle.best_move(&position.formula) {
            Some(var) => Ok(Step::Move(var, ())),
            None => Err(GameError::Strategy("no optimal move at a non-member position".into())),
        }
    }

    fn reads_history(&self) -> bool {
        false
    }
}

/// Replies with the value and component of largest remaining depth.
#[derive(Debug)]
pub struct MaxDepthConnector {
    oracle: DepthOracle,
}

impl MaxDepthConnector {
    pub fn new(spec: BaseClassSpec) -> MaxDepthConnector {
        MaxDepthConnector { oracle: DepthOracle::new(spec) }
    }

    fn value_of(&mut self, f: &Formula) -> usize {
        let budget = f.vars().len();
        self.oracle.depth(f, budget).exact().expect("depth never exceeds the variable count")
    }
}

impl Connector for MaxDepthConnector {
    fn choose_start(&mut self, starts: &[GamePosition]) -> usize {
        let mut best = (0, 0);
        for (k, p) in starts.iter().enumerate() {
            let d = self.value_of(&p.formula);
            if d > best.1 {
                best = (k, d);
            }
        }
        best.0
    }

    fn reply(&mut self, _: &GamePosition, _: Var, options: &[Vec<Formula>; 2]) -> ConnectorReply {
        let mut best: Option<(usize, ConnectorReply)> = None;
        for (value, parts) in [(false, &options[0]), (true, &options[1])] {
            for (component, part) in parts.iter().enumerate() {
                let d = self.value_of(part);
                if best.as_ref().is_none_or(|(b, _)| d > *b) {
                    best = Some((d, ConnectorReply { value, component }));
                }
            }
        }
        best.map_or(ConnectorReply { value: false, component: 0 }, |(_, r)| r)
    }
}

/// The chain `c_i = {x_{i-1}, ¬y_i, x_i}` for `i = 1..n`, or `{x_{i-1}, x_i}`
/// without the `y` variables. `x_j` is variable `j + 1` and `y_i` is variable
/// `n + 1 + i`.
pub fn gen_chain(n: usize, with_y: bool) -> Formula {
    assert!(n >= 1, "a chain has at least one clause");
    let x = |j: usize| (j + 1) as i64;
    let y = |i: usize| (n + 1 + i) as i64;
    Formula::from_lit_lists((1..=n).map(|i| if with_y { vec![x(i - 1), -y(i), x(i)] } else { vec![x(i - 1), x(i)] }))
        .expect("chain clauses are well formed")
}

/// `n` variable-disjoint copies of `f`. Variables are renumbered densely per
/// copy and clause ids run consecutively.
pub fn gen_disjoint_copies(f: &Formula, n: usize) -> Formula {
    assert!(n >= 1, "at least one copy");
    let vars = f.vars();
    let dense: HashMap<Var, u32> = vars.iter().enumerate().map(|(k, &v)| (v, k as u32 + 1)).collect();
    let width = vars.len() as u32;
    let mut clauses = Vec::with_capacity(f.len() * n);
    for copy in 0..n as u32 {
        for c in f.clauses() {
            let lits =
                c.lits().iter().map(|l| Lit::new(Var(dense[&l.var()] + copy * width), l.is_positive())).collect();
            let id = ClauseId(clauses.len() as u32 + 1);
            clauses.push(Clause::new(id, lits).expect("renaming keeps clauses well formed"));
        }
    }
    Formula::new(clauses).expect("fresh ids")
}

/// Negates every literal.
pub fn gen_flip(f: &Formula) -> Formula {
    f.flipped()
}

/// A single clause of `k` positive literals over variables `1..=k`.
pub fn gen_wide_clause(k: usize) -> Formula {
    Formula::from_lit_lists([(1..=k as i64).collect::<Vec<_>>()]).expect("distinct literals")
}

/// Deterministic generator for the randomized corpora.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_clause<R: Rng>(rng: &mut R, vars: u32, width: usize) -> Vec<i64> {
    let mut pool: Vec<u32> = (1..=vars).collect();
    pool.shuffle(rng);
    pool.truncate(width.min(vars as usize));
    pool.sort_unstable();
    pool.into_iter().map(|v| if rng.gen_bool(0.5) { v as i64 } else { -(v as i64) }).collect()
}

/// `clauses` random clauses of width `1..=max_width` over `1..=vars`.
pub fn random_formula<R: Rng>(rng: &mut R, vars: u32, clauses: usize, max_width: usize) -> Formula {
    assert!(vars >= 1 && max_width >= 1);
    Formula::from_lit_lists((0..clauses).map(|_| {
        let width = rng.gen_range(1..=max_width);
        random_clause(rng, vars, width)
    }))
    .expect("random clauses are well formed")
}

/// Random member of the class: clauses are resampled until good. Null
/// members consist of empty clauses only.
pub fn random_member<R: Rng>(rng: &mut R, spec: BaseClassSpec, vars: u32, clauses: usize, max_width: usize) -> Formula {
    assert!(vars >= 1 && max_width >= 1);
    let mut out = Vec::with_capacity(clauses);
    // Without a non-α polarity every literal counts, so wider clauses never fit.
    let both = spec.is_alpha(Lit::pos(1)) && spec.is_alpha(Lit::neg(1));
    let cap = if both { max_width.min(spec.s() as usize) } else { max_width };
    while out.len() < clauses {
        let width = rng.gen_range(cap.min(1)..=cap);
        let lits = random_clause(rng, vars, width);
        let alpha = lits.iter().filter(|&&l| spec.is_alpha(Lit::from_dimacs(l).expect("nonzero"))).count();
        if alpha <= spec.s() as usize {
            out.push(lits);
        }
    }
    Formula::from_lit_lists(out).expect("random clauses are well formed")
}

/// A Horn formula with a few clauses widened by extra positive literals, so
/// it sits a small distance from the class.
pub fn random_horn_adjacent<R: Rng>(rng: &mut R, vars: u32, clauses: usize, bad: usize) -> Formula {
    let base = random_member(rng, BaseClassSpec::HORN, vars, clauses, 3);
    let mut lists: Vec<Vec<i64>> =
        base.clauses().iter().map(|c| c.lits().iter().map(|l| l.to_dimacs()).collect()).collect();
    for _ in 0..bad.min(lists.len()) {
        let k = rng.gen_range(0..lists.len());
        let free: Vec<u32> = (1..=vars).filter(|&v| !lists[k].iter().any(|l| l.unsigned_abs() == v as u64)).collect();
        for &v in free.choose_multiple(rng, 2) {
            lists[k].push(v as i64);
        }
    }
    Formula::from_lit_lists(lists).expect("widened clauses stay well formed")
}

/// A random partial assignment over the variables of `f`, each bound with
/// probability `density`.
pub fn random_assignment<R: Rng>(rng: &mut R, f: &Formula, density: f64) -> PartialAssignment {
    let mut tau = PartialAssignment::new();
    for v in f.vars() {
        if rng.gen_bool(density) {
            tau.set(v, rng.gen_bool(0.5));
        }
    }
    tau
}

/// Number of bad clauses, for corpus statistics.
pub fn bad_clause_count(f: &Formula, spec: BaseClassSpec) -> usize {
    bad_clauses(f, spec).len()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(clauses: &[&[i64]]) -> Formula {
        Formula::from_lits(clauses).unwrap()
    }

    #[test]
    fn members_have_depth_zero() {
        let g = f(&[&[1, -2], &[-1, -3, 4]]);
        assert_eq!(exact_backdoor_depth(&g, BaseClassSpec::HORN, 0), OracleValue::Exact(0));
        assert_eq!(exact_backdoor_size(&g, BaseClassSpec::HORN, 0), OracleValue::Exact(0));
    }

    #[test]
    fn single_positive_clause() {
        for p in 2..=6 {
            let g = gen_wide_clause(p);
            assert_eq!(reference_depth(&g, BaseClassSpec::HORN), p - 1);
            assert_eq!(exact_backdoor_depth(&g, BaseClassSpec::HORN, 10), OracleValue::Exact(p - 1));
            assert_eq!(exact_backdoor_depth(&g, BaseClassSpec::HORN, p - 2), OracleValue::AboveBudget);
        }
    }

    #[test]
    fn size_examples() {
        let g = f(&[&[1, 2, 3]]);
        assert_eq!(exact_backdoor_size(&g, BaseClassSpec::HORN, 5), OracleValue::Exact(2));
        let copies = gen_disjoint_copies(&g, 3);
        assert_eq!(exact_backdoor_size(&copies, BaseClassSpec::HORN, 10), OracleValue::Exact(6));
        assert_eq!(exact_backdoor_size(&copies, BaseClassSpec::HORN, 5), OracleValue::AboveBudget);
        assert!(is_strong_backdoor(&g, BaseClassSpec::HORN, &[Var(1), Var(2)]));
        assert!(!is_strong_backdoor(&g, BaseClassSpec::HORN, &[Var(1)]));
    }

    #[test]
    fn chain_shapes() {
        assert_eq!(gen_chain(1, true), f(&[&[1, -3, 2]]));
        assert_eq!(gen_chain(2, false), f(&[&[1, 2], &[2, 3]]));
        let q = gen_chain(4, true);
        assert_eq!(q.vars().len(), 9);
        assert!(is_member(&q, BaseClassSpec::DHORN));
        assert_eq!(exact_backdoor_depth(&gen_chain(1, true), BaseClassSpec::HORN, 5), OracleValue::Exact(1));
    }

    #[test]
    fn copies_and_flip() {
        let g = f(&[&[3, -7], &[7, 9]]);
        let one = gen_disjoint_copies(&g, 1);
        assert_eq!(one, f(&[&[1, -2], &[2, 3]]));
        let two = gen_disjoint_copies(&g, 2);
        assert_eq!(connected_components(&two).len(), 2);
        assert_eq!(gen_flip(&gen_flip(&g)), g);
        let horn = f(&[&[1, -2, -3], &[-1]]);
        assert!(is_member(&gen_flip(&horn), BaseClassSpec::DHORN));
    }

    #[test]
    fn random_members_are_members() {
        let mut rng = seeded_rng(7);
        for spec in [BaseClassSpec::HORN, BaseClassSpec::DHORN, BaseClassSpec::KROM, BaseClassSpec::NULL] {
            for _ in 0..50 {
                assert!(is_member(&random_member(&mut rng, spec, 8, 12, 4), spec));
            }
        }
    }

    #[test]
    fn pruned_matches_reference() {
        let mut rng = seeded_rng(11);
        for _ in 0..40 {
            let g = random_formula(&mut rng, 6, 6, 3);
            for spec in [BaseClassSpec::HORN, BaseClassSpec::KROM] {
                let exact = reference_depth(&g, spec);
                assert_eq!(exact_backdoor_depth(&g, spec, 10), OracleValue::Exact(exact), "{g:?}");
                if exact > 0 {
                    assert_eq!(exact_backdoor_depth(&g, spec, exact - 1), OracleValue::AboveBudget);
                }
            }
        }
    }
}
