//! The splitter/connector game on a formula.
//!
//! A position is a connected formula `J` together with the assignment that
//! led to it. The splitter names a variable of `J`; the connector answers
//! with a value and one connected component of the instantiated formula.
//! The splitter wins once the position lies in the base class.
//!
//! Splitter strategies are resumable state machines ([`SplitterAlgorithm`]).
//! [`build_backdoor_tree`] explores every connector answer and turns a
//! strategy into a component backdoor tree, or stops at the first
//! certificate the strategy produces.

use std::collections::{HashMap, VecDeque};
use std::fmt::Debug;
use std::hash::Hash;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::class::{alpha_vars, bad_clauses, is_member, BaseClassSpec};
use crate::cnf::{connected_components, ClauseId, Formula, PartialAssignment, Var};
use crate::obstruction::{Evidence, HeuristicRejection, LowerBoundCertificate, ObstructionError, ObstructionTree};
use crate::tree::{ComponentBackdoorTree, Node};

/// A connected formula reached during play.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct GamePosition {
    pub formula: Formula,
    /// Every assignment made on the way here.
    pub history: PartialAssignment,
    /// Number of splitter moves so far.
    pub round: usize,
}

/// Identifies a position of a fixed input formula: surviving clause ids and
/// remaining variables determine the residual clauses.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct PositionKey {
    pub clause_ids: Vec<ClauseId>,
    pub vars: Vec<Var>,
}

impl GamePosition {
    pub fn key(&self) -> PositionKey {
        PositionKey { clause_ids: self.formula.clause_ids(), vars: self.formula.vars() }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct ConnectorReply {
    pub value: bool,
    /// Index into the components of `J[var = value]`.
    pub component: usize,
}

#[derive(Debug, Error)]
pub enum GameError {
    #[error("{var} does not occur in the position")]
    InvalidMove { var: Var },
    #[error("component {component} requested but only {available} exist")]
    InvalidReply { component: usize, available: usize },
    #[error("the splitter lost: a position without variables is not in the class")]
    NoTree,
    #[error("round cap {cap} exceeded on some play")]
    CapExceeded { cap: usize, partial: Box<ComponentBackdoorTree> },
    #[error("strategy misbehaved: {0}")]
    Strategy(String),
    #[error(transparent)]
    Obstruction(#[from] ObstructionError),
}

/// Why a strategy stopped without moving.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum Halt {
    /// The position is in the class.
    Win,
    /// The strategy completed a separation; carries the obstruction tree it
    /// built, if any.
    Separated(Option<ObstructionTree>),
    Certificate(LowerBoundCertificate),
    Rejected(HeuristicRejection),
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Step<S> {
    Move(Var, S),
    Halt(Halt),
}

/// A deterministic, resumable splitter strategy.
///
/// `step` is called on non-winning positions only and must return a
/// variable of the position or halt.
pub trait SplitterAlgorithm {
    type State: Clone + Eq + Hash + Debug + Serialize;

    fn initial_state(&self, position: &GamePosition) -> Self::State;

    fn step(&self, position: &GamePosition, state: Self::State) -> Result<Step<Self::State>, GameError>;

    /// Whether `step` reads the position's history. Strategies that do not
    /// can share work between positions with equal formulas.
    fn reads_history(&self) -> bool {
        true
    }
}

/// One starting position per connected component.
pub fn initial_positions(f: &Formula) -> Vec<GamePosition> {
    connected_components(f)
        .into_iter()
        .map(|formula| GamePosition { formula, history: PartialAssignment::new(), round: 0 })
        .collect()
}

/// The two lists of components the connector chooses from.
pub fn reply_options(position: &GamePosition, var: Var) -> [Vec<Formula>; 2] {
    [
        connected_components(&position.formula.assign(var, false)),
        connected_components(&position.formula.assign(var, true)),
    ]
}

/// Plays one round. `None` means `J[var = value]` has no clauses left.
pub fn advance(position: &GamePosition, var: Var, reply: ConnectorReply) -> Result<Option<GamePosition>, GameError> {
    if !position.formula.contains_var(var) {
        return Err(GameError::InvalidMove { var });
    }
    let mut comps = connected_components(&position.formula.assign(var, reply.value));
    if comps.is_empty() {
        return Ok(None);
    }
    if reply.component >= comps.len() {
        return Err(GameError::InvalidReply { component: reply.component, available: comps.len() });
    }
    Ok(Some(GamePosition {
        formula: comps.swap_remove(reply.component),
        history: position.history.with(var, reply.value),
        round: position.round + 1,
    }))
}

/// A connector strategy.
pub trait Connector {
    /// Index of the starting component.
    fn choose_start(&mut self, starts: &[GamePosition]) -> usize;

    fn reply(&mut self, position: &GamePosition, var: Var, options: &[Vec<Formula>; 2]) -> ConnectorReply;
}

/// Prefers value 0 and the first component; avoids a value that satisfies
/// everything when the other does not.
#[derive(Clone, Copy, Debug, Default)]
pub struct FirstChoice;

impl Connector for FirstChoice {
    fn choose_start(&mut self, _: &[GamePosition]) -> usize {
        0
    }

    fn reply(&mut self, _: &GamePosition, _: Var, options: &[Vec<Formula>; 2]) -> ConnectorReply {
        let value = options[0].is_empty() && !options[1].is_empty();
        ConnectorReply { value, component: 0 }
    }
}

/// Follows a fixed script, then behaves like [`FirstChoice`].
#[derive(Clone, Debug, Default)]
pub struct Scripted {
    pub start: usize,
    pub replies: VecDeque<ConnectorReply>,
}

impl Scripted {
    pub fn new(start: usize, replies: impl IntoIterator<Item = ConnectorReply>) -> Scripted {
        Scripted { start, replies: replies.into_iter().collect() }
    }
}

impl Connector for Scripted {
    fn choose_start(&mut self, _: &[GamePosition]) -> usize {
        self.start
    }

    fn reply(&mut self, position: &GamePosition, var: Var, options: &[Vec<Formula>; 2]) -> ConnectorReply {
        self.replies.pop_front().unwrap_or_else(|| FirstChoice.reply(position, var, options))
    }
}

/// Uniform over all (value, component) answers, seeded.
#[derive(Clone, Debug)]
pub struct RandomConnector {
    rng: ChaCha8Rng,
}

impl RandomConnector {
    pub fn new(seed: u64) -> RandomConnector {
        RandomConnector { rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl Connector for RandomConnector {
    fn choose_start(&mut self, starts: &[GamePosition]) -> usize {
        if starts.is_empty() {
            0
        } else {
            self.rng.gen_range(0..starts.len())
        }
    }

    fn reply(&mut self, _: &GamePosition, _: Var, options: &[Vec<Formula>; 2]) -> ConnectorReply {
        let total = options[0].len() + options[1].len();
        if total == 0 {
            return ConnectorReply { value: false, component: 0 };
        }
        let k = self.rng.gen_range(0..total);
        if k < options[0].len() {
            ConnectorReply { value: false, component: k }
        } else {
            ConnectorReply { value: true, component: k - options[0].len() }
        }
    }
}

/// How a play ended.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum PlayOutcome {
    Win,
    Halted(Halt),
    CapExceeded,
    /// A non-member position without variables.
    SplitterLost,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct RoundRecord {
    pub var: Var,
    pub reply: ConnectorReply,
}

/// A complete play.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Transcript {
    /// Chosen starting component; `None` for the empty formula.
    pub start: Option<usize>,
    pub rounds: Vec<RoundRecord>,
    pub outcome: PlayOutcome,
    /// The last position; `None` when every clause got satisfied.
    pub final_position: Option<GamePosition>,
}

/// Plays the game to the end: a winning position, a halt, a lost position
/// or the round cap.
pub fn run_game<A: SplitterAlgorithm, C: Connector>(
    f: &Formula,
    spec: BaseClassSpec,
    alg: &A,
    connector: &mut C,
    round_cap: usize,
) -> Result<Transcript, GameError> {
    let starts = initial_positions(f);
    if starts.is_empty() {
        return Ok(Transcript { start: None, rounds: vec![], outcome: PlayOutcome::Win, final_position: None });
    }
    let start = connector.choose_start(&starts);
    let mut position =
        starts.get(start).cloned().ok_or(GameError::InvalidReply { component: start, available: starts.len() })?;
    let mut state = alg.initial_state(&position);
    let mut rounds = Vec::new();
    let finish =
        |rounds, outcome, position| Transcript { start: Some(start), rounds, outcome, final_position: position };
    loop {
        if is_member(&position.formula, spec) {
            return Ok(finish(rounds, PlayOutcome::Win, Some(position)));
        }
        if position.formula.vars().is_empty() {
            return Ok(finish(rounds, PlayOutcome::SplitterLost, Some(position)));
        }
        if position.round >= round_cap {
            return Ok(finish(rounds, PlayOutcome::CapExceeded, Some(position)));
        }
        let (var, next_state) = match alg.step(&position, state)? {
            Step::Halt(h) => return Ok(finish(rounds, PlayOutcome::Halted(h), Some(position))),
            Step::Move(v, s) => (v, s),
        };
        if !position.formula.contains_var(var) {
            return Err(GameError::InvalidMove { var });
        }
        let options = reply_options(&position, var);
        let reply = connector.reply(&position, var, &options);
        rounds.push(RoundRecord { var, reply });
        match advance(&position, var, reply)? {
            None => return Ok(finish(rounds, PlayOutcome::Win, None)),
            Some(next) => position = next,
        }
        state = next_state;
    }
}

/// What [`build_backdoor_tree`] produced.
#[derive(Clone, Debug)]
pub enum BuildOutcome {
    Tree(ComponentBackdoorTree, BuildStats),
    Certificate(LowerBoundCertificate),
    Rejected(HeuristicRejection),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize)]
pub struct BuildStats {
    pub variable_nodes: usize,
    pub memo_hits: usize,
    /// Largest round reached on any play.
    pub max_round: usize,
}

enum Abort {
    Certificate(LowerBoundCertificate),
    Rejected(HeuristicRejection),
    Error(GameError),
}

impl From<GameError> for Abort {
    fn from(e: GameError) -> Abort {
        Abort::Error(e)
    }
}

struct Explorer<'a, A: SplitterAlgorithm> {
    spec: BaseClassSpec,
    alg: &'a A,
    round_cap: usize,
    memo: HashMap<(PositionKey, A::State), Node>,
    stats: BuildStats,
    cap_hit: bool,
}

impl<A: SplitterAlgorithm> Explorer<'_, A> {
    fn explore(&mut self, position: GamePosition, state: A::State) -> Result<Node, Abort> {
        self.stats.max_round = self.stats.max_round.max(position.round);
        if is_member(&position.formula, self.spec) {
            return Ok(Node::leaf(position.formula));
        }
        if position.formula.vars().is_empty() {
            return Err(GameError::NoTree.into());
        }
        if position.round >= self.round_cap {
            self.cap_hit = true;
            return Ok(Node::leaf(position.formula));
        }
        let memo_key = if self.alg.reads_history() { None } else { Some((position.key(), state.clone())) };
        if let Some(node) = memo_key.as_ref().and_then(|k| self.memo.get(k)) {
            self.stats.memo_hits += 1;
            return Ok(node.clone());
        }
        let (var, next) = match self.alg.step(&position, state)? {
            Step::Move(v, s) => (v, s),
            Step::Halt(Halt::Certificate(c)) => return Err(Abort::Certificate(c)),
            Step::Halt(Halt::Rejected(r)) => return Err(Abort::Rejected(r)),
            Step::Halt(Halt::Separated(Some(t))) => {
                let cert = LowerBoundCertificate::new(self.spec, Evidence::ObstructionTree(t));
                return Err(Abort::Certificate(cert));
            }
            Step::Halt(Halt::Separated(None)) => return Err(GameError::NoTree.into()),
            Step::Halt(Halt::Win) => {
                return Err(GameError::Strategy("claimed a win at a non-member position".into()).into())
            }
        };
        if !position.formula.contains_var(var) {
            return Err(GameError::InvalidMove { var }.into());
        }
        self.stats.variable_nodes += 1;
        let mut children = Vec::with_capacity(2);
        for value in [false, true] {
            let formula = position.formula.assign(var, value);
            let history = position.history.with(var, value);
            let round = position.round + 1;
            let mut comps = connected_components(&formula);
            let child = match comps.len() {
                0 => Node::leaf(formula),
                1 => {
                    let formula = comps.pop().unwrap();
                    self.explore(GamePosition { formula, history, round }, next.clone())?
                }
                _ => {
                    let mut parts = Vec::with_capacity(comps.len());
                    for comp in comps {
                        let pos = GamePosition { formula: comp, history: history.clone(), round };
                        parts.push(self.explore(pos, next.clone())?);
                    }
                    Node::component(formula, parts)
                }
            };
            children.push(child);
        }
        let one = children.pop().unwrap();
        let zero = children.pop().unwrap();
        let node = Node::variable(position.formula, var, zero, one);
        if let Some(k) = memo_key {
            self.memo.insert(k, node.clone());
        }
        Ok(node)
    }
}

/// Explores every connector answer against `alg` and assembles the
/// resulting component backdoor tree.
///
/// Answers are explored value 0 first, components by smallest clause id.
/// The first certificate or rejection met is returned at once; a separation
/// that carries an obstruction tree becomes a certificate. Plays reaching
/// `round_cap` leave unexpanded leaves and yield
/// [`GameError::CapExceeded`] with the partial tree.
pub fn build_backdoor_tree<A: SplitterAlgorithm>(
    f: &Formula,
    spec: BaseClassSpec,
    alg: &A,
    round_cap: usize,
) -> Result<BuildOutcome, GameError> {
    let mut explorer =
        Explorer { spec, alg, round_cap, memo: HashMap::new(), stats: BuildStats::default(), cap_hit: false };
    let starts = initial_positions(f);
    let result = match starts.len() {
        0 => Ok(Node::leaf(f.clone())),
        1 => {
            let start = starts.into_iter().next().unwrap();
            let state = alg.initial_state(&start);
            explorer.explore(start, state)
        }
        _ => starts
            .into_iter()
            .map(|start| {
                let state = alg.initial_state(&start);
                explorer.explore(start, state)
            })
            .collect::<Result<Vec<_>, _>>()
            .map(|parts| Node::component(f.clone(), parts)),
    };
    match result {
        Ok(root) => {
            let tree = ComponentBackdoorTree::new(root);
            if explorer.cap_hit {
                Err(GameError::CapExceeded { cap: round_cap, partial: Box::new(tree) })
            } else {
                Ok(BuildOutcome::Tree(tree, explorer.stats))
            }
        }
        Err(Abort::Certificate(c)) => Ok(BuildOutcome::Certificate(c)),
        Err(Abort::Rejected(r)) => Ok(BuildOutcome::Rejected(r)),
        Err(Abort::Error(e)) => Err(e),
    }
}

/// Moves on the smallest α-variable of the smallest bad clause.
#[derive(Clone, Copy, Debug)]
pub struct AlphaGreedySplitter {
    pub spec: BaseClassSpec,
}

impl SplitterAlgorithm for AlphaGreedySplitter {
    type State = ();

    fn initial_state(&self, _: &GamePosition) {}

    fn step(&self, position: &GamePosition, _: ()) -> Result<Step<()>, GameError> {
        let Some(&c) = bad_clauses(&position.formula, self.spec).first() else {
            return Ok(Step::Halt(Halt::Win));
        };
        let clause = position.formula.clause(c).expect("bad clause of the position");
        let var = alpha_vars(clause, self.spec)[0];
        Ok(Step::Move(var, ()))
    }

    fn reads_history(&self) -> bool {
        false
    }
}

/// Replies along one root-to-leaf path of a tree: the component index at
/// each component node and the value at each variable node.
pub fn replay_script(choices: &[(usize, bool)]) -> Scripted {
    let mut it = choices.iter();
    let start = it.next().map_or(0, |c| c.0);
    Scripted::new(start, it.map(|&(component, value)| ConnectorReply { value, component }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{validate_tree, NodeKind};

    fn f(clauses: &[&[i64]]) -> Formula {
        Formula::from_lits(clauses).unwrap()
    }

    /// Always names the given variable if present, else the smallest one.
    struct Named(u32);

    impl SplitterAlgorithm for Named {
        type State = ();
        fn initial_state(&self, _: &GamePosition) {}
        fn step(&self, p: &GamePosition, _: ()) -> Result<Step<()>, GameError> {
            let v = if p.formula.contains_var(Var(self.0)) { Var(self.0) } else { p.formula.vars()[0] };
            Ok(Step::Move(v, ()))
        }
    }

    #[test]
    fn initial_positions_per_component() {
        assert_eq!(initial_positions(&f(&[&[1, 2]])).len(), 1);
        assert_eq!(initial_positions(&f(&[&[1, 2], &[3]])).len(), 2);
        assert!(initial_positions(&Formula::empty()).is_empty());
    }

    #[test]
    fn advance_examples() {
        let start = &initial_positions(&f(&[&[1], &[-1, 2]]))[0];
        let next = advance(start, Var(1), ConnectorReply { value: true, component: 0 }).unwrap().unwrap();
        assert_eq!(next.formula, f(&[&[1], &[-1, 2]]).assign(Var(1), true));
        assert_eq!(next.history.get(Var(1)), Some(true));
        assert_eq!(next.round, 1);

        let fork = &initial_positions(&f(&[&[1, 2], &[1, 3]]))[0];
        assert_eq!(reply_options(fork, Var(1))[0].len(), 2);
        let b = advance(fork, Var(1), ConnectorReply { value: false, component: 1 }).unwrap().unwrap();
        assert_eq!(b.formula.clause_ids(), vec![ClauseId(2)]);
        assert!(advance(fork, Var(1), ConnectorReply { value: true, component: 0 }).unwrap().is_none());
        assert!(matches!(
            advance(fork, Var(1), ConnectorReply { value: false, component: 2 }),
            Err(GameError::InvalidReply { .. })
        ));
        assert!(matches!(
            advance(fork, Var(9), ConnectorReply { value: false, component: 0 }),
            Err(GameError::InvalidMove { .. })
        ));
    }

    #[test]
    fn member_wins_immediately() {
        let g = f(&[&[1, -2]]);
        let t =
            run_game(&g, BaseClassSpec::HORN, &AlphaGreedySplitter { spec: BaseClassSpec::HORN }, &mut FirstChoice, 5)
                .unwrap();
        assert!(t.rounds.is_empty());
        assert_eq!(t.outcome, PlayOutcome::Win);
    }

    #[test]
    fn single_bad_clause_one_round() {
        let g = f(&[&[1, 2]]);
        let spec = BaseClassSpec::HORN;
        for value in [false, true] {
            let mut c = Scripted::new(0, [ConnectorReply { value, component: 0 }]);
            let t = run_game(&g, spec, &AlphaGreedySplitter { spec }, &mut c, 5).unwrap();
            assert_eq!(t.outcome, PlayOutcome::Win);
            assert_eq!(t.rounds.len(), 1);
        }
    }

    #[test]
    fn splitter_loses_without_variables() {
        // {x} into Null: x = 0 leaves the empty clause, which Null accepts;
        // a lost position needs a non-member without variables, which no
        // C_{α,s} has, so the cap is what stops a stubborn play instead.
        let g = f(&[&[1], &[-1]]);
        let t = run_game(&g, BaseClassSpec::NULL, &Named(1), &mut FirstChoice, 5).unwrap();
        assert_eq!(t.outcome, PlayOutcome::Win);
        assert_eq!(t.final_position.unwrap().formula.len(), 1);
    }

    #[test]
    fn cap_is_an_outcome() {
        let g = f(&[&[1, 2, 3, 4]]);
        let spec = BaseClassSpec::HORN;
        let t = run_game(&g, spec, &AlphaGreedySplitter { spec }, &mut FirstChoice, 1).unwrap();
        assert_eq!(t.outcome, PlayOutcome::CapExceeded);
    }

    #[test]
    fn tree_for_contradiction() {
        let g = f(&[&[1], &[-1]]);
        let BuildOutcome::Tree(t, stats) = build_backdoor_tree(&g, BaseClassSpec::NULL, &Named(1), 3).unwrap() else {
            panic!("expected a tree")
        };
        assert_eq!(t.depth(), 1);
        assert_eq!(stats.variable_nodes, 1);
        let NodeKind::Variable { children, .. } = &t.root().kind else { panic!() };
        assert!(children.iter().all(|c| c.formula.has_empty_clause()));
        validate_tree(&g, &t, BaseClassSpec::NULL).unwrap();
    }

    #[test]
    fn tree_over_components_and_cap() {
        let g = f(&[&[1, 2, 3], &[4, 5]]);
        let spec = BaseClassSpec::HORN;
        let alg = AlphaGreedySplitter { spec };
        let BuildOutcome::Tree(t, _) = build_backdoor_tree(&g, spec, &alg, 5).unwrap() else { panic!() };
        validate_tree(&g, &t, spec).unwrap();
        assert_eq!(t.depth(), 2);
        match build_backdoor_tree(&g, spec, &alg, 1) {
            Err(GameError::CapExceeded { partial, .. }) => assert!(validate_tree(&g, &partial, spec).is_err()),
            other => panic!("unexpected {other:?}"),
        }
    }
}
