//! The recursive obstruction-tree strategy.
//!
//! A level-`i` machine either wins, produces a certificate, or halts with an
//! obstruction tree of depth `i` whose clauses no longer share a variable
//! with the position. Level `i` runs a level-`i-1` machine twice (the second
//! time from where the first stopped), joins the two trees by a shortest
//! path in the formula the machine started from, and separates that path.
//! The recursion is kept on an explicit stack so the state can be cloned at
//! every connector branch.

use std::sync::Arc;

use serde::Serialize;

use super::separator::{wide_clause, SeparatorConfig, SeparatorState, SeparatorStep, DEFAULT_PATH_CAP};
use super::{ObstructionError, ObstructionTree};
use crate::class::{alpha_vars, bad_clauses, is_good, is_member, BaseClassSpec};
use crate::cnf::{shortest_path, ClauseId, Formula, IncidencePath, PartialAssignment, Vertex};
use crate::game::{GameError, GamePosition, Halt, SplitterAlgorithm, Step};

#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize)]
enum Phase {
    Begin,
    /// Level 1 with a single bad clause: shrink it until it is good.
    OneBad(ClauseId),
    AwaitFirst,
    AwaitSecond {
        first: ObstructionTree,
        beta: PartialAssignment,
    },
    Separating {
        tree: ObstructionTree,
        separator: SeparatorState,
    },
}

#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize)]
struct Frame {
    level: usize,
    /// The position the frame started in.
    start: Arc<Formula>,
    start_history: PartialAssignment,
    phase: Phase,
}

/// Stack of active sub-machines, innermost last.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize)]
pub struct MainState {
    frames: Vec<Frame>,
}

impl MainState {
    /// Number of separator paths in the innermost active separation.
    pub fn active_paths(&self) -> usize {
        self.frames
            .iter()
            .rev()
            .find_map(|f| match &f.phase {
                Phase::Separating { separator, .. } => Some(separator.paths().len()),
                _ => None,
            })
            .unwrap_or(0)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct MainSplitter {
    level: usize,
    config: SeparatorConfig,
}

/// A level-`i` machine for depth parameter `d`, `1 <= i <= d`. Clauses with
/// more than `d + s` α-literals are reported as certificates.
pub fn build_main_splitter(i: usize, d: usize, spec: BaseClassSpec) -> Result<MainSplitter, ObstructionError> {
    if i < 1 || i > d {
        return Err(ObstructionError::LevelOutOfRange { i, d });
    }
    Ok(MainSplitter { level: i, config: SeparatorConfig { d, spec, path_cap: DEFAULT_PATH_CAP, self_check: false } })
}

impl MainSplitter {
    pub fn with_path_cap(mut self, cap: usize) -> MainSplitter {
        self.config.path_cap = cap;
        self
    }

    /// Re-verify every separator obstruction after each extension.
    pub fn with_self_check(mut self, on: bool) -> MainSplitter {
        self.config.self_check = on;
        self
    }

    pub fn level(&self) -> usize {
        self.level
    }

    fn frame(&self, level: usize, position: &GamePosition) -> Frame {
        Frame {
            level,
            start: Arc::new(position.formula.clone()),
            start_history: position.history.clone(),
            phase: Phase::Begin,
        }
    }

    fn separate(
        &self,
        frame: &Frame,
        tree: ObstructionTree,
        path: IncidencePath,
        position: &GamePosition,
    ) -> Result<Phase, GameError> {
        let separator = SeparatorState::new(
            frame.start.clone(),
            path,
            frame.start_history.clone(),
            position.history.clone(),
            self.config.spec,
        )?;
        Ok(Phase::Separating { tree, separator })
    }

    /// Starts the top frame on the current position.
    fn begin(&self, state: &mut MainState, position: &GamePosition) -> Result<(), GameError> {
        let spec = self.config.spec;
        let top = state.frames.last().expect("caller checked");
        let level = top.level;
        let bad = bad_clauses(&position.formula, spec);
        let phase = match level {
            0 => {
                let c = bad[0];
                self.separate(top, ObstructionTree::Leaf(c), IncidencePath::single(Vertex::Clause(c)), position)?
            }
            1 if bad.len() == 1 => Phase::OneBad(bad[0]),
            1 => match disjoint_pair(&position.formula, &bad) {
                Some((c1, c2)) => {
                    let path = shortest_path(&position.formula, &[Vertex::Clause(c1)], &[Vertex::Clause(c2)])
                        .expect("clauses of the position")
                        .ok_or_else(|| GameError::Strategy("position is not connected".into()))?;
                    let tree = ObstructionTree::join(
                        ObstructionTree::Leaf(c1),
                        position.history.clone(),
                        ObstructionTree::Leaf(c2),
                        path.clone(),
                    );
                    self.separate(top, tree, path, position)?
                }
                None => Phase::AwaitFirst,
            },
            _ => Phase::AwaitFirst,
        };
        let awaiting = matches!(phase, Phase::AwaitFirst);
        state.frames.last_mut().unwrap().phase = phase;
        if awaiting {
            state.frames.push(self.frame(level - 1, position));
        }
        Ok(())
    }

    /// Hands a finished tree to the parent frame. Returns the halt when the
    /// outermost frame finished.
    fn deliver(
        &self,
        state: &mut MainState,
        tree: ObstructionTree,
        position: &GamePosition,
    ) -> Result<Option<Halt>, GameError> {
        let Some(parent) = state.frames.last_mut() else {
            return Ok(Some(Halt::Separated(Some(tree))));
        };
        match std::mem::replace(&mut parent.phase, Phase::Begin) {
            Phase::AwaitFirst => {
                parent.phase = Phase::AwaitSecond { first: tree, beta: position.history.clone() };
                let child = self.frame(parent.level - 1, position);
                state.frames.push(child);
            }
            Phase::AwaitSecond { first, beta } => {
                let c1 = *first.leaves().iter().min().expect("trees have leaves");
                let c2 = *tree.leaves().iter().min().expect("trees have leaves");
                let path = shortest_path(&parent.start, &[Vertex::Clause(c1)], &[Vertex::Clause(c2)])
                    .map_err(|e| GameError::Strategy(format!("joining trees: {e}")))?
                    .ok_or_else(|| GameError::Strategy("joined trees lie in different components".into()))?;
                let joined = ObstructionTree::join(first, beta, tree, path.clone());
                let phase = self.separate(parent, joined, path, position)?;
                state.frames.last_mut().unwrap().phase = phase;
            }
            _ => return Err(GameError::Strategy("finished a frame whose parent was not waiting".into())),
        }
        Ok(None)
    }
}

/// The lexicographically smallest pair of variable-disjoint bad clauses.
fn disjoint_pair(f: &Formula, bad: &[ClauseId]) -> Option<(ClauseId, ClauseId)> {
    for (k, &c1) in bad.iter().enumerate() {
        let first = f.clause(c1)?;
        for &c2 in &bad[k + 1..] {
            let second = f.clause(c2)?;
            if !second.vars().any(|v| first.contains_var(v)) {
                return Some((c1, c2));
            }
        }
    }
    None
}

impl SplitterAlgorithm for MainSplitter {
    type State = MainState;

    fn initial_state(&self, position: &GamePosition) -> MainState {
        MainState { frames: vec![self.frame(self.level, position)] }
    }

    fn step(&self, position: &GamePosition, mut state: MainState) -> Result<Step<MainState>, GameError> {
        let spec = self.config.spec;
        if let Some(cert) = wide_clause(position, self.config.d, spec) {
            return Ok(Step::Halt(Halt::Certificate(cert)));
        }
        if is_member(&position.formula, spec) {
            return Ok(Step::Halt(Halt::Win));
        }
        loop {
            let top = state
                .frames
                .last_mut()
                .ok_or_else(|| GameError::Strategy("stepped after the outermost frame finished".into()))?;
            match &mut top.phase {
                Phase::Begin => self.begin(&mut state, position)?,
                Phase::OneBad(c) => {
                    let clause = position
                        .formula
                        .clause(*c)
                        .filter(|cl| !is_good(cl, spec))
                        .ok_or_else(|| GameError::Strategy("the single bad clause vanished".into()))?;
                    let var = alpha_vars(clause, spec)[0];
                    return Ok(Step::Move(var, state));
                }
                Phase::AwaitFirst | Phase::AwaitSecond { .. } => {
                    return Err(GameError::Strategy("a waiting frame is innermost".into()));
                }
                Phase::Separating { separator, .. } => match separator.step(position, &self.config)? {
                    SeparatorStep::Move(v) => return Ok(Step::Move(v, state)),
                    SeparatorStep::Halt(Halt::Separated(None)) => {
                        let Some(Frame { phase: Phase::Separating { tree, .. }, .. }) = state.frames.pop() else {
                            unreachable!("matched a separating frame");
                        };
                        if let Some(halt) = self.deliver(&mut state, tree, position)? {
                            return Ok(Step::Halt(halt));
                        }
                    }
                    SeparatorStep::Halt(other) => return Ok(Step::Halt(other)),
                },
            }
        }
    }
}
