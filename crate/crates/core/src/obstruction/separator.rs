//! The path-separation strategy.
//!
//! Starting from a shortest path `P` between two bad clauses, the splitter
//! grows a separator obstruction: it assigns the important variables of the
//! latest step, then attaches the nearest bad clause reachable from the tree
//! by a shortest path, and repeats. When no bad clause of the position is
//! connected to the tree any more, it assigns the remaining variables of the
//! clauses of `P` until none occurs in the position.

use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use serde::Serialize;

use super::verify::{check_first_path, registration, replay_separator};
use super::{
    count_self_check, separator_threshold_saturating, Evidence, HeuristicRejection, LowerBoundCertificate,
    ObstructionError, SeparatorObstruction, WideClause,
};
use crate::class::{alpha_literal_count, bad_clauses, is_member, BaseClassSpec};
use crate::cnf::{Formula, IncidenceIndex, IncidencePath, PartialAssignment, Var, Vertex};
use crate::game::{GameError, GamePosition, Halt, SplitterAlgorithm, Step};

/// Default number of paths after which the strategy gives up.
pub const DEFAULT_PATH_CAP: usize = 1_000_000;

/// Parameters shared by the separator and the strategies that embed it.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize)]
pub(crate) struct SeparatorConfig {
    pub d: usize,
    pub spec: BaseClassSpec,
    pub path_cap: usize,
    /// Re-verify the obstruction after every extension.
    pub self_check: bool,
}

/// A clause of the position with more than `d + s` α-literals.
pub(crate) fn wide_clause(position: &GamePosition, d: usize, spec: BaseClassSpec) -> Option<LowerBoundCertificate> {
    let limit = d + spec.s() as usize;
    position.formula.clauses().iter().find_map(|c| {
        let alpha_count = alpha_literal_count(c, spec);
        (alpha_count > limit)
            .then(|| LowerBoundCertificate::new(spec, Evidence::WideClause(WideClause { clause: c.id(), alpha_count })))
    })
}

pub(crate) enum SeparatorStep {
    Move(Var),
    Halt(Halt),
}

/// The partial separator obstruction and the bookkeeping around it.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize)]
pub struct SeparatorState {
    /// Formula in which the first path is a shortest path.
    ambient: Arc<Formula>,
    origin: PartialAssignment,
    prefix: PartialAssignment,
    paths: Vec<IncidencePath>,
    tree: BTreeSet<Vertex>,
    important: BTreeSet<Var>,
    /// `V_i \ V_{i-1}` in increasing order.
    increments: Vec<Vec<Var>>,
    /// Values of the important variables handled so far. A variable that
    /// left the position before it could be assigned gets 0.
    tau: PartialAssignment,
    /// Variables of the clauses of the first path.
    path_vars: Vec<Var>,
    cleanup: bool,
}

impl SeparatorState {
    /// Seeds the obstruction with `path`, a shortest path between two bad
    /// clauses of `ambient`. `origin` is the assignment that produced
    /// `ambient`; `prefix` the history of the position the strategy starts
    /// in.
    pub fn new(
        ambient: Arc<Formula>,
        path: IncidencePath,
        origin: PartialAssignment,
        prefix: PartialAssignment,
        spec: BaseClassSpec,
    ) -> Result<SeparatorState, ObstructionError> {
        check_first_path(&ambient, &path, spec).map_err(ObstructionError::InvalidPath)?;
        let (_, v1) = registration(&ambient, spec, &path, true);
        let mut path_vars: Vec<Var> = path
            .clauses()
            .iter()
            .filter_map(|&c| ambient.clause(c))
            .flat_map(|c| c.vars().collect::<Vec<_>>())
            .collect();
        path_vars.sort_unstable();
        path_vars.dedup();
        Ok(SeparatorState {
            tree: path.vertices().iter().copied().collect(),
            paths: vec![path],
            important: v1.clone(),
            increments: vec![v1.into_iter().collect()],
            tau: PartialAssignment::new(),
            path_vars,
            cleanup: false,
            ambient,
            origin,
            prefix,
        })
    }

    pub fn paths(&self) -> &[IncidencePath] {
        &self.paths
    }

    pub fn increments(&self) -> &[Vec<Var>] {
        &self.increments
    }

    /// The obstruction built so far, with unassigned important variables
    /// set to 0.
    pub fn obstruction(&self) -> SeparatorObstruction {
        let mut tau = self.tau.clone();
        for &v in &self.important {
            if !tau.contains(v) {
                tau.set(v, false);
            }
        }
        SeparatorObstruction {
            origin: self.origin.clone(),
            prefix: self.prefix.clone(),
            paths: self.paths.clone(),
            tau,
        }
    }

    pub(crate) fn step(
        &mut self,
        position: &GamePosition,
        config: &SeparatorConfig,
    ) -> Result<SeparatorStep, GameError> {
        let spec = config.spec;
        if let Some(cert) = wide_clause(position, config.d, spec) {
            return Ok(SeparatorStep::Halt(Halt::Certificate(cert)));
        }
        if is_member(&position.formula, spec) {
            return Ok(SeparatorStep::Halt(Halt::Win));
        }
        let present: HashSet<Var> = position.formula.vars().into_iter().collect();
        if !self.cleanup {
            loop {
                let pending = self.increments.last().expect("seeded with the first path").clone();
                for u in pending {
                    if self.tau.contains(u) {
                        continue;
                    }
                    if let Some(value) = position.history.get(u) {
                        self.tau.set(u, value);
                    } else if present.contains(&u) {
                        return Ok(SeparatorStep::Move(u));
                    } else {
                        self.tau.set(u, false);
                    }
                }
                let size = self.paths.len() as u64 + 1;
                if size >= separator_threshold_saturating(config.d as u32) {
                    let x = self.obstruction();
                    let cert = LowerBoundCertificate::new(spec, Evidence::SeparatorObstruction(x));
                    return Ok(SeparatorStep::Halt(Halt::Certificate(cert)));
                }
                if self.paths.len() >= config.path_cap {
                    return Ok(SeparatorStep::Halt(Halt::Rejected(HeuristicRejection {
                        reason: "separator obstruction reached the path cap".into(),
                        paths: self.paths.len(),
                        cap: config.path_cap,
                    })));
                }
                let index = IncidenceIndex::new(&position.formula);
                let sources: Vec<Vertex> = self.tree.iter().copied().filter(|&v| index.contains(v)).collect();
                let targets: Vec<Vertex> =
                    bad_clauses(&position.formula, spec).into_iter().map(Vertex::Clause).collect();
                if sources.is_empty() || targets.is_empty() {
                    break;
                }
                let Some(path) = index.shortest_path(&sources, &targets).expect("vertices of the position") else {
                    break;
                };
                self.register(&position.formula, path, spec);
                if config.self_check {
                    self.check(config)?;
                }
            }
            self.cleanup = true;
        }
        match self.path_vars.iter().find(|v| present.contains(v)) {
            Some(&v) => Ok(SeparatorStep::Move(v)),
            None => Ok(SeparatorStep::Halt(Halt::Separated(None))),
        }
    }

    fn register(&mut self, j: &Formula, path: IncidencePath, spec: BaseClassSpec) {
        let (_, added) = registration(j, spec, &path, false);
        let fresh: Vec<Var> = added.difference(&self.important).copied().collect();
        self.important.extend(fresh.iter().copied());
        self.tree.extend(path.vertices().iter().copied());
        self.paths.push(path);
        self.increments.push(fresh);
    }

    /// Replays the obstruction in the ambient formula and checks the
    /// structural properties and the size of every increment.
    fn check(&self, config: &SeparatorConfig) -> Result<(), GameError> {
        count_self_check();
        let spec = config.spec;
        let mut x = self.obstruction();
        x.origin = PartialAssignment::new();
        let fail = |reason: String| GameError::Strategy(format!("separator self-check: {reason}"));
        let replay = replay_separator(&self.ambient, &x, spec)?.map_err(fail)?;
        let width = config.d + spec.s() as usize;
        if let Some(v) = replay.violations(&self.ambient, &x, spec, width).first() {
            return Err(fail(format!("C{} at step {}: {}", v.property, v.step, v.detail)));
        }
        let s = spec.s() as usize;
        if replay.increments[0].len() > 2 * (config.d + s) {
            return Err(fail(format!("|V_1| = {}", replay.increments[0].len())));
        }
        if let Some(big) = replay.increments[1..].iter().find(|inc| inc.len() > 3 * s + config.d + 1) {
            return Err(fail(format!("increment of {} variables", big.len())));
        }
        Ok(())
    }
}

/// The separation strategy as a standalone splitter algorithm.
#[derive(Clone, Debug)]
pub struct SeparatorSplitter {
    ambient: Arc<Formula>,
    path: IncidencePath,
    origin: PartialAssignment,
    config: SeparatorConfig,
}

/// A separator strategy for `path`, which must be a shortest path between
/// two bad clauses of `ambient`. Scans for clauses with more than `d + s`
/// α-literals and compares the obstruction size against the threshold for
/// `d`.
pub fn build_separator_splitter(
    ambient: &Formula,
    path: IncidencePath,
    d: usize,
    spec: BaseClassSpec,
) -> Result<SeparatorSplitter, ObstructionError> {
    check_first_path(ambient, &path, spec).map_err(ObstructionError::InvalidPath)?;
    Ok(SeparatorSplitter {
        ambient: Arc::new(ambient.clone()),
        path,
        origin: PartialAssignment::new(),
        config: SeparatorConfig { d, spec, path_cap: DEFAULT_PATH_CAP, self_check: false },
    })
}

impl SeparatorSplitter {
    /// Declares the assignment under which the ambient formula arose, for
    /// strategies resumed in the middle of a play.
    pub fn with_origin(mut self, origin: PartialAssignment) -> SeparatorSplitter {
        self.origin = origin;
        self
    }

    pub fn with_path_cap(mut self, cap: usize) -> SeparatorSplitter {
        self.config.path_cap = cap;
        self
    }

    pub fn with_self_check(mut self, on: bool) -> SeparatorSplitter {
        self.config.self_check = on;
        self
    }
}

impl SplitterAlgorithm for SeparatorSplitter {
    type State = SeparatorState;

    fn initial_state(&self, position: &GamePosition) -> SeparatorState {
        SeparatorState::new(
            self.ambient.clone(),
            self.path.clone(),
            self.origin.clone(),
            position.history.clone(),
            self.config.spec,
        )
        .expect("path checked at construction")
    }

    fn step(&self, position: &GamePosition, mut state: SeparatorState) -> Result<Step<SeparatorState>, GameError> {
        Ok(match state.step(position, &self.config)? {
            SeparatorStep::Move(v) => Step::Move(v, state),
            SeparatorStep::Halt(h) => Step::Halt(h),
        })
    }
}
