//! Lower-bound certificates, their verifiers, the round bounds of the two
//! splitter strategies, and the strategies themselves.
//!
//! Three kinds of evidence certify that a formula has large backdoor depth:
//! an obstruction tree of depth `d` (depth at least `d + 1`), a clause with
//! `k` α-literals (depth at least `k - s`), and a separator obstruction whose
//! size reaches [`separator_threshold`]`(d)` (depth at least `d`).

mod main_splitter;
mod separator;
mod verify;

pub use main_splitter::{build_main_splitter, MainSplitter, MainState};
pub use separator::{build_separator_splitter, SeparatorSplitter, SeparatorState, DEFAULT_PATH_CAP};
pub use verify::{
    replay_separator, verify_certificate, verify_obstruction_tree, verify_separator_obstruction, PropertyViolation,
    SeparatorReplay,
};

use std::collections::BTreeSet;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::class::BaseClassSpec;
use crate::cnf::{ClauseId, IncidencePath, PartialAssignment, Var, Vertex};

/// Recursive witness of large backdoor depth.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObstructionTree {
    /// A bad clause.
    Leaf(ClauseId),
    Join(Box<Join>),
}

/// Two obstruction trees of equal depth joined by a path. `right` lives in
/// `F[beta]`.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct Join {
    pub left: ObstructionTree,
    pub beta: PartialAssignment,
    pub right: ObstructionTree,
    pub path: IncidencePath,
}

impl ObstructionTree {
    pub fn join(
        left: ObstructionTree,
        beta: PartialAssignment,
        right: ObstructionTree,
        path: IncidencePath,
    ) -> ObstructionTree {
        ObstructionTree::Join(Box::new(Join { left, beta, right, path }))
    }

    pub fn depth(&self) -> usize {
        match self {
            ObstructionTree::Leaf(_) => 0,
            ObstructionTree::Join(j) => 1 + j.left.depth().max(j.right.depth()),
        }
    }

    /// Leaf clauses in left-to-right order.
    pub fn leaves(&self) -> Vec<ClauseId> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<ClauseId>) {
        match self {
            ObstructionTree::Leaf(c) => out.push(*c),
            ObstructionTree::Join(j) => {
                j.left.collect_leaves(out);
                j.right.collect_leaves(out);
            }
        }
    }

    /// Every vertex of the tree: leaves and all path vertices.
    pub fn vertices(&self) -> BTreeSet<Vertex> {
        let mut out = BTreeSet::new();
        self.collect_vertices(&mut out);
        out
    }

    fn collect_vertices(&self, out: &mut BTreeSet<Vertex>) {
        match self {
            ObstructionTree::Leaf(c) => {
                out.insert(Vertex::Clause(*c));
            }
            ObstructionTree::Join(j) => {
                j.left.collect_vertices(out);
                j.right.collect_vertices(out);
                out.extend(j.path.vertices().iter().copied());
            }
        }
    }

    /// The clauses of the tree.
    pub fn clauses(&self) -> BTreeSet<ClauseId> {
        self.vertices().into_iter().filter_map(Vertex::as_clause).collect()
    }
}

/// Sequence of shortest paths between bad clauses together with an
/// assignment of the important variables.
///
/// `origin` is the assignment under which the first path is a shortest path
/// between two bad clauses. Every later path is computed under `prefix`
/// extended by the values of the important variables registered so far.
/// Both are empty when the construction starts at the input formula.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct SeparatorObstruction {
    pub origin: PartialAssignment,
    pub prefix: PartialAssignment,
    pub paths: Vec<IncidencePath>,
    pub tau: PartialAssignment,
}

impl SeparatorObstruction {
    /// Number of leaves, ℓ + 1.
    pub fn size(&self) -> usize {
        self.paths.len() + 1
    }
}

/// A clause with many α-literals.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct WideClause {
    pub clause: ClauseId,
    pub alpha_count: usize,
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Evidence {
    ObstructionTree(ObstructionTree),
    SeparatorObstruction(SeparatorObstruction),
    WideClause(WideClause),
}

impl Evidence {
    pub fn kind(&self) -> &'static str {
        match self {
            Evidence::ObstructionTree(_) => "obstruction_tree",
            Evidence::SeparatorObstruction(_) => "separator_obstruction",
            Evidence::WideClause(_) => "wide_clause",
        }
    }
}

/// Evidence plus the depth bound it is claimed to certify.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct LowerBoundCertificate {
    pub spec: BaseClassSpec,
    pub claimed_bound: usize,
    pub evidence: Evidence,
}

impl LowerBoundCertificate {
    /// A certificate whose claim is the bound given by its rule.
    pub fn new(spec: BaseClassSpec, evidence: Evidence) -> LowerBoundCertificate {
        let claimed_bound = rule_bound(spec, &evidence);
        LowerBoundCertificate { spec, claimed_bound, evidence }
    }
}

impl fmt::Display for LowerBoundCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} certificate: {}-backdoor depth >= {}", self.evidence.kind(), self.spec, self.claimed_bound)
    }
}

/// The strategy gave up after hitting a practical cap. Carries no
/// soundness guarantee.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct HeuristicRejection {
    pub reason: String,
    pub paths: usize,
    pub cap: usize,
}

impl fmt::Display for HeuristicRejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unsound heuristic rejection: {} ({} paths, cap {})", self.reason, self.paths, self.cap)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ObstructionError {
    #[error("clause {0} does not exist in the formula")]
    DanglingClause(ClauseId),
    #[error("variable {0} does not exist in the formula")]
    DanglingVar(Var),
    #[error("certificate does not verify: {0}")]
    Unverified(String),
    #[error("level {i} outside 1..={d}")]
    LevelOutOfRange { i: usize, d: usize },
    #[error("invalid starting path: {0}")]
    InvalidPath(String),
    #[error("malformed certificate: {0}")]
    Json(String),
}

/// Result of a verification that ran to completion.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Verdict {
    Valid,
    Invalid(String),
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, Verdict::Valid)
    }

    fn from_check(check: Result<(), String>) -> Verdict {
        match check {
            Ok(()) => Verdict::Valid,
            Err(reason) => Verdict::Invalid(reason),
        }
    }
}

/// The bound a piece of evidence yields by its rule, without verifying it.
pub fn rule_bound(spec: BaseClassSpec, evidence: &Evidence) -> usize {
    match evidence {
        Evidence::ObstructionTree(t) => t.depth() + 1,
        Evidence::WideClause(w) => w.alpha_count.saturating_sub(spec.s() as usize),
        Evidence::SeparatorObstruction(x) => separator_depth_bound(x.size()),
    }
}

/// Verifies the evidence of `cert` in `f` and returns the bound it yields.
/// The claimed bound is not consulted; see [`verify_certificate`].
pub fn certificate_bound(f: &crate::cnf::Formula, cert: &LowerBoundCertificate) -> Result<usize, ObstructionError> {
    match verify::verify_evidence(f, cert.spec, &cert.evidence)? {
        Verdict::Valid => Ok(rule_bound(cert.spec, &cert.evidence)),
        Verdict::Invalid(reason) => Err(ObstructionError::Unverified(reason)),
    }
}

/// `(8^d (196 + 2d))^(2^d)`, the number of leaves a separator obstruction
/// needs to force depth `d`.
pub fn separator_threshold(d: u32) -> BigUint {
    let base = BigUint::from(8u32).pow(d) * BigUint::from(196u32 + 2 * d);
    pow2_power(base, d)
}

fn pow2_power(mut base: BigUint, d: u32) -> BigUint {
    for _ in 0..d {
        base = &base * &base;
    }
    base
}

/// [`separator_threshold`] capped at `u64::MAX`.
pub fn separator_threshold_saturating(d: u32) -> u64 {
    if threshold_log2(d) > 63.0 {
        return u64::MAX;
    }
    separator_threshold(d).to_u64().unwrap_or(u64::MAX)
}

fn threshold_log2(d: u32) -> f64 {
    2f64.powi(d as i32) * (3.0 * d as f64 + (196.0 + 2.0 * d as f64).log2())
}

/// Largest `d` with `size >= separator_threshold(d)`; 0 when there is none.
pub fn separator_depth_bound(size: usize) -> usize {
    let mut d = 0;
    while (size as u64) >= separator_threshold_saturating(d + 1) {
        d += 1;
    }
    d as usize
}

/// `(3s + d + 1) · separator_threshold(d)`.
pub fn round_bound_separate(d: u32, s: u32) -> BigUint {
    BigUint::from(3 * u64::from(s) + u64::from(d) + 1) * separator_threshold(d)
}

/// `(2^i - 1) · round_bound_separate(d, s)` for `1 <= i <= d`.
pub fn round_bound_main(i: u32, d: u32, s: u32) -> Result<BigUint, ObstructionError> {
    if i < 1 || i > d {
        return Err(ObstructionError::LevelOutOfRange { i: i as usize, d: d as usize });
    }
    let factor = (BigUint::one() << i as usize) - BigUint::one();
    Ok(factor * round_bound_separate(d, s))
}

/// [`round_bound_separate`] capped at `ceiling`.
pub fn round_bound_separate_saturating(d: u32, s: u32, ceiling: u64) -> u64 {
    let log = threshold_log2(d) + ((3 * s + d + 1) as f64).log2();
    if log > 64.0 {
        return ceiling;
    }
    round_bound_separate(d, s).to_u64().map_or(ceiling, |v| v.min(ceiling))
}

/// [`round_bound_main`] capped at `ceiling`.
pub fn round_bound_main_saturating(i: u32, d: u32, s: u32, ceiling: u64) -> Result<u64, ObstructionError> {
    if i < 1 || i > d {
        return Err(ObstructionError::LevelOutOfRange { i: i as usize, d: d as usize });
    }
    let log = threshold_log2(d) + ((3 * s + d + 1) as f64).log2() + i as f64;
    if log > 64.0 {
        return Ok(ceiling);
    }
    Ok(round_bound_main(i, d, s)?.to_u64().map_or(ceiling, |v| v.min(ceiling)))
}

static SEPARATOR_SELF_CHECKS: AtomicUsize = AtomicUsize::new(0);

/// How many separator extensions have been re-verified by strategies
/// running with self-checks enabled, process-wide.
pub fn separator_self_checks() -> usize {
    SEPARATOR_SELF_CHECKS.load(Ordering::Relaxed)
}

fn count_self_check() {
    SEPARATOR_SELF_CHECKS.fetch_add(1, Ordering::Relaxed);
}

#[derive(Serialize, Deserialize)]
struct CertificateDoc {
    kind: String,
    spec: BaseClassSpec,
    claimed_bound: usize,
    payload: serde_json::Value,
}

impl Serialize for LowerBoundCertificate {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_json_value().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LowerBoundCertificate {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(deserializer)?;
        LowerBoundCertificate::from_json_value(value).map_err(serde::de::Error::custom)
    }
}

impl LowerBoundCertificate {
    pub fn to_json_value(&self) -> serde_json::Value {
        let payload = match &self.evidence {
            Evidence::ObstructionTree(t) => serde_json::to_value(t),
            Evidence::SeparatorObstruction(x) => serde_json::to_value(x),
            Evidence::WideClause(w) => serde_json::to_value(w),
        }
        .expect("certificate payload serializes");
        serde_json::to_value(CertificateDoc {
            kind: self.evidence.kind().to_string(),
            spec: self.spec,
            claimed_bound: self.claimed_bound,
            payload,
        })
        .expect("certificate serializes")
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("certificate serializes")
    }

    pub fn from_json_str(text: &str) -> Result<LowerBoundCertificate, ObstructionError> {
        let value = serde_json::from_str(text).map_err(|e| ObstructionError::Json(e.to_string()))?;
        LowerBoundCertificate::from_json_value(value)
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<LowerBoundCertificate, ObstructionError> {
        let json = |e: serde_json::Error| ObstructionError::Json(e.to_string());
        let doc: CertificateDoc = serde_json::from_value(value).map_err(json)?;
        let evidence = match doc.kind.as_str() {
            "obstruction_tree" => Evidence::ObstructionTree(serde_json::from_value(doc.payload).map_err(json)?),
            "separator_obstruction" => {
                Evidence::SeparatorObstruction(serde_json::from_value(doc.payload).map_err(json)?)
            }
            "wide_clause" => Evidence::WideClause(serde_json::from_value(doc.payload).map_err(json)?),
            other => return Err(ObstructionError::Json(format!("unknown certificate kind {other:?}"))),
        };
        Ok(LowerBoundCertificate { spec: doc.spec, claimed_bound: doc.claimed_bound, evidence })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds() {
        assert_eq!(separator_threshold(0), BigUint::from(196u32));
        assert_eq!(separator_threshold(1), BigUint::from(2_509_056u32));
        assert_eq!(separator_threshold_saturating(2), (64u64 * 200).pow(4));
        assert_eq!(separator_threshold_saturating(3), u64::MAX);
        assert_eq!(separator_depth_bound(1), 0);
        assert_eq!(separator_depth_bound(2_509_055), 0);
        assert_eq!(separator_depth_bound(2_509_056), 1);
    }

    #[test]
    fn round_bounds() {
        assert_eq!(round_bound_separate(0, 1), BigUint::from(784u32));
        assert_eq!(round_bound_separate(0, 0), BigUint::from(196u32));
        assert_eq!(round_bound_separate(1, 1), BigUint::from(12_545_280u32));
        assert_eq!(round_bound_main(1, 3, 1).unwrap(), round_bound_separate(3, 1));
        assert_eq!(round_bound_main(2, 2, 1).unwrap(), BigUint::from(3u32 * 6) * BigUint::from(64u32 * 200).pow(4));
        assert!(round_bound_main(0, 2, 1).is_err());
        assert!(round_bound_main(3, 2, 1).is_err());
        assert_eq!(round_bound_main_saturating(2, 2, 1, u64::MAX).unwrap(), 18 * (64u64 * 200).pow(4));
        assert_eq!(round_bound_main_saturating(4, 4, 1, 1000).unwrap(), 1000);
        assert_eq!(round_bound_separate_saturating(1, 1, 100), 100);
        // Exact arithmetic well past u64.
        assert!(round_bound_main(4, 4, 2).unwrap().bits() > 64 * 4);
    }

    #[test]
    fn rule_bounds() {
        let wide = Evidence::WideClause(WideClause { clause: ClauseId(1), alpha_count: 6 });
        assert_eq!(rule_bound(BaseClassSpec::HORN, &wide), 5);
        let leaf = Evidence::ObstructionTree(ObstructionTree::Leaf(ClauseId(1)));
        assert_eq!(rule_bound(BaseClassSpec::HORN, &leaf), 1);
    }

    #[test]
    fn json_shape() {
        let t = ObstructionTree::join(
            ObstructionTree::Leaf(ClauseId(1)),
            PartialAssignment::from_pairs([(Var(3), true)]).unwrap(),
            ObstructionTree::Leaf(ClauseId(2)),
            IncidencePath::new(vec![Vertex::Clause(ClauseId(1)), Vertex::Var(Var(2)), Vertex::Clause(ClauseId(2))]),
        );
        let cert = LowerBoundCertificate::new(BaseClassSpec::HORN, Evidence::ObstructionTree(t));
        let value = cert.to_json_value();
        assert_eq!(value["kind"], "obstruction_tree");
        assert_eq!(value["spec"], "horn");
        assert_eq!(value["claimed_bound"], 2);
        assert_eq!(value["payload"]["join"]["beta"], serde_json::json!([3]));
        assert_eq!(value["payload"]["join"]["path"][1], serde_json::json!({"var": 2}));
        let back = LowerBoundCertificate::from_json_str(&cert.to_json_string()).unwrap();
        assert_eq!(back, cert);
        assert!(LowerBoundCertificate::from_json_str(
            "{\"kind\":\"x\",\"spec\":\"horn\",\"claimed_bound\":1,\"payload\":1}"
        )
        .is_err());
    }
}
