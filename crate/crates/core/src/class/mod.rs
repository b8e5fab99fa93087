//! Base classes `C_{α,s}`: every clause carries at most `s` literals whose
//! polarity lies in `α`. Horn, dual-Horn, Krom and Null are presets; the
//! presets also come with linear-time satisfiability solvers.

mod horn;
mod krom;

pub use horn::solve_horn;
pub use krom::solve_krom;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cnf::{Clause, ClauseId, Formula, Lit, SatResult, Var};

/// The pair `(α, s)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct BaseClassSpec {
    positive: bool,
    negative: bool,
    s: u32,
}

/// Named presets of [`BaseClassSpec`].
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Preset {
    Horn,
    DualHorn,
    Krom,
    Null,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClassError {
    #[error("alpha must contain at least one polarity")]
    EmptyAlpha,
    #[error("cannot parse class {0:?}; expected horn, dhorn, krom, null or alpha=+,-;s=N")]
    Syntax(String),
    #[error("formula is not a member of {0}")]
    NotMember(BaseClassSpec),
    #[error("no polynomial solver for {0}; only horn, dhorn, krom and null are solvable")]
    Unsupported(BaseClassSpec),
}

impl BaseClassSpec {
    pub const HORN: BaseClassSpec = BaseClassSpec { positive: true, negative: false, s: 1 };
    pub const DHORN: BaseClassSpec = BaseClassSpec { positive: false, negative: true, s: 1 };
    pub const KROM: BaseClassSpec = BaseClassSpec { positive: true, negative: true, s: 2 };
    pub const NULL: BaseClassSpec = BaseClassSpec { positive: true, negative: true, s: 0 };

    pub fn new(positive: bool, negative: bool, s: u32) -> Result<BaseClassSpec, ClassError> {
        if !positive && !negative {
            return Err(ClassError::EmptyAlpha);
        }
        Ok(BaseClassSpec { positive, negative, s })
    }

    pub fn s(self) -> u32 {
        self.s
    }

    pub fn alpha_has_positive(self) -> bool {
        self.positive
    }

    pub fn alpha_has_negative(self) -> bool {
        self.negative
    }

    pub fn preset(self) -> Option<Preset> {
        match self {
            BaseClassSpec::HORN => Some(Preset::Horn),
            BaseClassSpec::DHORN => Some(Preset::DualHorn),
            BaseClassSpec::KROM => Some(Preset::Krom),
            BaseClassSpec::NULL => Some(Preset::Null),
            _ => None,
        }
    }

    /// Whether `lit` is an α-literal.
    pub fn is_alpha(self, lit: Lit) -> bool {
        if lit.is_positive() {
            self.positive
        } else {
            self.negative
        }
    }
}

impl fmt::Display for BaseClassSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.preset() {
            Some(Preset::Horn) => write!(f, "horn"),
            Some(Preset::DualHorn) => write!(f, "dhorn"),
            Some(Preset::Krom) => write!(f, "krom"),
            Some(Preset::Null) => write!(f, "null"),
            None => {
                let alpha = match (self.positive, self.negative) {
                    (true, true) => "+,-",
                    (true, false) => "+",
                    _ => "-",
                };
                write!(f, "alpha={alpha};s={}", self.s)
            }
        }
    }
}

impl FromStr for BaseClassSpec {
    type Err = ClassError;

    fn from_str(text: &str) -> Result<BaseClassSpec, ClassError> {
        let lower = text.trim().to_ascii_lowercase();
        match lower.as_str() {
            "horn" => return Ok(BaseClassSpec::HORN),
            "dhorn" | "dual-horn" => return Ok(BaseClassSpec::DHORN),
            "krom" | "2cnf" => return Ok(BaseClassSpec::KROM),
            "null" => return Ok(BaseClassSpec::NULL),
            _ => {}
        }
        let syntax = || ClassError::Syntax(text.to_string());
        let (mut alpha, mut s) = (None, None);
        for part in lower.split(';') {
            let (key, value) = part.split_once('=').ok_or_else(syntax)?;
            match key.trim() {
                "alpha" => {
                    let (mut p, mut n) = (false, false);
                    for sign in value.split(',') {
                        match sign.trim() {
                            "+" => p = true,
                            "-" => n = true,
                            _ => return Err(syntax()),
                        }
                    }
                    alpha = Some((p, n));
                }
                "s" => s = Some(value.trim().parse::<u32>().map_err(|_| syntax())?),
                _ => return Err(syntax()),
            }
        }
        let ((p, n), s) = alpha.zip(s).ok_or_else(syntax)?;
        BaseClassSpec::new(p, n, s)
    }
}

impl From<BaseClassSpec> for String {
    fn from(spec: BaseClassSpec) -> String {
        spec.to_string()
    }
}

impl TryFrom<String> for BaseClassSpec {
    type Error = ClassError;
    fn try_from(text: String) -> Result<BaseClassSpec, ClassError> {
        text.parse()
    }
}

/// Number of α-literals of `c`.
pub fn alpha_literal_count(c: &Clause, spec: BaseClassSpec) -> usize {
    c.lits().iter().filter(|&&l| spec.is_alpha(l)).count()
}

/// var_α(c), in increasing order.
pub fn alpha_vars(c: &Clause, spec: BaseClassSpec) -> Vec<Var> {
    c.lits().iter().filter(|&&l| spec.is_alpha(l)).map(|l| l.var()).collect()
}

/// A clause is good iff it has at most `s` α-literals.
pub fn is_good(c: &Clause, spec: BaseClassSpec) -> bool {
    alpha_literal_count(c, spec) <= spec.s as usize
}

/// Membership in `C_{α,s}`: every clause is good.
pub fn is_member(f: &Formula, spec: BaseClassSpec) -> bool {
    f.clauses().iter().all(|c| is_good(c, spec))
}

/// Ids of the bad clauses, in increasing order.
pub fn bad_clauses(f: &Formula, spec: BaseClassSpec) -> Vec<ClauseId> {
    f.clauses().iter().filter(|c| !is_good(c, spec)).map(Clause::id).collect()
}

/// Decides a member of a preset class with its dedicated solver.
pub fn solve_in_class(f: &Formula, spec: BaseClassSpec) -> Result<SatResult, ClassError> {
    match spec.preset() {
        Some(Preset::Horn) => solve_horn(f),
        Some(Preset::DualHorn) => {
            if !is_member(f, spec) {
                return Err(ClassError::NotMember(spec));
            }
            Ok(match solve_horn(&f.flipped())? {
                SatResult::Sat(w) => SatResult::Sat(w.flipped()),
                SatResult::Unsat => SatResult::Unsat,
            })
        }
        Some(Preset::Krom) => solve_krom(f),
        Some(Preset::Null) => {
            if !is_member(f, spec) {
                return Err(ClassError::NotMember(spec));
            }
            Ok(if f.has_empty_clause() { SatResult::Unsat } else { SatResult::Sat(Default::default()) })
        }
        None => Err(ClassError::Unsupported(spec)),
    }
}
