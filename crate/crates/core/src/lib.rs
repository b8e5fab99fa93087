//! Component backdoor trees of CNF formulas into the base classes
//! `C_{α,s}` (Horn, dual-Horn, Krom, Null).
//!
//! The crate provides the CNF model ([`cnf`]), class membership and the
//! linear-time leaf solvers ([`class`]), the splitter/connector game and the
//! strategy-to-tree conversion ([`game`]), lower-bound certificates and the
//! separator and obstruction-tree splitter strategies ([`obstruction`]),
//! component backdoor trees ([`tree`]) and an exact oracle with instance
//! generators ([`oracle`]).

pub mod class;
pub mod cnf;
pub mod game;
pub mod obstruction;
pub mod oracle;
pub mod tree;
