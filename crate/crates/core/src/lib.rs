//! Finitary PCF with effect handlers: a small-step evaluator, the simple
//! and answer-type-modifying type systems, a CPS transform driven by typing
//! derivations, and reachability checking.

pub mod ast;
pub mod atm;
pub mod corpus;
pub mod cps;
pub mod eval;
pub mod generate;
pub mod minsky;
pub mod name;
pub mod reach;
pub mod simple;
pub mod surface;
pub mod types;
pub mod verify;
