//! Core of the PROLEG toolkit: the rule language, a reasoner for Horn
//! clauses with exceptions, template-based case augmentation, a lookup-table
//! semantic parser and proof-tree renderers.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the HTTP
//! client for LLM backends and the command line live in `proleg-forge`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod augment;
pub mod explainer;
#[cfg(test)]
mod fixtures;
pub mod generator;
pub mod lang;
pub mod reasoner;
pub mod semparser;
pub mod testing;
pub mod text;

pub use lang::{Atom, ExceptionExpr, Program, Rule, Term};
pub use reasoner::{ProofNode, Verdict};
