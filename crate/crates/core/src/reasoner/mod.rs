//! Truth values of goals under PROLEG semantics.
//!
//! A ground goal is proved when some ground instance of a rule (or a fact)
//! concludes it with every body atom proved, and no exception whose blocked
//! atom matches the goal has a provable condition. Variables of a condition
//! that the blocked atom does not bind are existentially quantified.
//!
//! Programs must be stratified: no dependency cycle may pass through an
//! exception edge. [`solve`] is a top-down prover that records a proof tree;
//! [`brute_force_entails`] is an independent bottom-up fixpoint used as an
//! oracle.

mod oracle;
mod proof;
mod solve;
mod strata;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::lang::{Atom, Term};

pub use oracle::{brute_force_entails, stratified_model};
pub use proof::{check_proof_invariants, ProofNode, ProofViolation, Verdict};
pub use solve::{all_solutions, solve, Solver, DEFAULT_DEPTH_LIMIT};
pub use strata::{check_stratified, Strata};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReasonError {
    #[error("program is not stratified: cycle through an exception among {}", .cycle.join(", "))]
    Unstratifiable { cycle: Vec<String> },
    #[error("goal nesting exceeded the depth limit of {limit}")]
    DepthLimitExceeded { limit: usize },
    #[error("expected a ground atom, got {0}")]
    NonGround(String),
}

/// Ground substitution from variable names to constants.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Bindings(BTreeMap<String, String>);

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, var: &str) -> Option<&str> {
        self.0.get(var).map(String::as_str)
    }

    pub fn bind(&mut self, var: impl Into<String>, constant: impl Into<String>) {
        self.0.insert(var.into(), constant.into());
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn apply_term(&self, term: &Term) -> Term {
        match term {
            Term::Var(v) => match self.0.get(v) {
                Some(c) => Term::Const(c.clone()),
                None => term.clone(),
            },
            c => c.clone(),
        }
    }

    pub fn apply(&self, atom: &Atom) -> Atom {
        Atom {
            predicate: atom.predicate.clone(),
            args: atom.args.iter().map(|t| self.apply_term(t)).collect(),
        }
    }
}

impl<K: Into<String>, V: Into<String>> FromIterator<(K, V)> for Bindings {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        Bindings(
            iter.into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
        )
    }
}

impl fmt::Display for Bindings {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}: {}", crate::lang::quote_constant(v))?;
        }
        f.write_str("}")
    }
}

/// Matches `pattern` against the ground atom `ground`, extending `bindings`.
///
/// Returns `None` when predicates or arities differ, a constant clashes, a
/// variable is already bound to another constant, or `ground` is not ground.
pub fn unify(pattern: &Atom, ground: &Atom, bindings: &Bindings) -> Option<Bindings> {
    if pattern.predicate != ground.predicate || pattern.args.len() != ground.args.len() {
        return None;
    }
    let mut out = bindings.clone();
    for (p, g) in pattern.args.iter().zip(&ground.args) {
        let Term::Const(value) = g else {
            return None;
        };
        match p {
            Term::Const(c) if c == value => {}
            Term::Const(_) => return None,
            Term::Var(v) => match out.0.get(v) {
                Some(bound) if bound == value => {}
                Some(_) => return None,
                None => {
                    out.0.insert(v.clone(), value.clone());
                }
            },
        }
    }
    Some(out)
}
