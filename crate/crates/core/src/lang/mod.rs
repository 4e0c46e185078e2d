//! Abstract and concrete syntax of PROLEG programs.
//!
//! A program is a list of Horn rules (facts are rules with an empty body)
//! plus exception expressions `exception(Blocked, Condition).`. Terms are
//! function-free: every argument is a constant or a variable.
//!
//! ```text
//! ownership(C, O)     <= original_ownership(P, O), transfer(P, C, O).
//! return_object(C, O) <= ownership(C, O), occupancy(D, O).
//! exception(return_object(C, O), rightful_occupancy(O)).
//! ```

mod parser;
mod render;

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use parser::{parse_atom, parse_facts, parse_program, parse_rule};
pub use render::{quote_constant, render_program};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Const(String),
    Var(String),
}

impl Term {
    pub fn constant(text: impl Into<String>) -> Self {
        Term::Const(text.into())
    }

    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn as_const(&self) -> Option<&str> {
        match self {
            Term::Const(c) => Some(c),
            Term::Var(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Atom {
            predicate: predicate.into(),
            args,
        }
    }

    /// Builds a ground atom from constant texts.
    pub fn ground<I, S>(predicate: impl Into<String>, constants: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Atom::new(
            predicate,
            constants
                .into_iter()
                .map(|c| Term::Const(c.into()))
                .collect(),
        )
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| !t.is_var())
    }

    /// Variables in order of first appearance, without repeats.
    pub fn variables(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for t in &self.args {
            if let Term::Var(v) = t {
                if !out.contains(&v.as_str()) {
                    out.push(v);
                }
            }
        }
        out
    }

    pub fn constants(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(Term::as_const)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rule {
    pub head: Atom,
    pub body: Vec<Atom>,
}

impl Rule {
    pub fn fact(head: Atom) -> Self {
        Rule {
            head,
            body: Vec::new(),
        }
    }

    pub fn is_fact(&self) -> bool {
        self.body.is_empty()
    }

    /// Head variables that never occur in the body.
    pub fn unbound_head_vars(&self) -> Vec<&str> {
        let body_vars: BTreeSet<&str> = self.body.iter().flat_map(|a| a.variables()).collect();
        self.head
            .variables()
            .into_iter()
            .filter(|v| !body_vars.contains(v))
            .collect()
    }

    pub fn is_range_restricted(&self) -> bool {
        self.unbound_head_vars().is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExceptionExpr {
    pub blocked: Atom,
    pub condition: Atom,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Program {
    pub rules: Vec<Rule>,
    pub exceptions: Vec<ExceptionExpr>,
    pub goal_template: Option<Atom>,
}

impl Program {
    /// Every constant mentioned by a rule or exception, sorted and deduplicated.
    pub fn constants(&self) -> BTreeSet<String> {
        let rule_atoms = self
            .rules
            .iter()
            .flat_map(|r| core::iter::once(&r.head).chain(r.body.iter()));
        let exc_atoms = self
            .exceptions
            .iter()
            .flat_map(|e| [&e.blocked, &e.condition]);
        rule_atoms
            .chain(exc_atoms)
            .flat_map(|a| a.constants())
            .map(String::from)
            .collect()
    }

    /// Predicates mentioned anywhere in the program.
    pub fn predicates(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        for r in &self.rules {
            out.insert(r.head.predicate.as_str());
            out.extend(r.body.iter().map(|a| a.predicate.as_str()));
        }
        for e in &self.exceptions {
            out.insert(e.blocked.predicate.as_str());
            out.insert(e.condition.predicate.as_str());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LangError {
    #[error("syntax error at {line}:{col}: expected {expected}")]
    Syntax {
        line: usize,
        col: usize,
        expected: String,
    },
    #[error("rule {rule_index}: head variable not bound by the body")]
    RangeRestriction { rule_index: usize },
    #[error("rule {rule_index}: fact is not ground")]
    NonGroundFact { rule_index: usize },
    #[error("rule {second} duplicates rule {first} up to variable renaming")]
    DuplicateRule { first: usize, second: usize },
    #[error("expected only facts, found a rule at index {rule_index}")]
    NotAFact { rule_index: usize },
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(c) => f.write_str(&quote_constant(c)),
            Term::Var(v) => f.write_str(v),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, t) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{t}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if !self.body.is_empty() {
            f.write_str(" <= ")?;
            for (i, a) in self.body.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{a}")?;
            }
        }
        f.write_str(".")
    }
}

impl fmt::Display for ExceptionExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "exception({}, {}).", self.blocked, self.condition)
    }
}

impl core::str::FromStr for Atom {
    type Err = LangError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_atom(s)
    }
}

// Atoms travel through JSON files in their concrete syntax.
impl Serialize for Atom {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Atom {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_atom(&text).map_err(serde::de::Error::custom)
    }
}
