//! Templates, slot holders and annotated legal-case samples.
//!
//! A legal case is split into a template (surface text with `{Role}`
//! placeholders) and a slot-holder set (role → surface text). Expanding a
//! template with a slot-holder set yields one [`AugmentedSample`] with
//! character-accurate entity spans and the ground facts the case implies.

mod dataset;
mod template;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::{Atom, Term};

pub use dataset::{
    build_dataset, dataset_stats, split_dataset, Count, DatasetStats, SamplingPolicy, SurfaceCount,
};
pub use template::{
    check_slot_set, expand, instantiate, parse_template_text, placeholder_role, validate_schema,
    validate_template, Segment,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotSchema {
    pub contract_id: String,
    pub roles: Vec<String>,
    pub goal_template: Atom,
}

impl SlotSchema {
    pub fn has_role(&self, role: &str) -> bool {
        self.roles.iter().any(|r| r == role)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub id: String,
    pub contract_id: String,
    pub text: String,
    pub fact_templates: Vec<Atom>,
}

/// Role → surface text for one legal case.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SlotHolderSet(pub BTreeMap<String, String>);

impl SlotHolderSet {
    pub fn get(&self, role: &str) -> Option<&str> {
        self.0.get(role).map(String::as_str)
    }

    pub fn insert(&mut self, role: impl Into<String>, surface: impl Into<String>) {
        self.0.insert(role.into(), surface.into());
    }

    /// Compact JSON object with keys in schema role order, e.g.
    /// `{"Object":"the house","Accessory":"garage A"}`.
    pub fn to_json_in_order(&self, schema: &SlotSchema) -> String {
        let mut out = String::from("{");
        let mut first = true;
        let ordered = schema
            .roles
            .iter()
            .filter_map(|r| self.0.get_key_value(r))
            .chain(self.0.iter().filter(|(k, _)| !schema.has_role(k)));
        for (role, surface) in ordered {
            if !first {
                out.push(',');
            }
            first = false;
            out.push_str(&serde_json::to_string(role).unwrap_or_default());
            out.push(':');
            out.push_str(&serde_json::to_string(surface).unwrap_or_default());
        }
        out.push('}');
        out
    }
}

impl<K: Into<String>, V: Into<String>> FromIterator<(K, V)> for SlotHolderSet {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        SlotHolderSet(
            iter.into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
        )
    }
}

/// `case_text[start..end]` (in Unicode scalar values) is `surface`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntitySpan {
    pub role: String,
    pub surface: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentedSample {
    pub id: String,
    pub contract_id: String,
    pub template_id: String,
    pub case_text: String,
    pub entities: Vec<EntitySpan>,
    pub facts: Vec<Atom>,
}

impl AugmentedSample {
    /// Role → surface of the first span of each role.
    pub fn slot_holders(&self) -> SlotHolderSet {
        let mut out = SlotHolderSet::default();
        for e in &self.entities {
            out.0
                .entry(e.role.clone())
                .or_insert_with(|| e.surface.clone());
        }
        out
    }

    /// Checks that every span slices `case_text` to its surface and that
    /// spans do not overlap.
    pub fn spans_consistent(&self) -> bool {
        let chars: Vec<char> = self.case_text.chars().collect();
        let mut spans: Vec<(usize, usize)> = Vec::new();
        for e in &self.entities {
            if e.start > e.end || e.end > chars.len() {
                return false;
            }
            let slice: String = chars[e.start..e.end].iter().collect();
            if slice != e.surface {
                return false;
            }
            spans.push((e.start, e.end));
        }
        spans.sort();
        spans.windows(2).all(|w| w[0].1 <= w[1].0)
    }
}

/// Schema registry, samples, and the templates they came from.
///
/// Datasets loaded from JSONL carry samples only; the registries are empty
/// until contract bundles are attached.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    pub schemas: BTreeMap<String, SlotSchema>,
    pub samples: Vec<AugmentedSample>,
    pub templates: Vec<Template>,
}

impl Dataset {
    pub fn from_samples(samples: Vec<AugmentedSample>) -> Self {
        Dataset {
            samples,
            ..Dataset::default()
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn template(&self, contract_id: &str, template_id: &str) -> Option<&Template> {
        self.templates
            .iter()
            .find(|t| t.contract_id == contract_id && t.id == template_id)
    }

    /// Samples whose contract or template is not registered. Only
    /// meaningful when the registries are populated.
    pub fn dangling_samples(&self) -> Vec<&str> {
        self.samples
            .iter()
            .filter(|s| {
                !self.schemas.contains_key(&s.contract_id)
                    || self.template(&s.contract_id, &s.template_id).is_none()
            })
            .map(|s| s.id.as_str())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    ContractMismatch { template: String, schema: String },
    Malformed { offset: usize, reason: &'static str },
    EmptyText,
    UnknownPlaceholder(String),
    UnreferencedRole(String),
    VariableInFactTemplate(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ContractMismatch { template, schema } => {
                write!(
                    f,
                    "template contract {template} does not match schema {schema}"
                )
            }
            Violation::Malformed { offset, reason } => {
                write!(f, "malformed text at char {offset}: {reason}")
            }
            Violation::EmptyText => f.write_str("template text is empty"),
            Violation::UnknownPlaceholder(role) => {
                write!(f, "placeholder {{{role}}} not in schema")
            }
            Violation::UnreferencedRole(role) => write!(f, "role {role} unreferenced in text"),
            Violation::VariableInFactTemplate(atom) => {
                write!(f, "fact template {atom} contains a variable")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AugmentError {
    #[error("template {id} is invalid: {}", join_violations(.violations))]
    InvalidTemplate {
        id: String,
        violations: Vec<Violation>,
    },
    #[error("schema {0} is invalid: {1}")]
    InvalidSchema(String, String),
    #[error("slot holders miss role {0}")]
    MissingRole(String),
    #[error("slot holders name role {0} which is not in the schema")]
    UnknownRole(String),
    #[error("surface for role {role} is invalid: {reason}")]
    InvalidSurface { role: String, reason: &'static str },
    #[error("surfaces of roles {first} and {second} overlap")]
    OverlappingSurface { first: String, second: String },
    #[error("no contract {0} in the schema registry")]
    UnknownContract(String),
    #[error("nothing to build: {0}")]
    EmptyInput(&'static str),
    #[error("contract {contract} has {found} template(s); at least 2 are needed to split")]
    TooFewTemplates { contract: String, found: usize },
    #[error("test fraction must lie strictly between 0 and 1")]
    InvalidFraction,
}

fn join_violations(v: &[Violation]) -> String {
    let mut out = String::new();
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            out.push_str("; ");
        }
        out.push_str(&alloc::format!("{x}"));
    }
    out
}

/// Makes `{Role}` placeholder constant.
pub fn placeholder(role: &str) -> Term {
    Term::Const(alloc::format!("{{{role}}}"))
}
