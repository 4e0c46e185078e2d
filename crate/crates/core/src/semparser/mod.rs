//! Lookup-table semantic parser: recognizes slot holders in legal-case
//! text with a gazetteer, then instantiates the fact templates recorded
//! for the recognized role set.

mod evaluate;
mod gazetteer;
mod parse;
mod train;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::EntitySpan;
use crate::lang::Atom;

pub use evaluate::{
    evaluate_model, evaluate_sample, evaluate_samples, Metrics, SampleEvaluation, SampleOutcome,
};
pub use gazetteer::{extract_entities, ExtractedEntity, Gazetteer};
pub use parse::{infer_contract, parse_case};
pub use train::train_model;

/// Roles and goal of a contract known to the parser.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractInfo {
    pub roles: Vec<String>,
    pub goal_template: Option<Atom>,
}

pub type RoleSet = BTreeSet<String>;

/// (contract, role set) → fact templates with `{Role}` placeholders.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FactSchemaTable {
    entries: BTreeMap<(String, RoleSet), Vec<Atom>>,
}

impl FactSchemaTable {
    pub fn get(&self, contract: &str, roles: &RoleSet) -> Option<&Vec<Atom>> {
        self.entries.get(&(String::from(contract), roles.clone()))
    }

    pub fn insert(&mut self, contract: impl Into<String>, roles: RoleSet, facts: Vec<Atom>) {
        self.entries.insert((contract.into(), roles), facts);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &RoleSet, &Vec<Atom>)> {
        self.entries.iter().map(|((c, r), f)| (c.as_str(), r, f))
    }

    pub fn keys_for<'a>(&'a self, contract: &'a str) -> impl Iterator<Item = &'a RoleSet> + 'a {
        self.entries
            .keys()
            .filter(move |(c, _)| c == contract)
            .map(|(_, r)| r)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub dataset_id: String,
    pub sample_count: usize,
}

/// A trained parser. Immutable once built; safe to share across threads.
#[derive(Debug, Clone)]
pub struct ParserModel {
    gazetteer: Gazetteer,
    schema_table: FactSchemaTable,
    schemas: BTreeMap<String, ContractInfo>,
    provenance: Provenance,
    matcher: gazetteer::Matcher,
}

impl PartialEq for ParserModel {
    fn eq(&self, other: &Self) -> bool {
        self.gazetteer == other.gazetteer
            && self.schema_table == other.schema_table
            && self.schemas == other.schemas
            && self.provenance == other.provenance
    }
}

impl ParserModel {
    /// Assembles a model; fails when the table names an unknown contract.
    pub fn new(
        gazetteer: Gazetteer,
        schema_table: FactSchemaTable,
        schemas: BTreeMap<String, ContractInfo>,
        provenance: Provenance,
    ) -> Result<Self, SemParseError> {
        if let Some((c, _, _)) = schema_table
            .iter()
            .find(|(c, _, _)| !schemas.contains_key(*c))
        {
            return Err(SemParseError::UnknownContract(String::from(c)));
        }
        let matcher = gazetteer::Matcher::build(&gazetteer);
        Ok(ParserModel {
            gazetteer,
            schema_table,
            schemas,
            provenance,
            matcher,
        })
    }

    pub fn gazetteer(&self) -> &Gazetteer {
        &self.gazetteer
    }

    pub fn schema_table(&self) -> &FactSchemaTable {
        &self.schema_table
    }

    pub fn schemas(&self) -> &BTreeMap<String, ContractInfo> {
        &self.schemas
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostic {
    AmbiguousContract {
        chosen: String,
        tied: Vec<String>,
    },
    AmbiguousRole {
        surface: String,
        chosen: String,
        candidates: Vec<String>,
    },
    ForeignEntity {
        surface: String,
        start: usize,
        end: usize,
    },
    ConflictingSurfaces {
        role: String,
        kept: String,
        ignored: String,
    },
    PartialSchema {
        roles: Vec<String>,
    },
    NoSchema,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::AmbiguousContract { chosen, tied } => {
                write!(
                    f,
                    "ambiguous contract: chose {chosen} among {}",
                    tied.join(", ")
                )
            }
            Diagnostic::AmbiguousRole {
                surface,
                chosen,
                candidates,
            } => write!(
                f,
                "ambiguous role for {surface:?}: chose {chosen} among {}",
                candidates.join(", ")
            ),
            Diagnostic::ForeignEntity { surface, .. } => {
                write!(f, "{surface:?} belongs to another contract; ignored")
            }
            Diagnostic::ConflictingSurfaces {
                role,
                kept,
                ignored,
            } => {
                write!(
                    f,
                    "role {role} has several surfaces: kept {kept:?}, ignored {ignored:?}"
                )
            }
            Diagnostic::PartialSchema { roles } => {
                write!(
                    f,
                    "no schema for the full role set; used {{{}}}",
                    roles.join(", ")
                )
            }
            Diagnostic::NoSchema => f.write_str("no schema entry covers the recognized roles"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseResult {
    pub contract_id: String,
    pub extraction: Vec<EntitySpan>,
    pub facts: Vec<Atom>,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SemParseError {
    #[error("training data is empty")]
    EmptyTraining,
    #[error("sample {0} has spans that do not slice its text")]
    InvalidSample(String),
    #[error("contract {contract} roles {{{}}} map to different fact sets (sample {sample})", .roles.join(", "))]
    Conflict {
        contract: String,
        roles: Vec<String>,
        sample: String,
    },
    #[error("no recognized entity belongs to a known contract")]
    NoContract,
    #[error("no known slot holder found in the text")]
    EmptyExtraction,
    #[error("schema table names unknown contract {0}")]
    UnknownContract(String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::{expand, AugmentedSample, Dataset, SlotHolderSet, SlotSchema, Template};
    use crate::fixtures::{schema, slot_holders_one, slot_holders_two, template_one, template_two};
    use crate::lang::parse_atom;

    fn atoms(src: &[&str]) -> Vec<Atom> {
        src.iter().map(|s| parse_atom(s).unwrap()).collect()
    }

    fn house_case_sample() -> AugmentedSample {
        expand(&template_one(), &slot_holders_one(), &schema(), "s1").unwrap()
    }

    fn dataset(samples: Vec<AugmentedSample>) -> Dataset {
        let mut d = Dataset::from_samples(samples);
        d.schemas.insert(String::from("return_object"), schema());
        d
    }

    fn house_case_facts() -> Vec<Atom> {
        atoms(&[
            "original_ownership(\"sarah\",\"the house\")",
            "transfer(\"sarah\",\"john\",\"the house\")",
            "occupancy(\"alex\",\"the house\")",
            "existence_of_accessory(\"garage A\",\"the house\")",
        ])
    }

    #[test]
    fn train_on_house_case() {
        let m = train_model(&dataset(vec![house_case_sample()])).unwrap();
        assert!(m
            .gazetteer()
            .contains("sarah", "return_object", "OriginalOwner"));
        assert!(m
            .gazetteer()
            .contains("Garage A", "return_object", "Accessory"));
        assert_eq!(m.gazetteer().len(), 5);
        let roles: RoleSet = schema().roles.into_iter().collect();
        assert_eq!(
            m.schema_table().get("return_object", &roles).unwrap(),
            &template_one().fact_templates
        );
        assert_eq!(m.provenance().sample_count, 1);
        assert!(m.schemas()["return_object"].goal_template.is_some());
    }

    #[test]
    fn empty_training_is_an_error() {
        assert_eq!(
            train_model(&Dataset::default()),
            Err(SemParseError::EmptyTraining)
        );
    }

    #[test]
    fn identical_samples_collapse_to_one_entry() {
        let mut b = house_case_sample();
        b.id = String::from("s2");
        let m = train_model(&dataset(vec![house_case_sample(), b])).unwrap();
        assert_eq!(m.schema_table().len(), 1);
        assert_eq!(m.schema_table().iter().next().unwrap().2.len(), 4);
    }

    #[test]
    fn contradictory_fact_sets_conflict() {
        let mut a = house_case_sample();
        a.facts.truncate(3);
        let mut b = house_case_sample();
        b.id = String::from("s2");
        b.facts.remove(0);
        let err = train_model(&dataset(vec![a, b])).unwrap_err();
        assert!(matches!(err, SemParseError::Conflict { sample, .. } if sample == "s2"));
    }

    #[test]
    fn house_case_round_trip_from_sibling_template() {
        let train = vec![
            expand(&template_two(), &slot_holders_one(), &schema(), "a").unwrap(),
            expand(&template_two(), &slot_holders_two(), &schema(), "b").unwrap(),
        ];
        let m = train_model(&dataset(train)).unwrap();
        let r = parse_case(&m, &house_case_sample().case_text).unwrap();
        assert_eq!(r.contract_id, "return_object");
        assert_eq!(r.facts, house_case_facts());
        assert!(r.diagnostics.is_empty());
        assert_eq!(r.extraction, house_case_sample().entities);
    }

    #[test]
    fn resubstitution_reproduces_training_facts() {
        let train = vec![
            house_case_sample(),
            expand(&template_two(), &slot_holders_two(), &schema(), "b").unwrap(),
        ];
        let d = dataset(train);
        let m = train_model(&d).unwrap();
        for s in &d.samples {
            assert_eq!(parse_case(&m, &s.case_text).unwrap().facts, s.facts);
        }
        let metrics = evaluate_model(&m, &d, None);
        assert_eq!(metrics.fact_exact_match_accuracy, 1.0);
        assert_eq!(metrics.entity_f1, 1.0);
        assert_eq!(metrics.entailment_accuracy, None);
    }

    #[test]
    fn empty_text_is_an_error() {
        let m = train_model(&dataset(vec![house_case_sample()])).unwrap();
        assert_eq!(parse_case(&m, ""), Err(SemParseError::EmptyExtraction));
        assert_eq!(
            parse_case(&m, "nobody here"),
            Err(SemParseError::EmptyExtraction)
        );
    }

    fn small_schema(roles: &[&str]) -> SlotSchema {
        SlotSchema {
            contract_id: String::from("c1"),
            roles: roles.iter().map(|r| String::from(*r)).collect(),
            goal_template: parse_atom("win(\"{Creditor}\")").unwrap(),
        }
    }

    fn sample(id: &str, text: &str, facts: &[&str], slots: &[(&str, &str)]) -> AugmentedSample {
        let slots: SlotHolderSet = slots.iter().copied().collect();
        let roles: Vec<&str> = slots.0.keys().map(String::as_str).collect();
        let t = Template {
            id: String::from(id),
            contract_id: String::from("c1"),
            text: String::from(text),
            fact_templates: atoms(facts),
        };
        expand(&t, &slots, &small_schema(&roles), id).unwrap()
    }

    #[test]
    fn partial_schema_falls_back_to_largest_subset() {
        let d = Dataset::from_samples(vec![
            sample(
                "t1",
                "{Creditor} asks {Obligator} to leave {Object}.",
                &[
                    "owner(\"{Creditor}\",\"{Object}\")",
                    "occupancy(\"{Obligator}\",\"{Object}\")",
                ],
                &[
                    ("Creditor", "john"),
                    ("Obligator", "alex"),
                    ("Object", "the house"),
                ],
            ),
            sample(
                "t2",
                "There is {Object}.",
                &["thing(\"{Object}\")"],
                &[("Object", "the house")],
            ),
        ]);
        let m = train_model(&d).unwrap();
        let r = parse_case(&m, "john looks at the house").unwrap();
        assert_eq!(r.facts, atoms(&["thing(\"the house\")"]));
        assert_eq!(
            r.diagnostics,
            [Diagnostic::PartialSchema {
                roles: vec![String::from("Object")]
            }]
        );
    }

    fn entity(candidates: &[(&str, &str)], surface: &str) -> ExtractedEntity {
        ExtractedEntity {
            candidates: candidates
                .iter()
                .map(|(c, r)| (String::from(*c), String::from(*r), 1))
                .collect(),
            surface: String::from(surface),
            start: 0,
            end: surface.len(),
        }
    }

    fn empty_model() -> ParserModel {
        ParserModel::new(
            Gazetteer::default(),
            FactSchemaTable::default(),
            BTreeMap::new(),
            Provenance::default(),
        )
        .unwrap()
    }

    #[test]
    fn contract_inference() {
        let m = empty_model();
        let es = [
            entity(&[("c1", "A")], "x"),
            entity(&[("c1", "B"), ("c2", "B")], "y"),
            entity(&[("c1", "C")], "z"),
        ];
        assert_eq!(
            infer_contract(&m, &es).unwrap(),
            (String::from("c1"), vec![])
        );

        let tie = [entity(&[("c2", "A")], "x"), entity(&[("c1", "A")], "y")];
        let (c, d) = infer_contract(&m, &tie).unwrap();
        assert_eq!(c, "c1");
        assert_eq!(
            d,
            [Diagnostic::AmbiguousContract {
                chosen: String::from("c1"),
                tied: vec![String::from("c1"), String::from("c2")]
            }]
        );
        assert_eq!(infer_contract(&m, &[]), Err(SemParseError::NoContract));
    }

    #[test]
    fn same_contract_role_ambiguity_uses_frequency() {
        let d = Dataset::from_samples(vec![
            sample(
                "t1",
                "{A} met {B}.",
                &["met(\"{A}\",\"{B}\")"],
                &[("A", "kim"), ("B", "lee")],
            ),
            sample(
                "t2",
                "{A} met {B}.",
                &["met(\"{A}\",\"{B}\")"],
                &[("A", "lee"), ("B", "ray")],
            ),
            sample(
                "t3",
                "{A} met {B}.",
                &["met(\"{A}\",\"{B}\")"],
                &[("A", "joe"), ("B", "lee")],
            ),
        ]);
        let m = train_model(&d).unwrap();
        let r = parse_case(&m, "kim and lee").unwrap();
        assert_eq!(r.facts, atoms(&["met(\"kim\",\"lee\")"]));
        assert!(r.diagnostics.iter().any(|x| matches!(
            x,
            Diagnostic::AmbiguousRole { surface, chosen, .. } if surface == "lee" && chosen == "B"
        )));
    }

    #[test]
    fn metrics_definition() {
        let o = |exact| SampleOutcome {
            sample_id: String::new(),
            facts_exact: exact,
            gold_spans: 2,
            predicted_spans: 2,
            matched_spans: 2,
            entailment_agrees: None,
        };
        let mut outs: Vec<SampleOutcome> = (0..95).map(|_| o(true)).collect();
        outs.extend((0..5).map(|_| o(false)));
        let m = Metrics::from_outcomes(&outs);
        assert_eq!(m.samples, 100);
        assert!((m.fact_exact_match_accuracy - 0.95).abs() < 1e-12);
    }
}
