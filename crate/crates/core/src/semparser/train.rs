use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{
    ContractInfo, FactSchemaTable, Gazetteer, ParserModel, Provenance, RoleSet, SemParseError,
};
use crate::augment::{placeholder, AugmentedSample, Dataset};
use crate::lang::{Atom, Term};

/// Replaces every fact argument equal to an entity surface by that
/// entity's `{Role}` placeholder.
fn abstract_facts(sample: &AugmentedSample) -> Vec<Atom> {
    let mut by_surface: BTreeMap<&str, &str> = BTreeMap::new();
    for e in &sample.entities {
        by_surface
            .entry(e.surface.as_str())
            .or_insert(e.role.as_str());
    }
    sample
        .facts
        .iter()
        .map(|f| Atom {
            predicate: f.predicate.clone(),
            args: f
                .args
                .iter()
                .map(|t| match t {
                    Term::Const(c) => match by_surface.get(c.as_str()) {
                        Some(role) => placeholder(role),
                        None => t.clone(),
                    },
                    v => v.clone(),
                })
                .collect(),
        })
        .collect()
}

// FNV-1a over sample ids and texts
fn fingerprint(data: &Dataset) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for s in &data.samples {
        for b in
            s.id.bytes()
                .chain([0])
                .chain(s.case_text.bytes())
                .chain([0])
        {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    format!("fnv1a64:{h:016x}")
}

/// Builds the gazetteer and the fact-schema table from training samples.
pub fn train_model(train: &Dataset) -> Result<ParserModel, SemParseError> {
    if train.samples.is_empty() {
        return Err(SemParseError::EmptyTraining);
    }
    let mut gazetteer = Gazetteer::default();
    let mut table: BTreeMap<(String, RoleSet), (Vec<Atom>, BTreeSet<Atom>)> = BTreeMap::new();
    let mut observed_roles: BTreeMap<String, Vec<String>> = BTreeMap::new();

    for sample in &train.samples {
        if !sample.spans_consistent() {
            return Err(SemParseError::InvalidSample(sample.id.clone()));
        }
        let roles: RoleSet = sample.entities.iter().map(|e| e.role.clone()).collect();
        for e in &sample.entities {
            gazetteer.add(&e.surface, &sample.contract_id, &e.role);
            let seen = observed_roles
                .entry(sample.contract_id.clone())
                .or_default();
            if !seen.contains(&e.role) {
                seen.push(e.role.clone());
            }
        }
        let facts = abstract_facts(sample);
        let as_set: BTreeSet<Atom> = facts.iter().cloned().collect();
        match table.get_mut(&(sample.contract_id.clone(), roles.clone())) {
            // union when one set extends the other; incomparable sets conflict
            Some((ordered, existing)) => {
                if as_set.is_superset(existing) {
                    for f in facts {
                        if existing.insert(f.clone()) {
                            ordered.push(f);
                        }
                    }
                } else if !existing.is_superset(&as_set) {
                    return Err(SemParseError::Conflict {
                        contract: sample.contract_id.clone(),
                        roles: roles.into_iter().collect(),
                        sample: sample.id.clone(),
                    });
                }
            }
            None => {
                let mut ordered = Vec::new();
                for f in facts {
                    if !ordered.contains(&f) {
                        ordered.push(f);
                    }
                }
                table.insert((sample.contract_id.clone(), roles), (ordered, as_set));
            }
        }
    }

    let mut schemas: BTreeMap<String, ContractInfo> = BTreeMap::new();
    for (contract, roles) in observed_roles {
        let info = match train.schemas.get(&contract) {
            Some(s) => ContractInfo {
                roles: s.roles.clone(),
                goal_template: Some(s.goal_template.clone()),
            },
            None => ContractInfo {
                roles,
                goal_template: None,
            },
        };
        schemas.insert(contract, info);
    }
    // contracts whose samples carried no entities
    for s in &train.samples {
        schemas
            .entry(s.contract_id.clone())
            .or_insert_with(|| ContractInfo {
                roles: Vec::new(),
                goal_template: train
                    .schemas
                    .get(&s.contract_id)
                    .map(|x| x.goal_template.clone()),
            });
    }

    let mut schema_table = FactSchemaTable::default();
    for ((contract, roles), (facts, _)) in table {
        schema_table.insert(contract, roles, facts);
    }
    ParserModel::new(
        gazetteer,
        schema_table,
        schemas,
        Provenance {
            dataset_id: fingerprint(train),
            sample_count: train.samples.len(),
        },
    )
}
