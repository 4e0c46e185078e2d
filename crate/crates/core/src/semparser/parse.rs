use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use super::{Diagnostic, ExtractedEntity, ParseResult, ParserModel, RoleSet, SemParseError};
use crate::augment::{instantiate, EntitySpan, SlotHolderSet};
use crate::semparser::extract_entities;
use crate::text::normalize;

/// Picks the contract covering the most distinct roles, then the most
/// distinct surfaces; ties go to the smallest contract id with a
/// diagnostic.
pub fn infer_contract(
    model: &ParserModel,
    entities: &[ExtractedEntity],
) -> Result<(String, Vec<Diagnostic>), SemParseError> {
    let mut score: BTreeMap<&str, (BTreeSet<&str>, BTreeSet<String>)> = BTreeMap::new();
    for e in entities {
        for (contract, role, _) in &e.candidates {
            let entry = score.entry(contract.as_str()).or_default();
            entry.0.insert(role.as_str());
            entry.1.insert(normalize(&e.surface));
        }
    }
    let best = score
        .values()
        .map(|(r, s)| (r.len(), s.len()))
        .max()
        .ok_or(SemParseError::NoContract)?;
    let tied: Vec<String> = score
        .iter()
        .filter(|(_, (r, s))| (r.len(), s.len()) == best)
        .map(|(c, _)| String::from(*c))
        .collect();
    let chosen = tied[0].clone();
    let _ = model;
    let diagnostics = if tied.len() > 1 {
        alloc::vec![Diagnostic::AmbiguousContract {
            chosen: chosen.clone(),
            tied,
        }]
    } else {
        Vec::new()
    };
    Ok((chosen, diagnostics))
}

/// Parses legal-case text into ground facts of the inferred contract.
pub fn parse_case(model: &ParserModel, text: &str) -> Result<ParseResult, SemParseError> {
    let entities = extract_entities(model, text);
    if entities.is_empty() {
        return Err(SemParseError::EmptyExtraction);
    }
    let (contract, mut diagnostics) = infer_contract(model, &entities)?;

    let mut extraction = Vec::new();
    for e in &entities {
        let mut roles: Vec<(&str, usize)> = e
            .candidates
            .iter()
            .filter(|(c, _, _)| *c == contract)
            .map(|(_, r, n)| (r.as_str(), *n))
            .collect();
        if roles.is_empty() {
            diagnostics.push(Diagnostic::ForeignEntity {
                surface: e.surface.clone(),
                start: e.start,
                end: e.end,
            });
            continue;
        }
        // most frequent in training, then role name
        roles.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        if roles.len() > 1 {
            diagnostics.push(Diagnostic::AmbiguousRole {
                surface: e.surface.clone(),
                chosen: String::from(roles[0].0),
                candidates: roles.iter().map(|(r, _)| String::from(*r)).collect(),
            });
        }
        extraction.push(EntitySpan {
            role: String::from(roles[0].0),
            surface: e.surface.clone(),
            start: e.start,
            end: e.end,
        });
    }

    let mut slots = SlotHolderSet::default();
    for e in &extraction {
        match slots.get(&e.role) {
            None => slots.insert(e.role.clone(), e.surface.clone()),
            Some(kept) if normalize(kept) != normalize(&e.surface) => {
                diagnostics.push(Diagnostic::ConflictingSurfaces {
                    role: e.role.clone(),
                    kept: String::from(kept),
                    ignored: e.surface.clone(),
                });
            }
            Some(_) => {}
        }
    }

    let present: RoleSet = slots.0.keys().cloned().collect();
    let table = model.schema_table();
    let templates = match table.get(&contract, &present) {
        Some(t) => Some(t),
        None => {
            let fallback = table
                .keys_for(&contract)
                .filter(|k| k.is_subset(&present))
                .max_by(|a, b| a.len().cmp(&b.len()).then_with(|| b.cmp(a)));
            match fallback {
                Some(k) => {
                    diagnostics.push(Diagnostic::PartialSchema {
                        roles: k.iter().cloned().collect(),
                    });
                    table.get(&contract, k)
                }
                None => {
                    diagnostics.push(Diagnostic::NoSchema);
                    None
                }
            }
        }
    };
    let facts = templates
        .map(|ts| ts.iter().map(|t| instantiate(t, &slots)).collect())
        .unwrap_or_default();

    Ok(ParseResult {
        contract_id: contract,
        extraction,
        facts,
        diagnostics,
    })
}
