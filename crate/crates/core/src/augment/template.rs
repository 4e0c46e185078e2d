use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{
    AugmentError, AugmentedSample, EntitySpan, SlotHolderSet, SlotSchema, Template, Violation,
};
use crate::lang::{Atom, Term};
use crate::text::normalize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Literal(String),
    Slot(String),
}

fn is_role_name(s: &str) -> bool {
    let mut chars = s.chars();
    chars
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Splits template text into literals and `{Role}` slots. `{{` and `}}`
/// stand for literal braces.
pub fn parse_template_text(text: &str) -> Result<Vec<Segment>, Violation> {
    let mut out = Vec::new();
    let mut literal = String::new();
    let mut chars = text.chars().enumerate().peekable();
    while let Some((offset, c)) = chars.next() {
        match c {
            '{' if chars.peek().map(|p| p.1) == Some('{') => {
                chars.next();
                literal.push('{');
            }
            '{' => {
                let mut role = String::new();
                let mut closed = false;
                for (_, c) in chars.by_ref() {
                    if c == '}' {
                        closed = true;
                        break;
                    }
                    role.push(c);
                }
                if !closed {
                    return Err(Violation::Malformed {
                        offset,
                        reason: "unclosed placeholder",
                    });
                }
                if !is_role_name(&role) {
                    return Err(Violation::Malformed {
                        offset,
                        reason: "placeholder is not a role name",
                    });
                }
                if !literal.is_empty() {
                    out.push(Segment::Literal(core::mem::take(&mut literal)));
                }
                out.push(Segment::Slot(role));
            }
            '}' if chars.peek().map(|p| p.1) == Some('}') => {
                chars.next();
                literal.push('}');
            }
            '}' => {
                return Err(Violation::Malformed {
                    offset,
                    reason: "unmatched `}`",
                })
            }
            c => literal.push(c),
        }
    }
    if !literal.is_empty() {
        out.push(Segment::Literal(literal));
    }
    Ok(out)
}

/// The role named by a `{Role}` placeholder constant.
pub fn placeholder_role(term: &Term) -> Option<&str> {
    let Term::Const(c) = term else { return None };
    let inner = c.strip_prefix('{')?.strip_suffix('}')?;
    is_role_name(inner).then_some(inner)
}

/// Replaces placeholder constants with the slot surfaces they name.
pub fn instantiate(atom: &Atom, slots: &SlotHolderSet) -> Atom {
    Atom {
        predicate: atom.predicate.clone(),
        args: atom
            .args
            .iter()
            .map(|t| match placeholder_role(t).and_then(|r| slots.get(r)) {
                Some(surface) => Term::Const(String::from(surface)),
                None => t.clone(),
            })
            .collect(),
    }
}

pub fn validate_schema(schema: &SlotSchema) -> Result<(), AugmentError> {
    let bad = |why: String| Err(AugmentError::InvalidSchema(schema.contract_id.clone(), why));
    if schema.roles.is_empty() {
        return bad(String::from("no roles"));
    }
    let mut seen = BTreeSet::new();
    for r in &schema.roles {
        if !is_role_name(r) {
            return bad(format!("`{r}` is not a role name"));
        }
        if !seen.insert(r.as_str()) {
            return bad(format!("role {r} listed twice"));
        }
    }
    for t in &schema.goal_template.args {
        match t {
            Term::Var(v) => return bad(format!("goal template has variable {v}")),
            t => {
                if let Some(role) = placeholder_role(t) {
                    if !schema.has_role(role) {
                        return bad(format!("goal template names unknown role {role}"));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Every violation of the template invariants against `schema`.
pub fn validate_template(template: &Template, schema: &SlotSchema) -> Vec<Violation> {
    let mut out = Vec::new();
    if template.contract_id != schema.contract_id {
        out.push(Violation::ContractMismatch {
            template: template.contract_id.clone(),
            schema: schema.contract_id.clone(),
        });
    }
    let segments = match parse_template_text(&template.text) {
        Ok(s) => s,
        Err(v) => {
            out.push(v);
            return out;
        }
    };
    if template.text.trim().is_empty() {
        out.push(Violation::EmptyText);
    }
    let in_text: BTreeSet<&str> = segments
        .iter()
        .filter_map(|s| match s {
            Segment::Slot(r) => Some(r.as_str()),
            Segment::Literal(_) => None,
        })
        .collect();
    let mut unknown = BTreeSet::new();
    for role in &in_text {
        if !schema.has_role(role) {
            unknown.insert(String::from(*role));
        }
    }
    let mut unreferenced = BTreeSet::new();
    for fact in &template.fact_templates {
        for t in &fact.args {
            if t.is_var() {
                out.push(Violation::VariableInFactTemplate(format!("{fact}")));
            }
            if let Some(role) = placeholder_role(t) {
                if !schema.has_role(role) {
                    unknown.insert(String::from(role));
                } else if !in_text.contains(role) {
                    unreferenced.insert(String::from(role));
                }
            }
        }
    }
    out.extend(unknown.into_iter().map(Violation::UnknownPlaceholder));
    out.extend(unreferenced.into_iter().map(Violation::UnreferencedRole));
    out
}

/// Checks that `slots` covers exactly the schema roles with usable,
/// mutually non-overlapping surfaces.
pub fn check_slot_set(slots: &SlotHolderSet, schema: &SlotSchema) -> Result<(), AugmentError> {
    for role in &schema.roles {
        let Some(surface) = slots.get(role) else {
            return Err(AugmentError::MissingRole(role.clone()));
        };
        if surface.trim().is_empty() {
            return Err(AugmentError::InvalidSurface {
                role: role.clone(),
                reason: "empty",
            });
        }
        if surface.trim() != surface {
            return Err(AugmentError::InvalidSurface {
                role: role.clone(),
                reason: "leading or trailing whitespace",
            });
        }
        if surface.contains(['{', '}']) {
            return Err(AugmentError::InvalidSurface {
                role: role.clone(),
                reason: "contains a brace",
            });
        }
    }
    if let Some(extra) = slots.0.keys().find(|k| !schema.has_role(k)) {
        return Err(AugmentError::UnknownRole(extra.clone()));
    }
    let normalized: Vec<(&String, String)> = schema
        .roles
        .iter()
        .map(|r| (r, normalize(slots.get(r).unwrap_or_default())))
        .collect();
    for (i, (ra, a)) in normalized.iter().enumerate() {
        for (rb, b) in &normalized[i + 1..] {
            if a.contains(b.as_str()) || b.contains(a.as_str()) {
                return Err(AugmentError::OverlappingSurface {
                    first: (*ra).clone(),
                    second: (*rb).clone(),
                });
            }
        }
    }
    Ok(())
}

/// Substitutes `slots` into `template`, recording one span per placeholder
/// occurrence and instantiating the fact templates.
pub fn expand(
    template: &Template,
    slots: &SlotHolderSet,
    schema: &SlotSchema,
    sample_id: &str,
) -> Result<AugmentedSample, AugmentError> {
    let violations = validate_template(template, schema);
    if !violations.is_empty() {
        return Err(AugmentError::InvalidTemplate {
            id: template.id.clone(),
            violations,
        });
    }
    check_slot_set(slots, schema)?;
    let segments =
        parse_template_text(&template.text).map_err(|v| AugmentError::InvalidTemplate {
            id: template.id.clone(),
            violations: alloc::vec![v],
        })?;
    let mut case_text = String::new();
    let mut pos = 0usize;
    let mut entities = Vec::new();
    for seg in segments {
        match seg {
            Segment::Literal(s) => {
                pos += s.chars().count();
                case_text.push_str(&s);
            }
            Segment::Slot(role) => {
                let surface = slots
                    .get(&role)
                    .ok_or_else(|| AugmentError::MissingRole(role.clone()))?;
                let len = surface.chars().count();
                entities.push(EntitySpan {
                    role,
                    surface: String::from(surface),
                    start: pos,
                    end: pos + len,
                });
                pos += len;
                case_text.push_str(surface);
            }
        }
    }
    Ok(AugmentedSample {
        id: String::from(sample_id),
        contract_id: template.contract_id.clone(),
        template_id: template.id.clone(),
        case_text,
        entities,
        facts: template
            .fact_templates
            .iter()
            .map(|f| instantiate(f, slots))
            .collect(),
    })
}
