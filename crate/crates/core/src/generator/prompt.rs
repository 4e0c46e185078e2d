use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde_json::Value;

use super::{AssetKind, GenError, GenerationRequest, Message, Reject};
use crate::augment::{
    check_slot_set, parse_template_text, validate_template, AugmentError, Segment, SlotHolderSet,
    SlotSchema, Template,
};
use crate::lang::parse_atom;

const SYSTEM: &str = "You write training data for a legal reasoning system. \
Each legal case is a template whose slots are written as {Role} placeholders, \
plus sets of slot holders that fill those roles.";

/// Few-shot prompt asking for `want_templates` or `want_slot_sets` items.
pub fn build_prompt(req: &GenerationRequest, kind: AssetKind) -> Vec<Message> {
    let schema = &req.schema;
    let mut user = format!(
        "Contract: {}\nRoles: {}\n",
        schema.contract_id,
        schema.roles.join(", ")
    );
    match kind {
        AssetKind::Templates => {
            user.push_str("Example templates:\n");
            for t in &req.seed_templates {
                user.push_str(&Value::String(t.text.clone()).to_string());
                user.push('\n');
            }
            user.push_str(&format!(
                "Write {} new templates for this contract as JSON strings. \
                 Every template must use each role placeholder at least once and \
                 no other placeholders. Vary the wording and sentence order.\n",
                req.want_templates
            ));
        }
        AssetKind::SlotSets => {
            user.push_str("Example slot holder sets:\n");
            for s in &req.seed_slot_sets {
                user.push_str(&s.to_json_in_order(schema));
                user.push('\n');
            }
            user.push_str(&format!(
                "Write {} new slot holder sets as JSON objects with exactly these roles. \
                 Use new people, places and things. No surface may contain another.\n",
                req.want_slot_sets
            ));
        }
    }
    user.push_str("Reply with a JSON array only.");
    alloc::vec![Message::new("system", SYSTEM), Message::new("user", user)]
}

/// Valid items from a model reply plus the rejected ones.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedAssets {
    pub templates: Vec<Template>,
    pub slot_sets: Vec<SlotHolderSet>,
    pub rejects: Vec<Reject>,
}

fn first_json_array(raw: &str) -> Option<Vec<Value>> {
    for (i, _) in raw.match_indices('[') {
        let mut stream = serde_json::Deserializer::from_str(&raw[i..]).into_iter::<Value>();
        if let Some(Ok(Value::Array(items))) = stream.next() {
            return Some(items);
        }
    }
    None
}

fn slot_reason(e: &AugmentError) -> String {
    match e {
        AugmentError::MissingRole(r) => format!("missing role {r}"),
        AugmentError::UnknownRole(r) => format!("unknown role {r}"),
        other => other.to_string(),
    }
}

fn parse_template(item: &Value, index: usize, schema: &SlotSchema) -> Result<Template, String> {
    let (text, facts) = match item {
        Value::String(s) => (s.clone(), Vec::new()),
        Value::Object(o) => {
            let text = o
                .get("text")
                .and_then(Value::as_str)
                .ok_or("object without a \"text\" string")?;
            let mut facts = Vec::new();
            if let Some(fs) = o.get("facts") {
                let fs = fs.as_array().ok_or("\"facts\" is not an array")?;
                for f in fs {
                    let s = f.as_str().ok_or("fact is not a string")?;
                    facts.push(parse_atom(s).map_err(|e| format!("bad fact {s:?}: {e}"))?);
                }
            }
            (String::from(text), facts)
        }
        _ => return Err(String::from("not a string or object")),
    };
    let t = Template {
        id: format!("item{index}"),
        contract_id: schema.contract_id.clone(),
        text,
        fact_templates: facts,
    };
    let violations = validate_template(&t, schema);
    if let Some(v) = violations.first() {
        return Err(v.to_string());
    }
    let segments = parse_template_text(&t.text).map_err(|v| v.to_string())?;
    for role in &schema.roles {
        if !segments
            .iter()
            .any(|s| matches!(s, Segment::Slot(r) if r == role))
        {
            return Err(format!("missing role {role}"));
        }
    }
    Ok(t)
}

fn parse_slot_set(item: &Value, schema: &SlotSchema) -> Result<SlotHolderSet, String> {
    let obj = item.as_object().ok_or("not a JSON object")?;
    let mut set = SlotHolderSet::default();
    for (k, v) in obj {
        let s = v
            .as_str()
            .ok_or_else(|| format!("role {k} is not a string"))?;
        set.insert(k.clone(), s);
    }
    check_slot_set(&set, schema).map_err(|e| slot_reason(&e))?;
    Ok(set)
}

/// Takes the first JSON array in `raw`, skipping prose and code fences, and
/// keeps only items that pass template or slot-set validation.
pub fn parse_generation_output(
    raw: &str,
    kind: AssetKind,
    schema: &SlotSchema,
) -> Result<ParsedAssets, GenError> {
    let items = first_json_array(raw).ok_or(GenError::NoJsonFound)?;
    let mut out = ParsedAssets::default();
    for (i, item) in items.iter().enumerate() {
        let result = match kind {
            AssetKind::Templates => parse_template(item, i, schema).map(|t| out.templates.push(t)),
            AssetKind::SlotSets => parse_slot_set(item, schema).map(|s| out.slot_sets.push(s)),
        };
        if let Err(reason) = result {
            out.rejects.push(Reject {
                kind,
                item: item.to_string(),
                reason,
            });
        }
    }
    Ok(out)
}
