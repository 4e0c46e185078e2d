use alloc::string::String;
use alloc::vec::Vec;

use serde_json::Value;
use thiserror::Error;

use super::{visible_children, RenderOptions};
use crate::lang::{parse_atom, parse_program, parse_rule, LangError};
use crate::reasoner::{ProofNode, Verdict};

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("invalid proof JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid proof document: {0}")]
    Shape(String),
    #[error(transparent)]
    Lang(#[from] LangError),
}

fn push_str(out: &mut String, s: &str) {
    // serde_json's string escaping never fails for &str
    out.push_str(&serde_json::to_string(s).unwrap_or_default());
}

/// Canonical JSON: sorted keys, no insignificant whitespace.
pub fn render_json(node: &ProofNode, o: &RenderOptions) -> String {
    let mut out = String::new();
    json_node(node, o, 1, &mut out);
    out
}

fn json_node(node: &ProofNode, o: &RenderOptions, level: usize, out: &mut String) {
    let children = visible_children(node, o);
    let expand = o.expands(level);
    // keys in sorted order
    for (key, want_exc) in [("body", false), ("exceptions", true)] {
        out.push_str(if want_exc { ",\"" } else { "{\"" });
        out.push_str(key);
        out.push_str("\":[");
        if expand {
            let mut first = true;
            for (child, _) in children.iter().filter(|(_, e)| *e == want_exc) {
                if !first {
                    out.push(',');
                }
                first = false;
                json_node(child, o, level + 1, out);
            }
        }
        out.push(']');
        if !want_exc {
            if let Some(e) = &node.exception {
                out.push_str(",\"exception\":");
                push_str(out, &alloc::format!("{e}"));
            }
        }
    }
    out.push_str(",\"goal\":");
    push_str(out, &alloc::format!("{}", node.goal));
    out.push_str(",\"result\":");
    push_str(out, node.result.as_str());
    out.push_str(",\"rule\":");
    match &node.rule_used {
        Some(r) => push_str(out, &alloc::format!("{r}")),
        None => out.push_str("null"),
    }
    if !expand && !children.is_empty() {
        out.push_str(",\"truncated\":true");
    }
    out.push('}');
}

fn field<'a>(
    obj: &'a serde_json::Map<String, Value>,
    key: &str,
) -> Result<&'a Value, ExplainError> {
    obj.get(key)
        .ok_or_else(|| ExplainError::Shape(alloc::format!("missing key `{key}`")))
}

fn text<'a>(v: &'a Value, key: &str) -> Result<&'a str, ExplainError> {
    v.as_str()
        .ok_or_else(|| ExplainError::Shape(alloc::format!("`{key}` must be a string")))
}

fn node_from_value(v: &Value) -> Result<ProofNode, ExplainError> {
    let obj = v
        .as_object()
        .ok_or_else(|| ExplainError::Shape(String::from("node must be an object")))?;
    let goal = parse_atom(text(field(obj, "goal")?, "goal")?)?;
    let result = match text(field(obj, "result")?, "result")? {
        "proved" => Verdict::Proved,
        "failed" => Verdict::Failed,
        other => {
            return Err(ExplainError::Shape(alloc::format!(
                "unknown result `{other}`"
            )))
        }
    };
    let rule_used = match field(obj, "rule")? {
        Value::Null => None,
        r => Some(parse_rule(text(r, "rule")?)?),
    };
    let exception = match obj.get("exception") {
        None => None,
        Some(e) => {
            let program = parse_program(text(e, "exception")?)?;
            match program.exceptions.into_iter().next() {
                Some(e) if program.rules.is_empty() => Some(e),
                _ => {
                    return Err(ExplainError::Shape(String::from(
                        "`exception` must hold one exception",
                    )))
                }
            }
        }
    };
    let children = |key: &str| -> Result<Vec<ProofNode>, ExplainError> {
        field(obj, key)?
            .as_array()
            .ok_or_else(|| ExplainError::Shape(alloc::format!("`{key}` must be an array")))?
            .iter()
            .map(node_from_value)
            .collect()
    };
    Ok(ProofNode {
        goal,
        result,
        rule_used,
        body_children: children("body")?,
        exception_children: children("exceptions")?,
        exception,
    })
}

/// Parses a document produced by [`render_json`] back into a tree.
pub fn parse_proof_json(source: &str) -> Result<ProofNode, ExplainError> {
    let v: Value = serde_json::from_str(source)?;
    node_from_value(&v)
}
