//! Proof-tree renderers: indented text, Graphviz DOT and canonical JSON.

mod json;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::reasoner::ProofNode;

pub use json::{parse_proof_json, render_json, ExplainError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Text,
    Dot,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RenderOptions {
    pub format: Format,
    /// Deepest level rendered, the root being level 1.
    pub max_depth: Option<usize>,
    pub show_exceptions: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            format: Format::Text,
            max_depth: None,
            show_exceptions: true,
        }
    }
}

impl RenderOptions {
    fn expands(&self, level: usize) -> bool {
        self.max_depth.is_none_or(|m| level < m.max(1))
    }
}

/// Children rendered below `node`, exception children flagged.
fn visible_children<'a>(node: &'a ProofNode, o: &RenderOptions) -> Vec<(&'a ProofNode, bool)> {
    let mut out: Vec<(&ProofNode, bool)> = node.body_children.iter().map(|c| (c, false)).collect();
    if o.show_exceptions {
        out.extend(node.exception_children.iter().map(|c| (c, true)));
    }
    out
}

pub fn render(node: &ProofNode, o: &RenderOptions) -> String {
    match o.format {
        Format::Text => render_text(node, o),
        Format::Dot => render_dot(node, o),
        Format::Json => render_json(node, o),
    }
}

/// One line per node, two spaces of indent per level.
pub fn render_text(node: &ProofNode, o: &RenderOptions) -> String {
    let mut out = String::new();
    text_node(node, o, 1, false, &mut out);
    out
}

fn text_node(
    node: &ProofNode,
    o: &RenderOptions,
    level: usize,
    is_exception: bool,
    out: &mut String,
) {
    let indent = "  ".repeat(level - 1);
    let mark = if node.is_proved() { "[+]" } else { "[-]" };
    let tag = if is_exception { "exception: " } else { "" };
    let note = match (&node.rule_used, node.is_proved()) {
        (Some(r), _) if r.is_fact() && node.is_proved() => String::from("  (fact)"),
        (Some(r), true) => alloc::format!("  (by {r})"),
        (Some(r), false) => alloc::format!("  (defeated: {r})"),
        (None, _) => String::from("  (no applicable rule)"),
    };
    let _ = writeln!(out, "{indent}{tag}{mark} {}{note}", node.goal);
    let children = visible_children(node, o);
    if children.is_empty() {
        return;
    }
    if !o.expands(level) {
        let _ = writeln!(out, "{indent}  ...");
        return;
    }
    for (child, exc) in children {
        text_node(child, o, level + 1, exc, out);
    }
}

fn dot_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out
}

/// A `digraph proof` with all nodes declared before any edge.
pub fn render_dot(node: &ProofNode, o: &RenderOptions) -> String {
    let mut nodes: Vec<&ProofNode> = Vec::new();
    let mut edges: Vec<(usize, usize, bool)> = Vec::new();
    dot_collect(node, o, 1, &mut nodes, &mut edges);
    let mut out = String::from("digraph proof {\n");
    for (i, n) in nodes.iter().enumerate() {
        let (verdict, style) = if n.is_proved() {
            ("PROVED", "solid")
        } else {
            ("FAILED", "dashed")
        };
        let _ = writeln!(
            out,
            "  n{i} [label=\"{}\\n{verdict}\", style={style}];",
            dot_escape(&alloc::format!("{}", n.goal))
        );
    }
    for (from, to, exc) in edges {
        if exc {
            let _ = writeln!(
                out,
                "  n{from} -> n{to} [label=\"exception\", style=dashed];"
            );
        } else {
            let _ = writeln!(out, "  n{from} -> n{to} [style=solid];");
        }
    }
    out.push_str("}\n");
    out
}

fn dot_collect<'a>(
    node: &'a ProofNode,
    o: &RenderOptions,
    level: usize,
    nodes: &mut Vec<&'a ProofNode>,
    edges: &mut Vec<(usize, usize, bool)>,
) -> usize {
    let id = nodes.len();
    nodes.push(node);
    if o.expands(level) {
        for (child, exc) in visible_children(node, o) {
            let cid = dot_collect(child, o, level + 1, nodes, edges);
            edges.push((id, cid, exc));
        }
    }
    id
}
