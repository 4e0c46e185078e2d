use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::lang::{Atom, ExceptionExpr, Rule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Proved,
    Failed,
}

impl Verdict {
    pub fn is_proved(self) -> bool {
        self == Verdict::Proved
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Proved => "proved",
            Verdict::Failed => "failed",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One step of an inference trace.
///
/// A proved node carries the ground rule instance that concluded it, the
/// proofs of that instance's body and the (failed) exception checks. A
/// failed node either carries the instance that was defeated together with
/// the proved exception check, or no rule and the failing body goals of the
/// candidates that were tried. Failing goals may keep variables when no
/// instance of a pattern was provable at all.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofNode {
    pub goal: Atom,
    pub result: Verdict,
    pub rule_used: Option<Rule>,
    pub body_children: Vec<ProofNode>,
    pub exception_children: Vec<ProofNode>,
    /// Set on exception children: the exception instance being checked.
    pub exception: Option<ExceptionExpr>,
}

impl ProofNode {
    pub fn failed(goal: Atom) -> Self {
        ProofNode {
            goal,
            result: Verdict::Failed,
            rule_used: None,
            body_children: Vec::new(),
            exception_children: Vec::new(),
            exception: None,
        }
    }

    pub fn is_proved(&self) -> bool {
        self.result.is_proved()
    }

    /// Number of nodes in the tree, exception children included.
    pub fn node_count(&self) -> usize {
        1 + self
            .body_children
            .iter()
            .chain(&self.exception_children)
            .map(ProofNode::node_count)
            .sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self
            .body_children
            .iter()
            .chain(&self.exception_children)
            .map(ProofNode::depth)
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofViolation {
    /// Goals from the root down to the offending node.
    pub path: Vec<String>,
    pub message: String,
}

/// Structural check of every node of a proof tree.
pub fn check_proof_invariants(root: &ProofNode) -> Vec<ProofViolation> {
    let mut out = Vec::new();
    let mut path = Vec::new();
    check_node(root, &mut path, &mut out);
    out
}

fn check_node(node: &ProofNode, path: &mut Vec<String>, out: &mut Vec<ProofViolation>) {
    path.push(format!("{}", node.goal));
    let mut fail = |msg: &str| {
        out.push(ProofViolation {
            path: path.clone(),
            message: String::from(msg),
        })
    };
    match node.result {
        Verdict::Proved => {
            if !node.goal.is_ground() {
                fail("proved goal is not ground");
            }
            match &node.rule_used {
                None => fail("proved node without a rule"),
                Some(rule) => {
                    if rule.head != node.goal {
                        fail("rule head differs from goal");
                    }
                    let body: Vec<&Atom> = node.body_children.iter().map(|c| &c.goal).collect();
                    if body != rule.body.iter().collect::<Vec<_>>() {
                        fail("body children do not match the rule body");
                    }
                }
            }
            if node.body_children.iter().any(|c| !c.is_proved()) {
                fail("proved node with a failed body child");
            }
            if node.exception_children.iter().any(ProofNode::is_proved) {
                fail("proved node with a proved exception child");
            }
        }
        Verdict::Failed => match &node.rule_used {
            Some(_) => {
                let body_failed = node.body_children.iter().any(|c| !c.is_proved());
                let exc_fired = node.exception_children.iter().any(ProofNode::is_proved);
                if !body_failed && !exc_fired {
                    fail("failed node records a rule with no recorded failure");
                }
            }
            None => {
                if node.body_children.iter().any(ProofNode::is_proved) {
                    fail("failed node without a rule lists a proved child");
                }
                if !node.exception_children.is_empty() {
                    fail("failed node without a rule lists exception checks");
                }
            }
        },
    }
    if node
        .exception_children
        .iter()
        .any(|c| c.exception.is_none())
    {
        fail("exception child without its exception instance");
    }
    for child in node.body_children.iter().chain(&node.exception_children) {
        check_node(child, path, out);
    }
    path.pop();
}
