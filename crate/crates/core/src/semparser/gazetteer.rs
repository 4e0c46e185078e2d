use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::ParserModel;
use crate::text::normalize;

/// Normalized surface → (contract, role) → training count.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Gazetteer {
    entries: BTreeMap<String, BTreeMap<(String, String), usize>>,
}

impl Gazetteer {
    /// Records one occurrence; blank surfaces are ignored.
    pub fn add(&mut self, surface: &str, contract: &str, role: &str) {
        self.add_count(surface, contract, role, 1);
    }

    pub fn add_count(&mut self, surface: &str, contract: &str, role: &str, count: usize) {
        let key = normalize(surface);
        if key.is_empty() {
            return;
        }
        *self
            .entries
            .entry(key)
            .or_default()
            .entry((String::from(contract), String::from(role)))
            .or_default() += count;
    }

    /// (contract, role) → count for a surface, normalizing it first.
    pub fn lookup(&self, surface: &str) -> Option<&BTreeMap<(String, String), usize>> {
        self.entries.get(&normalize(surface))
    }

    pub fn contains(&self, surface: &str, contract: &str, role: &str) -> bool {
        self.lookup(surface)
            .is_some_and(|m| m.contains_key(&(String::from(contract), String::from(role))))
    }

    /// (normalized surface, contract, role, count), sorted.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, &str, usize)> {
        self.entries.iter().flat_map(|(s, m)| {
            m.iter()
                .map(move |((c, r), n)| (s.as_str(), c.as_str(), r.as_str(), *n))
        })
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Default)]
struct Node {
    next: BTreeMap<char, usize>,
    terminal: Option<String>,
}

/// Character trie over normalized gazetteer surfaces.
#[derive(Debug, Clone)]
pub(super) struct Matcher {
    nodes: Vec<Node>,
}

impl Matcher {
    pub(super) fn build(g: &Gazetteer) -> Self {
        let mut nodes = alloc::vec![Node::default()];
        for key in g.surfaces() {
            let mut at = 0;
            for c in key.chars() {
                at = match nodes[at].next.get(&c) {
                    Some(&n) => n,
                    None => {
                        nodes.push(Node::default());
                        let n = nodes.len() - 1;
                        nodes[at].next.insert(c, n);
                        n
                    }
                };
            }
            nodes[at].terminal = Some(String::from(key));
        }
        Matcher { nodes }
    }
}

/// A recognized slot holder with every (contract, role) it may fill.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractedEntity {
    pub candidates: Vec<(String, String, usize)>,
    pub surface: String,
    pub start: usize,
    pub end: usize,
}

/// Normalized character with the original char range it came from.
struct NormChar {
    c: char,
    start: usize,
    end: usize,
}

fn normalized_stream(text: &str) -> Vec<NormChar> {
    let mut out: Vec<NormChar> = Vec::new();
    let mut in_space = false;
    for (i, c) in text.chars().enumerate() {
        if c.is_whitespace() {
            if !in_space && !out.is_empty() {
                out.push(NormChar {
                    c: ' ',
                    start: i,
                    end: i + 1,
                });
            } else if let Some(last) = out.last_mut().filter(|_| in_space) {
                last.end = i + 1;
            }
            in_space = true;
            continue;
        }
        in_space = false;
        for lc in c.to_lowercase() {
            out.push(NormChar {
                c: lc,
                start: i,
                end: i + 1,
            });
        }
    }
    out
}

/// Leftmost-first, longest-match, non-overlapping gazetteer scan. Matches
/// never cut through a word: an alphanumeric match edge must not touch an
/// alphanumeric neighbour. Spans index the original text in chars.
pub fn extract_entities(model: &ParserModel, text: &str) -> Vec<ExtractedEntity> {
    let nodes = &model.matcher.nodes;
    let stream = normalized_stream(text);
    let chars: Vec<char> = text.chars().collect();
    let word = |i: usize| stream.get(i).is_some_and(|n| n.c.is_alphanumeric());
    let mut out = Vec::new();
    let mut i = 0;
    while i < stream.len() {
        if i > 0 && word(i - 1) && word(i) {
            i += 1;
            continue;
        }
        let mut at = 0;
        let mut best: Option<(usize, &String)> = None;
        for (j, n) in stream.iter().enumerate().skip(i) {
            let Some(&next) = nodes[at].next.get(&n.c) else {
                break;
            };
            at = next;
            if let Some(key) = &nodes[at].terminal {
                if !(word(j) && word(j + 1)) {
                    best = Some((j, key));
                }
            }
        }
        match best {
            Some((j, key)) => {
                let start = stream[i].start;
                let end = stream[j].end;
                let candidates = model
                    .gazetteer
                    .entries
                    .get(key)
                    .map(|m| {
                        m.iter()
                            .map(|((c, r), n)| (c.clone(), r.clone(), *n))
                            .collect()
                    })
                    .unwrap_or_default();
                out.push(ExtractedEntity {
                    candidates,
                    surface: chars[start..end].iter().collect(),
                    start,
                    end,
                });
                i = j + 1;
            }
            None => i += 1,
        }
    }
    out
}
