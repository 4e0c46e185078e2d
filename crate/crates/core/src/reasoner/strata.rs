use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use super::ReasonError;
use crate::lang::Program;

/// Stratum index per predicate. Unknown predicates (e.g. ones that only
/// occur in input facts) live in stratum 0.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Strata(BTreeMap<String, usize>);

impl Strata {
    pub fn get(&self, predicate: &str) -> usize {
        self.0.get(predicate).copied().unwrap_or(0)
    }

    pub fn max(&self) -> usize {
        self.0.values().copied().max().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn as_map(&self) -> &BTreeMap<String, usize> {
        &self.0
    }
}

struct Graph {
    // deps[i] = (j, strict): predicate i depends on predicate j
    deps: Vec<Vec<(usize, bool)>>,
}

struct Tarjan<'g> {
    graph: &'g Graph,
    index: Vec<Option<usize>>,
    low: Vec<usize>,
    on_stack: Vec<bool>,
    stack: Vec<usize>,
    next: usize,
    sccs: Vec<Vec<usize>>,
}

impl Tarjan<'_> {
    fn visit(&mut self, v: usize) {
        self.index[v] = Some(self.next);
        self.low[v] = self.next;
        self.next += 1;
        self.stack.push(v);
        self.on_stack[v] = true;
        for &(w, _) in &self.graph.deps[v] {
            match self.index[w] {
                None => {
                    self.visit(w);
                    self.low[v] = self.low[v].min(self.low[w]);
                }
                Some(iw) if self.on_stack[w] => self.low[v] = self.low[v].min(iw),
                Some(_) => {}
            }
        }
        if Some(self.low[v]) == self.index[v] {
            let mut scc = Vec::new();
            while let Some(w) = self.stack.pop() {
                self.on_stack[w] = false;
                scc.push(w);
                if w == v {
                    break;
                }
            }
            self.sccs.push(scc);
        }
    }
}

/// Assigns the least strata such that rule heads sit at or above their body
/// predicates and blocked predicates sit strictly above their conditions.
pub fn check_stratified(program: &Program) -> Result<Strata, ReasonError> {
    let names: Vec<&str> = program.predicates().into_iter().collect();
    let id: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let mut graph = Graph {
        deps: alloc::vec![Vec::new(); names.len()],
    };
    for rule in &program.rules {
        let h = id[rule.head.predicate.as_str()];
        for b in &rule.body {
            graph.deps[h].push((id[b.predicate.as_str()], false));
        }
    }
    for exc in &program.exceptions {
        let b = id[exc.blocked.predicate.as_str()];
        graph.deps[b].push((id[exc.condition.predicate.as_str()], true));
    }

    let n = names.len();
    let mut tarjan = Tarjan {
        graph: &graph,
        index: alloc::vec![None; n],
        low: alloc::vec![0; n],
        on_stack: alloc::vec![false; n],
        stack: Vec::new(),
        next: 0,
        sccs: Vec::new(),
    };
    for v in 0..n {
        if tarjan.index[v].is_none() {
            tarjan.visit(v);
        }
    }
    let sccs = tarjan.sccs;

    let mut component = alloc::vec![0usize; n];
    for (c, scc) in sccs.iter().enumerate() {
        for &v in scc {
            component[v] = c;
        }
    }

    // Tarjan emits every component after the components it depends on.
    let mut level = alloc::vec![0usize; sccs.len()];
    for (c, scc) in sccs.iter().enumerate() {
        let members: BTreeSet<usize> = scc.iter().copied().collect();
        let mut lvl = 0;
        for &v in scc {
            for &(w, strict) in &graph.deps[v] {
                if members.contains(&w) {
                    if strict {
                        let mut cycle: Vec<String> =
                            scc.iter().map(|&i| String::from(names[i])).collect();
                        cycle.sort();
                        return Err(ReasonError::Unstratifiable { cycle });
                    }
                } else {
                    lvl = lvl.max(level[component[w]] + usize::from(strict));
                }
            }
        }
        level[c] = lvl;
    }

    Ok(Strata(
        names
            .iter()
            .enumerate()
            .map(|(i, name)| (String::from(*name), level[component[i]]))
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_program;

    fn strata_of(src: &str) -> Result<Vec<(String, usize)>, ReasonError> {
        let p = parse_program(src).unwrap();
        check_stratified(&p).map(|s| s.iter().map(|(k, v)| (String::from(k), v)).collect())
    }

    #[test]
    fn one_negative_edge() {
        let got = strata_of("q(X) <= p(X). exception(q(X), r(X)).").unwrap();
        let want = [("p", 0), ("q", 1), ("r", 0)]
            .map(|(k, v)| (String::from(k), v))
            .to_vec();
        assert_eq!(got, want);
    }

    #[test]
    fn single_fact() {
        assert_eq!(
            strata_of("p(\"a\").").unwrap(),
            alloc::vec![(String::from("p"), 0)]
        );
    }

    #[test]
    fn mutual_exception_cycle() {
        let err = strata_of("exception(p(X), q(X)). exception(q(X), p(X)).").unwrap_err();
        assert_eq!(
            err,
            ReasonError::Unstratifiable {
                cycle: alloc::vec![String::from("p"), String::from("q")]
            }
        );
    }

    #[test]
    fn cycle_through_rule_and_exception() {
        let err = strata_of("p(X) <= q(X). exception(q(X), p(X)). q(\"a\").").unwrap_err();
        assert!(matches!(err, ReasonError::Unstratifiable { .. }));
        let err = strata_of("exception(p(X), p(X)).").unwrap_err();
        assert_eq!(
            err,
            ReasonError::Unstratifiable {
                cycle: alloc::vec![String::from("p")]
            }
        );
    }

    #[test]
    fn positive_recursion_is_fine() {
        let got = strata_of(
            "anc(X,Y) <= par(X,Y). anc(X,Z) <= par(X,Y), anc(Y,Z). \
             exception(heir(X), anc(X,X)). heir(X) <= par(X,Y).",
        )
        .unwrap();
        let map: BTreeMap<String, usize> = got.into_iter().collect();
        assert_eq!(map["anc"], 0);
        assert_eq!(map["heir"], 1);
    }

    #[test]
    fn chained_exceptions_climb() {
        let got =
            strata_of("a(X) <= b(X). exception(a(X), c(X)). c(X) <= d(X). exception(c(X), e(X)).")
                .unwrap();
        let map: BTreeMap<String, usize> = got.into_iter().collect();
        assert_eq!((map["e"], map["c"], map["a"]), (0, 1, 2));
    }
}
