use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{check_stratified, unify, Bindings, ProofNode, ReasonError, Verdict};
use crate::lang::{Atom, ExceptionExpr, Program, Rule, Term};

pub const DEFAULT_DEPTH_LIMIT: usize = 10_000;

// "no dependency on any goal still in progress"
const FREE: usize = usize::MAX;

/// Top-down prover over one program and one fact set.
///
/// Positive loops are cut by treating a goal still in progress as failed
/// for that branch. Proofs are memoized at once; failures that leaned on an
/// in-progress goal are kept aside until the head of their cycle reaches a
/// fixpoint.
pub struct Solver<'p> {
    program: &'p Program,
    facts: BTreeSet<Atom>,
    facts_by_pred: BTreeMap<String, Vec<Atom>>,
    rules_by_pred: BTreeMap<String, Vec<usize>>,
    exceptions_by_pred: BTreeMap<String, Vec<usize>>,
    universe: BTreeSet<String>,
    memo: BTreeMap<Atom, ProofNode>,
    // failures that assumed some in-progress goal fails, keyed to the
    // shallowest such goal's depth
    tentative: BTreeMap<Atom, (ProofNode, usize)>,
    proofs: usize,
    in_progress: BTreeMap<Atom, usize>,
    depth_limit: usize,
}

impl<'p> Solver<'p> {
    /// Fails when the program is not stratified or a fact is not ground.
    pub fn new(program: &'p Program, facts: &[Atom]) -> Result<Self, ReasonError> {
        check_stratified(program)?;
        if let Some(bad) = facts.iter().find(|f| !f.is_ground()) {
            return Err(ReasonError::NonGround(format!("{bad}")));
        }
        let facts: BTreeSet<Atom> = facts.iter().cloned().collect();
        let mut facts_by_pred: BTreeMap<String, Vec<Atom>> = BTreeMap::new();
        for f in &facts {
            facts_by_pred
                .entry(f.predicate.clone())
                .or_default()
                .push(f.clone());
        }
        let mut rules_by_pred: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, r) in program.rules.iter().enumerate() {
            rules_by_pred
                .entry(r.head.predicate.clone())
                .or_default()
                .push(i);
        }
        let mut exceptions_by_pred: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, e) in program.exceptions.iter().enumerate() {
            exceptions_by_pred
                .entry(e.blocked.predicate.clone())
                .or_default()
                .push(i);
        }
        let mut universe = program.constants();
        universe.extend(facts.iter().flat_map(|f| f.constants()).map(String::from));
        Ok(Solver {
            program,
            facts,
            facts_by_pred,
            rules_by_pred,
            exceptions_by_pred,
            universe,
            memo: BTreeMap::new(),
            tentative: BTreeMap::new(),
            proofs: 0,
            in_progress: BTreeMap::new(),
            depth_limit: DEFAULT_DEPTH_LIMIT,
        })
    }

    pub fn with_depth_limit(mut self, limit: usize) -> Self {
        self.depth_limit = limit;
        self
    }

    /// Proof tree for a ground goal.
    pub fn solve(&mut self, goal: &Atom) -> Result<ProofNode, ReasonError> {
        if !goal.is_ground() {
            return Err(ReasonError::NonGround(format!("{goal}")));
        }
        self.extend_universe(goal);
        self.solve_ground(goal, 0).map(|(node, _)| node)
    }

    /// Bindings of the goal's variables under which it is proved, ordered
    /// lexicographically by the bound constants (variables in order of
    /// first appearance).
    pub fn all_solutions(&mut self, goal: &Atom) -> Result<Vec<Bindings>, ReasonError> {
        self.extend_universe(goal);
        let vars: Vec<String> = goal.variables().into_iter().map(String::from).collect();
        let mut out = Vec::new();
        for b in self.groundings(&vars, &Bindings::new()) {
            let ground = b.apply(goal);
            if self.solve_ground(&ground, 0)?.0.is_proved() {
                out.push(b);
            }
        }
        Ok(out)
    }

    fn extend_universe(&mut self, goal: &Atom) {
        for c in goal.constants() {
            if !self.universe.contains(c) {
                self.universe.insert(String::from(c));
            }
        }
    }

    /// All extensions of `base` binding `vars` over the constant universe,
    /// in lexicographic order.
    fn groundings(&self, vars: &[String], base: &Bindings) -> Vec<Bindings> {
        let mut out = alloc::vec![base.clone()];
        for v in vars {
            if base.get(v).is_some() {
                continue;
            }
            let mut next = Vec::with_capacity(out.len() * self.universe.len());
            for b in &out {
                for c in &self.universe {
                    let mut b2 = b.clone();
                    b2.bind(v.clone(), c.clone());
                    next.push(b2);
                }
            }
            out = next;
        }
        out
    }

    fn solve_ground(
        &mut self,
        goal: &Atom,
        depth: usize,
    ) -> Result<(ProofNode, usize), ReasonError> {
        if let Some(node) = self.memo.get(goal) {
            return Ok((node.clone(), FREE));
        }
        if let Some((node, d)) = self.tentative.get(goal) {
            return Ok((node.clone(), *d));
        }
        if let Some(&d) = self.in_progress.get(goal) {
            return Ok((ProofNode::failed(goal.clone()), d));
        }
        if depth >= self.depth_limit {
            return Err(ReasonError::DepthLimitExceeded {
                limit: self.depth_limit,
            });
        }
        self.in_progress.insert(goal.clone(), depth);
        let result = self.evaluate_to_fixpoint(goal, depth);
        self.in_progress.remove(goal);
        let (node, low) = result?;
        if low < depth {
            for (_, d) in self.tentative.values_mut() {
                if *d >= depth {
                    *d = low;
                }
            }
        }
        if node.is_proved() {
            self.proofs += 1;
            self.memo.insert(goal.clone(), node.clone());
            Ok((node, FREE))
        } else if low >= depth {
            self.memo.insert(goal.clone(), node.clone());
            Ok((node, FREE))
        } else {
            self.tentative.insert(goal.clone(), (node.clone(), low));
            Ok((node, low))
        }
    }

    /// Evaluates `goal`; when it heads a positive cycle, re-evaluates until
    /// no new proofs appear, then settles the failures found inside it.
    /// Exceptions never sit on such a cycle, so the cycle is monotone.
    fn evaluate_to_fixpoint(
        &mut self,
        goal: &Atom,
        depth: usize,
    ) -> Result<(ProofNode, usize), ReasonError> {
        loop {
            let before = self.proofs;
            let (node, low) = self.evaluate(goal, depth)?;
            if low < depth {
                return Ok((node, low));
            }
            let inner: Vec<Atom> = self
                .tentative
                .iter()
                .filter(|(_, (_, d))| *d >= depth)
                .map(|(a, _)| a.clone())
                .collect();
            let settled = self.proofs == before && !node.is_proved();
            for a in inner {
                if let Some((n, _)) = self.tentative.remove(&a) {
                    if settled {
                        self.memo.insert(a, n);
                    }
                }
            }
            if settled || node.is_proved() {
                return Ok((node, FREE));
            }
        }
    }

    fn evaluate(&mut self, goal: &Atom, depth: usize) -> Result<(ProofNode, usize), ReasonError> {
        let mut low = FREE;
        let mut failures: Vec<ProofNode> = Vec::new();
        let mut success: Option<(Rule, Vec<ProofNode>)> = None;

        if self.facts.contains(goal) {
            success = Some((Rule::fact(goal.clone()), Vec::new()));
        } else {
            let program = self.program;
            let candidates = self
                .rules_by_pred
                .get(&goal.predicate)
                .cloned()
                .unwrap_or_default();
            for idx in candidates {
                let rule = &program.rules[idx];
                let Some(b) = unify(&rule.head, goal, &Bindings::new()) else {
                    continue;
                };
                if let Some((b, children)) =
                    self.prove_body(&rule.body, b, depth, &mut low, &mut failures)?
                {
                    let instance = Rule {
                        head: goal.clone(),
                        body: rule.body.iter().map(|a| b.apply(a)).collect(),
                    };
                    success = Some((instance, children));
                    break;
                }
            }
        }

        let Some((rule, children)) = success else {
            let mut seen = BTreeSet::new();
            failures.retain(|n| seen.insert(n.goal.clone()));
            let mut node = ProofNode::failed(goal.clone());
            node.body_children = failures;
            return Ok((node, low));
        };

        let mut checks = Vec::new();
        let mut fired = false;
        let exc_ids = self
            .exceptions_by_pred
            .get(&goal.predicate)
            .cloned()
            .unwrap_or_default();
        for idx in exc_ids {
            let exc = &self.program.exceptions[idx];
            let Some(b) = unify(&exc.blocked, goal, &Bindings::new()) else {
                continue;
            };
            let condition = b.apply(&exc.condition);
            let (mut child, l) = self.check_condition(&condition, depth)?;
            low = low.min(l);
            child.exception = Some(ExceptionExpr {
                blocked: goal.clone(),
                condition: child.goal.clone(),
            });
            fired = child.is_proved();
            checks.push(child);
            if fired {
                break;
            }
        }
        Ok((
            ProofNode {
                goal: goal.clone(),
                result: if fired {
                    Verdict::Failed
                } else {
                    Verdict::Proved
                },
                rule_used: Some(rule),
                body_children: children,
                exception_children: checks,
                exception: None,
            },
            low,
        ))
    }

    fn check_condition(
        &mut self,
        condition: &Atom,
        depth: usize,
    ) -> Result<(ProofNode, usize), ReasonError> {
        if condition.is_ground() {
            return self.solve_ground(condition, depth + 1);
        }
        let mut low = FREE;
        let mut found = self.provable_instances(condition, &Bindings::new(), depth, &mut low)?;
        if found.is_empty() {
            Ok((ProofNode::failed(condition.clone()), low))
        } else {
            Ok((found.swap_remove(0).1, low))
        }
    }

    /// Depth-first search for the first proof of `body` under `bindings`.
    /// Failing body goals are appended to `failures`.
    fn prove_body(
        &mut self,
        body: &[Atom],
        bindings: Bindings,
        depth: usize,
        low: &mut usize,
        failures: &mut Vec<ProofNode>,
    ) -> Result<Option<(Bindings, Vec<ProofNode>)>, ReasonError> {
        let Some((first, rest)) = body.split_first() else {
            return Ok(Some((bindings, Vec::new())));
        };
        let atom = bindings.apply(first);
        if atom.is_ground() {
            let (node, l) = self.solve_ground(&atom, depth + 1)?;
            *low = (*low).min(l);
            if !node.is_proved() {
                failures.push(node);
                return Ok(None);
            }
            return Ok(self.prove_body(rest, bindings, depth, low, failures)?.map(
                |(b, mut kids)| {
                    kids.insert(0, node);
                    (b, kids)
                },
            ));
        }
        let instances = self.provable_instances(&atom, &bindings, depth, low)?;
        if instances.is_empty() {
            failures.push(ProofNode::failed(atom));
            return Ok(None);
        }
        for (b, node) in instances {
            if let Some((b, mut kids)) = self.prove_body(rest, b, depth, low, failures)? {
                kids.insert(0, node);
                return Ok(Some((b, kids)));
            }
        }
        Ok(None)
    }

    /// Proved ground instances of a partially bound pattern, with the
    /// bindings extended to cover the pattern, in lexicographic order.
    fn provable_instances(
        &mut self,
        pattern: &Atom,
        bindings: &Bindings,
        depth: usize,
        low: &mut usize,
    ) -> Result<Vec<(Bindings, ProofNode)>, ReasonError> {
        let vars: Vec<String> = pattern.variables().into_iter().map(String::from).collect();
        let key = |b: &Bindings| -> Vec<String> {
            vars.iter()
                .map(|v| String::from(b.get(v).unwrap_or("")))
                .collect()
        };
        let derived = self.rules_by_pred.contains_key(&pattern.predicate);
        let guarded = self.exceptions_by_pred.contains_key(&pattern.predicate);
        let mut out = Vec::new();

        if !derived {
            // Only input facts can conclude this predicate.
            let matches: Vec<(Bindings, Atom)> = self
                .facts_by_pred
                .get(&pattern.predicate)
                .map(|fs| {
                    fs.iter()
                        .filter_map(|f| unify(pattern, f, bindings).map(|b| (b, f.clone())))
                        .collect()
                })
                .unwrap_or_default();
            for (b, fact) in matches {
                if guarded {
                    let (node, l) = self.solve_ground(&fact, depth + 1)?;
                    *low = (*low).min(l);
                    if node.is_proved() {
                        out.push((b, node));
                    }
                } else {
                    out.push((
                        b,
                        ProofNode {
                            goal: fact.clone(),
                            result: Verdict::Proved,
                            rule_used: Some(Rule::fact(fact)),
                            body_children: Vec::new(),
                            exception_children: Vec::new(),
                            exception: None,
                        },
                    ));
                }
            }
            out.sort_by_key(|(b, _)| key(b));
            return Ok(out);
        }

        let local: Bindings = bindings
            .iter()
            .filter(|(v, _)| vars.iter().any(|x| x == v))
            .collect();
        for g in self.groundings(&vars, &local) {
            let ground = g.apply(pattern);
            if !ground.args.iter().all(|t| matches!(t, Term::Const(_))) {
                continue;
            }
            let (node, l) = self.solve_ground(&ground, depth + 1)?;
            *low = (*low).min(l);
            if node.is_proved() {
                if let Some(b) = unify(pattern, &ground, bindings) {
                    out.push((b, node));
                }
            }
        }
        Ok(out)
    }
}

/// Proof tree for a ground goal against a program plus input facts.
pub fn solve(program: &Program, facts: &[Atom], goal: &Atom) -> Result<ProofNode, ReasonError> {
    Solver::new(program, facts)?.solve(goal)
}

/// All bindings of `goal`'s variables for which the instantiated goal is
/// proved. A provable ground goal yields one empty binding.
pub fn all_solutions(
    program: &Program,
    facts: &[Atom],
    goal: &Atom,
) -> Result<Vec<Bindings>, ReasonError> {
    Solver::new(program, facts)?.all_solutions(goal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse_atom, parse_program};
    use crate::reasoner::check_proof_invariants;

    fn atom(s: &str) -> Atom {
        parse_atom(s).unwrap()
    }

    fn atoms(items: &[&str]) -> Vec<Atom> {
        items.iter().map(|s| atom(s)).collect()
    }

    #[test]
    fn program_fact_is_proved() {
        let p = parse_program("p(\"a\").").unwrap();
        let node = solve(&p, &[], &atom("p(\"a\")")).unwrap();
        assert_eq!(node.result, Verdict::Proved);
        assert_eq!(node.rule_used, Some(Rule::fact(atom("p(\"a\")"))));
        assert!(check_proof_invariants(&node).is_empty());
    }

    #[test]
    fn exception_defeats_goal() {
        let p = parse_program("q(X) <= p(X). exception(q(X), r(X)).").unwrap();
        let node = solve(&p, &atoms(&["p(\"a\")", "r(\"a\")"]), &atom("q(\"a\")")).unwrap();
        assert_eq!(node.result, Verdict::Failed);
        assert_eq!(node.exception_children.len(), 1);
        assert!(node.exception_children[0].is_proved());
        assert_eq!(node.exception_children[0].goal, atom("r(\"a\")"));
        assert!(check_proof_invariants(&node).is_empty());

        let node = solve(&p, &atoms(&["p(\"a\")"]), &atom("q(\"a\")")).unwrap();
        assert_eq!(node.result, Verdict::Proved);
        assert_eq!(node.exception_children.len(), 1);
        assert!(!node.exception_children[0].is_proved());
    }

    #[test]
    fn all_solutions_enumerates_in_order() {
        let p = parse_program("p(\"b\"). p(\"a\").").unwrap();
        let sols = all_solutions(&p, &[], &atom("p(X)")).unwrap();
        let want: Vec<Bindings> = alloc::vec![
            [("X", "a")].into_iter().collect(),
            [("X", "b")].into_iter().collect(),
        ];
        assert_eq!(sols, want);
        assert_eq!(
            all_solutions(&p, &[], &atom("p(\"a\")")).unwrap(),
            alloc::vec![Bindings::new()]
        );
        assert!(all_solutions(&p, &[], &atom("p(\"z\")"))
            .unwrap()
            .is_empty());
    }

    #[test]
    fn all_solutions_skips_blocked_instances() {
        let p = parse_program("q(X) <= p(X). exception(q(X), r(X)).").unwrap();
        let facts = atoms(&["p(\"a\")", "p(\"b\")", "r(\"a\")"]);
        let sols = all_solutions(&p, &facts, &atom("q(X)")).unwrap();
        assert_eq!(
            sols,
            alloc::vec![[("X", "b")].into_iter().collect::<Bindings>()]
        );
    }

    #[test]
    fn existential_exception_condition() {
        let p = parse_program("q(X) <= p(X). exception(q(X), holds(X, Y)).").unwrap();
        let node = solve(
            &p,
            &atoms(&["p(\"a\")", "holds(\"a\",\"z\")"]),
            &atom("q(\"a\")"),
        )
        .unwrap();
        assert_eq!(node.result, Verdict::Failed);
        assert_eq!(node.exception_children[0].goal, atom("holds(\"a\",\"z\")"));
        let node = solve(
            &p,
            &atoms(&["p(\"a\")", "holds(\"b\",\"z\")"]),
            &atom("q(\"a\")"),
        )
        .unwrap();
        assert_eq!(node.result, Verdict::Proved);
        assert_eq!(node.exception_children[0].goal, atom("holds(\"a\",Y)"));
    }

    #[test]
    fn positive_loops_terminate() {
        let p = parse_program("anc(X,Y) <= par(X,Y). anc(X,Z) <= par(X,Y), anc(Y,Z).").unwrap();
        let facts = atoms(&["par(\"a\",\"b\")", "par(\"b\",\"a\")", "par(\"b\",\"c\")"]);
        let mut solver = Solver::new(&p, &facts).unwrap();
        assert!(solver.solve(&atom("anc(\"a\",\"c\")")).unwrap().is_proved());
        assert!(solver.solve(&atom("anc(\"a\",\"a\")")).unwrap().is_proved());
        assert!(!solver.solve(&atom("anc(\"c\",\"a\")")).unwrap().is_proved());
        let sols = solver.all_solutions(&atom("anc(\"c\",X)")).unwrap();
        assert!(sols.is_empty());
    }

    #[test]
    fn loop_cut_results_are_not_cached_wrongly() {
        // b depends on a; a is provable through its second rule.
        let p = parse_program("a <= b. a <= c. b <= a. c.").unwrap();
        let mut solver = Solver::new(&p, &[]).unwrap();
        assert!(solver.solve(&atom("a")).unwrap().is_proved());
        assert!(solver.solve(&atom("b")).unwrap().is_proved());
    }

    #[test]
    fn failed_goal_lists_failing_body_goals() {
        let p = parse_program("q(X) <= p(X), s(X). q(X) <= t(X).").unwrap();
        let node = solve(&p, &atoms(&["p(\"a\")"]), &atom("q(\"a\")")).unwrap();
        assert_eq!(node.result, Verdict::Failed);
        let goals: Vec<Atom> = node.body_children.iter().map(|c| c.goal.clone()).collect();
        assert_eq!(goals, atoms(&["s(\"a\")", "t(\"a\")"]));
        assert!(check_proof_invariants(&node).is_empty());
    }

    #[test]
    fn errors() {
        let p = parse_program("exception(p(X), q(X)). exception(q(X), p(X)).").unwrap();
        assert!(matches!(
            solve(&p, &[], &atom("p(\"a\")")),
            Err(ReasonError::Unstratifiable { .. })
        ));
        let p = parse_program("p(\"a\").").unwrap();
        assert!(matches!(
            solve(&p, &[], &atom("p(X)")),
            Err(ReasonError::NonGround(_))
        ));
        let chain = parse_program("a <= b. b <= c. c <= d. d.").unwrap();
        let err = Solver::new(&chain, &[])
            .unwrap()
            .with_depth_limit(2)
            .solve(&atom("a"))
            .unwrap_err();
        assert_eq!(err, ReasonError::DepthLimitExceeded { limit: 2 });
    }

    #[test]
    fn identical_inputs_give_identical_trees() {
        let p = parse_program("q(X) <= p(X, Y). q(X) <= s(X). exception(q(X), r(X)).").unwrap();
        let facts = atoms(&["p(\"a\",\"c\")", "p(\"a\",\"b\")", "s(\"a\")"]);
        let one = solve(&p, &facts, &atom("q(\"a\")")).unwrap();
        let two = solve(&p, &facts, &atom("q(\"a\")")).unwrap();
        assert_eq!(one, two);
        // first rule, lexicographically first witness
        assert_eq!(one.body_children[0].goal, atom("p(\"a\",\"b\")"));
    }

    #[test]
    fn shared_solver_matches_fixpoint_on_cycles() {
        let p = parse_program(
            r#"p1("b","b") <= p1(X,Y), p1(Z,Y).
p0(X) <= p0("a"), p0(X).
p1(Y,Y) <= p1(X,X), p1(X,Y).
p1(Y,X) <= p1(X,Y).
p0(X) <= p0(X), p0(X), p1(Y,Y).
exception(p0(Y), p1(Y,"b")).
"#,
        )
        .unwrap();
        let f = atoms(&[r#"p0("a")"#, r#"p0("b")"#, r#"p1("b","a")"#]);
        let model = crate::reasoner::stratified_model(&p, &f).unwrap();
        let mut s = Solver::new(&p, &f).unwrap();
        for a in crate::testing::herbrand_base(&p, &f) {
            assert_eq!(s.solve(&a).unwrap().is_proved(), model.contains(&a), "{a}");
        }
    }
}
