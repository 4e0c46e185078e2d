//! Bottom-up stratified fixpoint, kept independent of the top-down prover.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use super::{check_stratified, unify, Bindings, ReasonError, Verdict};
use crate::lang::{Atom, Program};

/// Every body match of `body` against `model`, extending `bindings`.
fn matches(body: &[Atom], model: &BTreeSet<Atom>, bindings: Bindings, out: &mut Vec<Bindings>) {
    let Some((first, rest)) = body.split_first() else {
        out.push(bindings);
        return;
    };
    for candidate in model.iter().filter(|a| a.predicate == first.predicate) {
        if let Some(b) = unify(first, candidate, &bindings) {
            matches(rest, model, b, out);
        }
    }
}

fn is_blocked(program: &Program, atom: &Atom, model: &BTreeSet<Atom>) -> bool {
    program.exceptions.iter().any(|e| {
        unify(&e.blocked, atom, &Bindings::new())
            .is_some_and(|b| model.iter().any(|m| unify(&e.condition, m, &b).is_some()))
    })
}

/// The stratified model of `program` plus `facts`: for each stratum in
/// turn, Horn closure where an atom is only admitted when no exception
/// condition for it holds in the already-final lower strata.
pub fn stratified_model(program: &Program, facts: &[Atom]) -> Result<BTreeSet<Atom>, ReasonError> {
    let strata = check_stratified(program)?;
    if let Some(bad) = facts.iter().find(|f| !f.is_ground()) {
        return Err(ReasonError::NonGround(format!("{bad}")));
    }
    let mut model: BTreeSet<Atom> = BTreeSet::new();
    for level in 0..=strata.max() {
        loop {
            let mut fresh: Vec<Atom> = Vec::new();
            for f in facts.iter().filter(|f| strata.get(&f.predicate) == level) {
                if !model.contains(f) {
                    fresh.push(f.clone());
                }
            }
            for rule in program
                .rules
                .iter()
                .filter(|r| strata.get(&r.head.predicate) == level)
            {
                let mut found = Vec::new();
                matches(&rule.body, &model, Bindings::new(), &mut found);
                for b in found {
                    let head = b.apply(&rule.head);
                    if head.is_ground() && !model.contains(&head) {
                        fresh.push(head);
                    }
                }
            }
            let before = model.len();
            for atom in fresh {
                if !is_blocked(program, &atom, &model) {
                    model.insert(atom);
                }
            }
            if model.len() == before {
                break;
            }
        }
    }
    Ok(model)
}

/// Membership of `goal` in the stratified model.
pub fn brute_force_entails(
    program: &Program,
    facts: &[Atom],
    goal: &Atom,
) -> Result<Verdict, ReasonError> {
    if !goal.is_ground() {
        return Err(ReasonError::NonGround(format!("{goal}")));
    }
    let model = stratified_model(program, facts)?;
    Ok(if model.contains(goal) {
        Verdict::Proved
    } else {
        Verdict::Failed
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse_atom, parse_program};

    fn atom(s: &str) -> Atom {
        parse_atom(s).unwrap()
    }

    #[test]
    fn empty_program_fails() {
        let p = Program::default();
        assert_eq!(
            brute_force_entails(&p, &[], &atom("p(\"a\")")).unwrap(),
            Verdict::Failed
        );
    }

    #[test]
    fn input_fact_holds() {
        let p = Program::default();
        let facts = [atom("p(\"a\")")];
        assert_eq!(
            brute_force_entails(&p, &facts, &atom("p(\"a\")")).unwrap(),
            Verdict::Proved
        );
    }

    #[test]
    fn exception_removes_conclusion() {
        let p = parse_program("q(X) <= p(X). exception(q(X), r(X)).").unwrap();
        let facts = [atom("p(\"a\")"), atom("r(\"a\")"), atom("p(\"b\")")];
        let model = stratified_model(&p, &facts).unwrap();
        assert!(!model.contains(&atom("q(\"a\")")));
        assert!(model.contains(&atom("q(\"b\")")));
    }

    #[test]
    fn chained_exceptions() {
        // r blocks q, s blocks r: q survives because r is defeated.
        let p = parse_program(
            "q(X) <= p(X). exception(q(X), r(X)). r(X) <= t(X). exception(r(X), s(X)).",
        )
        .unwrap();
        let facts = [atom("p(\"a\")"), atom("t(\"a\")"), atom("s(\"a\")")];
        assert_eq!(
            brute_force_entails(&p, &facts, &atom("q(\"a\")")).unwrap(),
            Verdict::Proved
        );
    }
}
