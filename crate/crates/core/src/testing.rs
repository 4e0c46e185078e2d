//! Seeded generators of random stratified programs, for property tests
//! and the oracle comparison.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::lang::{Atom, ExceptionExpr, Program, Rule, Term};

/// Size bounds for [`random_program`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub predicates: usize,
    pub max_arity: usize,
    pub constants: usize,
    pub rules: usize,
    pub exceptions: usize,
    pub facts: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            predicates: 6,
            max_arity: 2,
            constants: 4,
            rules: 8,
            exceptions: 3,
            facts: 8,
        }
    }
}

const CONSTANTS: [&str; 6] = ["a", "b", "c", "d", "e", "f"];
const VARS: [&str; 3] = ["X", "Y", "Z"];

struct Sig {
    name: String,
    arity: usize,
    level: usize,
}

fn term<R: Rng>(rng: &mut R, consts: &[&str], var_pool: &[&str]) -> Term {
    if var_pool.is_empty() || rng.gen_bool(0.25) {
        Term::constant(*consts.choose(rng).expect("constants"))
    } else {
        Term::var(*var_pool.choose(rng).expect("vars"))
    }
}

fn atom<R: Rng>(rng: &mut R, sig: &Sig, consts: &[&str], var_pool: &[&str]) -> Atom {
    Atom::new(
        sig.name.clone(),
        (0..sig.arity)
            .map(|_| term(rng, consts, var_pool))
            .collect(),
    )
}

fn rename_term(t: &Term, map: &mut BTreeMap<String, String>) -> Term {
    match t {
        Term::Var(v) => {
            let next = VARS
                .get(map.len())
                .map_or_else(|| format!("V{}", map.len()), |s| String::from(*s));
            Term::Var(map.entry(v.clone()).or_insert(next).clone())
        }
        c => c.clone(),
    }
}

fn rename_atom(a: &Atom, map: &mut BTreeMap<String, String>) -> Atom {
    Atom::new(
        a.predicate.clone(),
        a.args.iter().map(|t| rename_term(t, map)).collect(),
    )
}

/// Renames variables in order of first appearance, body before head, so
/// rules equal up to renaming become syntactically equal.
fn canonical_rule(r: &Rule) -> Rule {
    let mut map = BTreeMap::new();
    let body: Vec<Atom> = r.body.iter().map(|a| rename_atom(a, &mut map)).collect();
    Rule {
        head: rename_atom(&r.head, &mut map),
        body,
    }
}

/// A random program that is stratified by construction (rule bodies never
/// sit above their head, exception conditions sit strictly below the
/// blocked predicate), together with random ground facts.
pub fn random_program<R: Rng>(rng: &mut R, limits: &Limits) -> (Program, Vec<Atom>) {
    let n_preds = rng.gen_range(1..=limits.predicates.max(1));
    let sigs: Vec<Sig> = (0..n_preds)
        .map(|i| Sig {
            name: format!("p{i}"),
            arity: rng.gen_range(0..=limits.max_arity),
            level: rng.gen_range(0..3),
        })
        .collect();
    let n_consts = rng.gen_range(1..=limits.constants.clamp(1, CONSTANTS.len()));
    let consts = &CONSTANTS[..n_consts];

    let mut program = Program::default();
    for _ in 0..rng.gen_range(0..=limits.rules) {
        let head_sig = sigs.choose(rng).expect("predicates");
        let below: Vec<&Sig> = sigs.iter().filter(|s| s.level <= head_sig.level).collect();
        let body: Vec<Atom> = (0..rng.gen_range(1..=3))
            .map(|_| {
                let sig = below.choose(rng).expect("head qualifies");
                atom(rng, sig, consts, &VARS)
            })
            .collect();
        let bound: Vec<&str> = {
            let set: BTreeSet<&str> = body.iter().flat_map(|a| a.variables()).collect();
            set.into_iter().collect()
        };
        let head = atom(rng, head_sig, consts, &bound);
        let rule = canonical_rule(&Rule { head, body });
        if !program.rules.contains(&rule) {
            program.rules.push(rule);
        }
    }
    for _ in 0..rng.gen_range(0..=limits.exceptions) {
        let blocked: Vec<&Sig> = sigs.iter().filter(|s| s.level > 0).collect();
        let Some(b) = blocked.choose(rng) else { break };
        let conds: Vec<&Sig> = sigs.iter().filter(|s| s.level < b.level).collect();
        let Some(c) = conds.choose(rng) else { break };
        program.exceptions.push(ExceptionExpr {
            blocked: atom(rng, b, consts, &VARS[..2]),
            condition: atom(rng, c, consts, &VARS),
        });
    }
    let mut facts: Vec<Atom> = Vec::new();
    for _ in 0..rng.gen_range(0..=limits.facts) {
        let sig = sigs.choose(rng).expect("predicates");
        let f = atom(rng, sig, consts, &[]);
        if !facts.contains(&f) {
            facts.push(f);
        }
    }
    (program, facts)
}

/// Every ground atom over the predicates (with their arities) and
/// constants occurring in `program` and `facts`.
pub fn herbrand_base(program: &Program, facts: &[Atom]) -> Vec<Atom> {
    let mut preds: BTreeMap<&str, usize> = BTreeMap::new();
    let mut consts: BTreeSet<String> = program.constants();
    let atoms = program
        .rules
        .iter()
        .flat_map(|r| core::iter::once(&r.head).chain(&r.body))
        .chain(
            program
                .exceptions
                .iter()
                .flat_map(|e| [&e.blocked, &e.condition]),
        )
        .chain(facts);
    for a in atoms {
        preds.insert(a.predicate.as_str(), a.args.len());
        consts.extend(a.constants().map(String::from));
    }
    let consts: Vec<String> = consts.into_iter().collect();
    let mut out = Vec::new();
    for (p, arity) in preds {
        let total = consts.len().pow(arity as u32);
        for mut code in 0..total {
            let mut args = Vec::with_capacity(arity);
            for _ in 0..arity {
                args.push(Term::Const(consts[code % consts.len()].clone()));
                code /= consts.len();
            }
            args.reverse();
            out.push(Atom::new(p, args));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reasoner::check_stratified;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_programs_are_stratified_and_range_restricted() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let (p, facts) = random_program(&mut rng, &Limits::default());
            assert!(check_stratified(&p).is_ok());
            assert!(p.rules.iter().all(Rule::is_range_restricted));
            assert!(facts.iter().all(Atom::is_ground));
            assert!(p.rules.len() <= 8 && p.exceptions.len() <= 3);
        }
    }

    #[test]
    fn herbrand_base_size() {
        let p = crate::lang::parse_program("q(X) <= p(X, \"b\"). r.").unwrap();
        let facts = [Atom::ground("p", ["a", "c"])];
        // constants a, b, c: p has 9 atoms, q 3, r 1
        assert_eq!(herbrand_base(&p, &facts).len(), 13);
    }
}
