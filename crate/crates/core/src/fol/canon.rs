//! Cube canonicalization: deterministic literal ordering, duplicate removal
//! and a bound-variable renaming that is invariant under alpha-conversion.

use super::{Atom, Cube, Literal, SortId, Term, VarId};
use std::collections::BTreeMap;

/// Shape of a literal with variables abstracted away; used to order literals
/// before any variable numbering exists.
fn shape_key(lit: &Literal) -> (u8, u32, Vec<(u8, u32)>, bool) {
    let term_key = |t: &Term| match t {
        Term::Const(c) => (0u8, c.0),
        Term::Var(_) => (1u8, 0),
    };
    match &lit.atom {
        Atom::Pred { pred, args } => (0, pred.0, args.iter().map(term_key).collect(), !lit.positive),
        Atom::Eq(a, b) => {
            let mut ks = vec![term_key(a), term_key(b)];
            ks.sort();
            (1, 0, ks, !lit.positive)
        }
    }
}

fn full_key(lit: &Literal) -> (u8, u32, Vec<(u8, u32)>, bool) {
    let term_key = |t: &Term| match t {
        Term::Const(c) => (0u8, c.0),
        Term::Var(v) => (1u8, v.0),
    };
    match &lit.atom {
        Atom::Pred { pred, args } => (0, pred.0, args.iter().map(term_key).collect(), !lit.positive),
        Atom::Eq(a, b) => {
            let mut ks = vec![term_key(a), term_key(b)];
            ks.sort();
            (1, 0, ks, !lit.positive)
        }
    }
}

/// Orient equalities so the smaller term key comes first; drop nothing.
fn orient(lit: &Literal) -> Literal {
    match &lit.atom {
        Atom::Eq(a, b) => {
            let key = |t: &Term| match t {
                Term::Const(c) => (0u8, c.0),
                Term::Var(v) => (1u8, v.0),
            };
            if key(b) < key(a) {
                Literal { positive: lit.positive, atom: Atom::Eq(*b, *a) }
            } else {
                lit.clone()
            }
        }
        _ => lit.clone(),
    }
}

/// Renumber variables per sort in first-occurrence order over the given
/// literal sequence. Unused variables are dropped.
fn renumber(cube_vars: &[SortId], lits: &[Literal]) -> (Vec<SortId>, Vec<Literal>, BTreeMap<VarId, VarId>) {
    let mut map: BTreeMap<VarId, VarId> = BTreeMap::new();
    let mut new_vars: Vec<SortId> = Vec::new();
    for lit in lits {
        for t in lit.atom.terms() {
            if let Term::Var(v) = t {
                map.entry(v).or_insert_with(|| {
                    new_vars.push(cube_vars[v.0 as usize]);
                    VarId(new_vars.len() as u32 - 1)
                });
            }
        }
    }
    let new_lits = lits
        .iter()
        .map(|l| orient(&l.map_terms(&mut |t| match t {
            Term::Var(v) => Term::Var(map[&v]),
            c => c,
        })))
        .collect();
    (new_vars, new_lits, map)
}

/// Canonical form of a cube: syntactically equal canonical cubes are
/// alpha-equivalent, and alpha-variants canonicalize identically.
pub fn canonicalize(cube: &Cube) -> Cube {
    let mut lits: Vec<Literal> = cube.lits.iter().map(orient).collect();
    lits.sort_by_key(shape_key);
    lits.dedup();

    let mut vars = cube.vars.clone();
    // Iterate numbering and sorting to a fixpoint; the literal multiset is
    // stable under alpha-conversion, so the fixpoint is too whenever the
    // refinement separates all variables.
    for _ in 0..4 {
        let (nv, mut nl, _) = renumber(&vars, &lits);
        nl.sort_by_key(full_key);
        nl.dedup();
        if nv == vars && nl == lits {
            return Cube { vars, lits };
        }
        vars = nv;
        lits = nl;
    }

    // Rare symmetric leftovers: pick the least form over all variable
    // permutations when that is feasible.
    if vars.len() <= 7 {
        let n = vars.len();
        let mut best: Option<(Vec<SortId>, Vec<Literal>)> = None;
        let mut perm: Vec<u32> = (0..n as u32).collect();
        permute(&mut perm, 0, &mut |p| {
            // Only sort-preserving permutations are admissible.
            if p.iter().enumerate().any(|(i, &j)| vars[i] != vars[j as usize]) {
                return;
            }
            let mut cand: Vec<Literal> = lits
                .iter()
                .map(|l| orient(&l.map_terms(&mut |t| match t {
                    Term::Var(v) => Term::Var(VarId(p[v.0 as usize])),
                    c => c,
                })))
                .collect();
            cand.sort_by_key(full_key);
            cand.dedup();
            let keyed: Vec<_> = cand.iter().map(full_key).collect();
            let better = match &best {
                None => true,
                Some((_, b)) => keyed < b.iter().map(full_key).collect::<Vec<_>>(),
            };
            if better {
                let (nv, nl, _) = renumber(&vars, &cand);
                best = Some((nv, nl));
            }
        });
        if let Some((vars, lits)) = best {
            return Cube { vars, lits };
        }
    }
    Cube { vars, lits }
}

fn permute(items: &mut Vec<u32>, k: usize, f: &mut impl FnMut(&[u32])) {
    if k == items.len() {
        f(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, f);
        items.swap(k, i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fol::{Signature, ROLE, USER};

    fn ua_lit(sig: &Signature, u: Term, r: Term, positive: bool) -> Literal {
        Literal { positive, atom: Atom::Pred { pred: sig.ua(), args: vec![u, r] } }
    }

    #[test]
    fn duplicate_literals_collapse() {
        let sig = Signature::arbac();
        let mut cube = Cube::top();
        let u = cube.push_var(USER);
        let r = cube.push_var(ROLE);
        let l = ua_lit(&sig, Term::Var(u), Term::Var(r), true);
        cube.lits = vec![l.clone(), l];
        let c = canonicalize(&cube);
        assert_eq!(c.lits.len(), 1);
    }

    #[test]
    fn alpha_variants_share_canonical_form() {
        let sig = Signature::arbac();
        let a = sig.clone();
        let mut c1 = Cube { vars: vec![USER, ROLE, ROLE], lits: vec![] };
        c1.lits.push(ua_lit(&a, Term::Var(VarId(0)), Term::Var(VarId(1)), true));
        c1.lits.push(ua_lit(&a, Term::Var(VarId(0)), Term::Var(VarId(2)), false));

        // Same cube with the two role variables swapped and literals reordered.
        let mut c2 = Cube { vars: vec![USER, ROLE, ROLE], lits: vec![] };
        c2.lits.push(ua_lit(&a, Term::Var(VarId(0)), Term::Var(VarId(1)), false));
        c2.lits.push(ua_lit(&a, Term::Var(VarId(0)), Term::Var(VarId(2)), true));

        assert_eq!(canonicalize(&c1), canonicalize(&c2));
    }

    #[test]
    fn literal_order_is_irrelevant() {
        let mut sig = Signature::arbac();
        let alice = sig.add_const("Alice", USER).unwrap();
        let mgr = sig.add_const("Manager", ROLE).unwrap();
        let mut c1 = Cube { vars: vec![USER, ROLE], lits: vec![] };
        c1.lits.push(ua_lit(&sig, Term::Var(VarId(0)), Term::Var(VarId(1)), true));
        c1.lits.push(Literal::pos(Atom::Eq(Term::Var(VarId(0)), Term::Const(alice))));
        c1.lits.push(Literal::pos(Atom::Eq(Term::Var(VarId(1)), Term::Const(mgr))));
        let mut c2 = Cube { vars: c1.vars.clone(), lits: c1.lits.clone() };
        c2.lits.reverse();
        assert_eq!(canonicalize(&c1), canonicalize(&c2));
    }

    #[test]
    fn canonicalize_is_idempotent() {
        let sig = Signature::arbac();
        let mut cube = Cube { vars: vec![ROLE, ROLE, USER], lits: vec![] };
        cube.lits.push(ua_lit(&sig, Term::Var(VarId(2)), Term::Var(VarId(0)), true));
        cube.lits.push(Literal::pos(Atom::Pred {
            pred: sig.senior(),
            args: vec![Term::Var(VarId(0)), Term::Var(VarId(1))],
        }));
        let once = canonicalize(&cube);
        let twice = canonicalize(&once);
        assert_eq!(once, twice);
    }

    #[test]
    fn unused_variables_are_dropped() {
        let sig = Signature::arbac();
        let mut cube = Cube { vars: vec![USER, ROLE, USER], lits: vec![] };
        cube.lits.push(ua_lit(&sig, Term::Var(VarId(0)), Term::Var(VarId(1)), true));
        let c = canonicalize(&cube);
        assert_eq!(c.vars.len(), 2);
    }
}
