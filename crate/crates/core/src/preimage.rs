//! Effective pre-image computation for assignment and revocation rules, and
//! simplification of the resulting existential formulae.
//!
//! The functional update ua' = ua (+/-) (subject, role) is eliminated by
//! literal-level case analysis on each post-state occurrence of ua: no
//! lambda objects are ever materialized, and the case split touches only
//! the occurrences actually present.

use crate::fol::canon::canonicalize;
use crate::fol::{
    Atom, ConstId, Cube, ExistsFormula, Literal, Signature, SortId, Term, UniversalTheory, VarId,
};
use crate::policy::{RuleKind, TransitionRule};

/// The update half of a transition: which pair flips, and in which direction.
#[derive(Clone, Debug, PartialEq)]
pub struct UpdateDescriptor {
    pub add: bool,
    pub subject: Term,
    pub role: Term,
}

impl UpdateDescriptor {
    pub fn of(rule: &TransitionRule) -> UpdateDescriptor {
        UpdateDescriptor {
            add: rule.kind == RuleKind::Assign,
            subject: Term::Var(rule.subject),
            role: rule.target_role,
        }
    }
}

/// States with a `rule` successor satisfying `k`. The result is a proper
/// existential formula again: guards conjoin, each post-state ua literal
/// splits by case analysis, contradictory cubes drop out, and the rest is
/// canonicalized.
pub fn pre_image(
    sig: &Signature,
    rule: &TransitionRule,
    k: &ExistsFormula,
    theory: &UniversalTheory,
) -> ExistsFormula {
    let ua = sig.ua();
    let update = UpdateDescriptor::of(rule);
    let mut out = Vec::new();

    for cube in &k.cubes {
        let offset = rule.guard.vars.len() as u32;
        let mut vars = rule.guard.vars.clone();
        vars.extend(cube.vars.iter().copied());
        let shift = |t: Term| match t {
            Term::Var(v) => Term::Var(VarId(v.0 + offset)),
            c => c,
        };

        // Branch sets per literal of the post-state cube.
        let mut branch_sets: Vec<Vec<Vec<Literal>>> = Vec::new();
        for lit in &cube.lits {
            let lit = lit.map_terms(&mut |t| shift(t));
            let branches = match &lit.atom {
                Atom::Pred { pred, args } if *pred == ua => {
                    let (a, b) = (args[0], args[1]);
                    let eq = |x: Term, y: Term| Literal::pos(Atom::Eq(x, y));
                    let neq = |x: Term, y: Term| Literal::neg(Atom::Eq(x, y));
                    match (update.add, lit.positive) {
                        // ua'(a,b) with ua' = ua + (s,t): (a=s and b=t) or ua(a,b)
                        (true, true) => vec![
                            vec![eq(a, update.subject), eq(b, update.role)],
                            vec![lit.clone()],
                        ],
                        // not ua'(a,b): (a!=s or b!=t) and not ua(a,b)
                        (true, false) => vec![
                            vec![neq(a, update.subject), lit.clone()],
                            vec![neq(b, update.role), lit.clone()],
                        ],
                        // ua'(a,b) with ua' = ua - (s,t): (a!=s or b!=t) and ua(a,b)
                        (false, true) => vec![
                            vec![neq(a, update.subject), lit.clone()],
                            vec![neq(b, update.role), lit.clone()],
                        ],
                        // not ua'(a,b): (a=s and b=t) or not ua(a,b)
                        (false, false) => vec![
                            vec![eq(a, update.subject), eq(b, update.role)],
                            vec![lit.clone()],
                        ],
                    }
                }
                _ => vec![vec![lit.clone()]],
            };
            branch_sets.push(branches);
        }

        // Distribute to disjunctive normal form.
        let mut choices: Vec<Vec<Literal>> = vec![rule.guard.lits.clone()];
        for branches in &branch_sets {
            let mut next = Vec::with_capacity(choices.len() * branches.len());
            for base in &choices {
                for branch in branches {
                    let mut lits = base.clone();
                    lits.extend(branch.iter().cloned());
                    next.push(lits);
                }
            }
            choices = next;
        }

        for lits in choices {
            let candidate = Cube { vars: vars.clone(), lits };
            if let Some(c) = drop_if_contradictory(sig, &candidate, theory) {
                out.push(canonicalize(&c));
            }
        }
    }

    ExistsFormula { cubes: out }
}

/// Immediate syntactic contradiction test applied to freshly split cubes:
/// equations between distinct scalar values and literal clashes kill a cube
/// before canonicalization.
fn drop_if_contradictory(sig: &Signature, cube: &Cube, theory: &UniversalTheory) -> Option<Cube> {
    let mut seen: std::collections::BTreeSet<(bool, &Atom)> = std::collections::BTreeSet::new();
    for lit in &cube.lits {
        if seen.contains(&(!lit.positive, &lit.atom)) {
            return None;
        }
        seen.insert((lit.positive, &lit.atom));
        if let Atom::Eq(ta, tb) = &lit.atom {
            if ta == tb && !lit.positive {
                return None;
            }
            if let (Term::Const(a), Term::Const(b)) = (ta, tb) {
                if a != b && lit.positive {
                    let sort = sig.const_sort(*a);
                    let distinct = theory
                        .sv_values(sort)
                        .map(|vs| vs.contains(a) && vs.contains(b))
                        .unwrap_or(false);
                    if distinct {
                        return None;
                    }
                }
            }
        }
    }
    Some(cube.clone())
}

/// Per-rule pre-images of `k`, tagged with their source rule. The formula is
/// the concatenated disjunction in rule order.
pub struct PreImage {
    pub formula: ExistsFormula,
    /// sources[i] is the index of the rule that produced formula.cubes[i].
    pub sources: Vec<usize>,
}

pub fn pre_image_all(
    sig: &Signature,
    rules: &[TransitionRule],
    k: &ExistsFormula,
    theory: &UniversalTheory,
) -> PreImage {
    let mut formula = ExistsFormula::bottom();
    let mut sources = Vec::new();
    for (i, rule) in rules.iter().enumerate() {
        let pre = simplify(sig, &pre_image(sig, rule, k, theory), theory);
        sources.extend(std::iter::repeat_n(i, pre.cubes.len()));
        formula.cubes.extend(pre.cubes);
    }
    let before: Vec<(Cube, usize)> = formula.cubes.into_iter().zip(sources).collect();
    // Deduplicate across rules, keeping the first occurrence.
    let mut seen = std::collections::BTreeSet::new();
    let mut cubes = Vec::new();
    let mut srcs = Vec::new();
    for (c, s) in before {
        let key = format!("{c:?}");
        if seen.insert(key) {
            cubes.push(c);
            srcs.push(s);
        }
    }
    PreImage { formula: ExistsFormula { cubes }, sources: srcs }
}

/// Simplify modulo the theory: equality propagation, scalar-value pruning,
/// hierarchy-literal saturation, duplicate and subsumed cube removal. Model
/// sets are preserved and the cube count never grows.
pub fn simplify(sig: &Signature, k: &ExistsFormula, theory: &UniversalTheory) -> ExistsFormula {
    let mut cubes: Vec<Cube> = k
        .cubes
        .iter()
        .filter_map(|c| simplify_cube(sig, c, theory))
        .collect();

    // Exact duplicates.
    let mut seen = std::collections::BTreeSet::new();
    cubes.retain(|c| seen.insert(format!("{c:?}")));

    // Syntactic subsumption: a cube whose literals embed into another via a
    // variable-to-term substitution describes a superset of its states.
    let mut keep = vec![true; cubes.len()];
    for i in 0..cubes.len() {
        if !keep[i] {
            continue;
        }
        for j in 0..cubes.len() {
            if i == j || !keep[j] {
                continue;
            }
            if subsumes(sig, &cubes[i], &cubes[j]) {
                keep[j] = false;
            }
        }
    }
    let cubes = cubes
        .into_iter()
        .zip(keep)
        .filter_map(|(c, k)| k.then_some(c))
        .collect();
    ExistsFormula { cubes }
}

/// One cube: propagate equalities, substitute scalar singletons, prune
/// entailed literals, detect contradictions. None means the cube is
/// unsatisfiable modulo the theory.
pub fn simplify_cube(sig: &Signature, cube: &Cube, theory: &UniversalTheory) -> Option<Cube> {
    let n = cube.vars.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut bound: Vec<Option<ConstId>> = vec![None; n];
    let sv_distinct = |a: ConstId, b: ConstId| -> bool {
        let sa = sig.const_sort(a);
        if sa != sig.const_sort(b) {
            return false;
        }
        theory
            .sv_values(sa)
            .map(|vs| vs.contains(&a) && vs.contains(&b) && a != b)
            .unwrap_or(false)
    };

    // Scalar sorts with one value pin every variable of that sort.
    for (v, sort) in cube.vars.iter().enumerate() {
        if let Some(values) = theory.sv_values(*sort) {
            if values.len() == 1 {
                bound[v] = Some(values[0]);
            }
        }
    }

    let mut residual: Vec<Literal> = Vec::new();
    for lit in &cube.lits {
        if let (true, Atom::Eq(a, b)) = (lit.positive, &lit.atom) {
            match (a, b) {
                (Term::Var(x), Term::Var(y)) => {
                    let rx = find(&mut parent, x.0 as usize);
                    let ry = find(&mut parent, y.0 as usize);
                    if rx != ry {
                        match (bound[rx], bound[ry]) {
                            (Some(c1), Some(c2)) if c1 != c2 => {
                                if sv_distinct(c1, c2) {
                                    return None;
                                }
                                // Two non-scalar constants may coincide; keep the
                                // equation at the constant level.
                                parent[ry] = rx;
                                residual.push(Literal::pos(Atom::Eq(Term::Const(c1), Term::Const(c2))));
                            }
                            (c1, c2) => {
                                parent[ry] = rx;
                                bound[rx] = c1.or(c2);
                            }
                        }
                    }
                    continue;
                }
                (Term::Var(x), Term::Const(c)) | (Term::Const(c), Term::Var(x)) => {
                    let rx = find(&mut parent, x.0 as usize);
                    match bound[rx] {
                        Some(old) if old != *c => {
                            if sv_distinct(old, *c) {
                                return None;
                            }
                            residual.push(Literal::pos(Atom::Eq(Term::Const(old), Term::Const(*c))));
                        }
                        _ => bound[rx] = Some(*c),
                    }
                    continue;
                }
                (Term::Const(c1), Term::Const(c2)) => {
                    if c1 == c2 {
                        continue;
                    }
                    if sv_distinct(*c1, *c2) {
                        return None;
                    }
                    residual.push(lit.clone());
                    continue;
                }
            }
        }
        residual.push(lit.clone());
    }

    let subst = |t: Term, parent: &mut Vec<usize>| -> Term {
        match t {
            Term::Var(v) => {
                let r = find(parent, v.0 as usize);
                match bound[r] {
                    Some(c) => Term::Const(c),
                    None => Term::Var(VarId(r as u32)),
                }
            }
            c => c,
        }
    };

    let hierarchical = !theory.hierarchy_closure.is_empty();
    let in_closure = |a: ConstId, b: ConstId| theory.hierarchy_closure.contains(&(a, b));
    let senior = sig.senior();

    let mut lits: Vec<Literal> = Vec::new();
    for lit in residual {
        let lit = Literal {
            positive: lit.positive,
            atom: lit.atom.map_terms(&mut |t| subst(t, &mut parent)),
        };
        match &lit.atom {
            Atom::Eq(a, b) if a == b => {
                if lit.positive {
                    continue;
                }
                return None;
            }
            Atom::Eq(Term::Const(c1), Term::Const(c2)) => {
                if sv_distinct(*c1, *c2) {
                    if lit.positive {
                        return None;
                    }
                    continue;
                }
                lits.push(lit);
            }
            Atom::Pred { pred, args } if *pred == senior => {
                match (args[0], args[1]) {
                    (a, b) if a == b && hierarchical => {
                        // senior is reflexive under the partial-order axioms.
                        if lit.positive {
                            continue;
                        }
                        return None;
                    }
                    (Term::Const(a), Term::Const(b)) if in_closure(a, b) => {
                        if lit.positive {
                            continue;
                        }
                        return None;
                    }
                    _ => lits.push(lit),
                }
            }
            _ => lits.push(lit),
        }
    }

    // Propositional contradiction within the cube.
    let set: std::collections::BTreeSet<(bool, Atom)> =
        lits.iter().map(|l| (l.positive, l.atom.clone())).collect();
    for (pos, atom) in &set {
        if *pos && set.contains(&(false, atom.clone())) {
            return None;
        }
    }

    // Variables were renumbered onto class roots; keep sorts aligned.
    let vars: Vec<SortId> = cube.vars.clone();
    Some(canonicalize(&Cube { vars, lits }))
}

/// Does `general` subsume `specific`: a substitution of `general`'s
/// variables by terms of `specific` mapping every literal into `specific`'s
/// literal set.
pub fn subsumes(sig: &Signature, general: &Cube, specific: &Cube) -> bool {
    let mut map: Vec<Option<Term>> = vec![None; general.vars.len()];
    match_lits(sig, general, specific, 0, &mut map)
}

fn match_lits(
    sig: &Signature,
    general: &Cube,
    specific: &Cube,
    i: usize,
    map: &mut Vec<Option<Term>>,
) -> bool {
    if i == general.lits.len() {
        return true;
    }
    let lit = &general.lits[i];
    for cand in &specific.lits {
        if cand.positive != lit.positive {
            continue;
        }
        let saves = map.clone();
        if match_atom(sig, &lit.atom, &cand.atom, general, specific, map)
            && match_lits(sig, general, specific, i + 1, map)
        {
            return true;
        }
        *map = saves;
    }
    false
}

fn match_atom(
    sig: &Signature,
    a: &Atom,
    b: &Atom,
    general: &Cube,
    specific: &Cube,
    map: &mut Vec<Option<Term>>,
) -> bool {
    match (a, b) {
        (Atom::Pred { pred: p1, args: a1 }, Atom::Pred { pred: p2, args: a2 }) => {
            p1 == p2
                && a1
                    .iter()
                    .zip(a2)
                    .all(|(x, y)| match_term(sig, *x, *y, general, specific, map))
        }
        (Atom::Eq(x1, y1), Atom::Eq(x2, y2)) => {
            let saves = map.clone();
            if match_term(sig, *x1, *x2, general, specific, map)
                && match_term(sig, *y1, *y2, general, specific, map)
            {
                return true;
            }
            *map = saves;
            match_term(sig, *x1, *y2, general, specific, map)
                && match_term(sig, *y1, *x2, general, specific, map)
        }
        _ => false,
    }
}

fn match_term(
    sig: &Signature,
    g: Term,
    s: Term,
    general: &Cube,
    specific: &Cube,
    map: &mut [Option<Term>],
) -> bool {
    match g {
        Term::Const(c) => s == Term::Const(c),
        Term::Var(v) => {
            let gs = general.var_sort(v);
            let target_sort = match s {
                Term::Var(w) => specific.var_sort(w),
                Term::Const(c) => sig.const_sort(c),
            };
            if gs != target_sort {
                return false;
            }
            match &map[v.0 as usize] {
                Some(t) => *t == s,
                None => {
                    map[v.0 as usize] = Some(s);
                    true
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fol::{Signature, ROLE, USER};

    fn rule_assign(sig: &Signature, pre_role: ConstId, target: ConstId) -> TransitionRule {
        let mut guard = Cube::top();
        let subject = guard.push_var(USER);
        guard.lits.push(Literal::pos(Atom::Pred {
            pred: sig.ua(),
            args: vec![Term::Var(subject), Term::Const(pre_role)],
        }));
        TransitionRule {
            kind: RuleKind::Assign,
            guard,
            subject,
            target_role: Term::Const(target),
            label: "a".into(),
        }
    }

    fn sv_theory(_sig: &Signature, roles: &[ConstId], users: &[ConstId]) -> UniversalTheory {
        let mut th = UniversalTheory::default();
        th.sv.insert(ROLE, roles.to_vec());
        th.sv.insert(USER, users.to_vec());
        th
    }

    #[test]
    fn pre_image_of_false_is_false() {
        let mut sig = Signature::arbac();
        let r5 = sig.add_const("r5", ROLE).unwrap();
        let r6 = sig.add_const("r6", ROLE).unwrap();
        let rule = rule_assign(&sig, r5, r6);
        let th = UniversalTheory::default();
        let out = pre_image(&sig, &rule, &ExistsFormula::bottom(), &th);
        assert!(out.is_false());
    }

    #[test]
    fn assign_preimage_produces_match_and_frame_cubes() {
        // Rule: subject with r5 gains r6. Goal: ua(u0, r6), one user u0.
        let mut sig = Signature::arbac();
        let u0 = sig.add_const("u0", USER).unwrap();
        let r5 = sig.add_const("r5", ROLE).unwrap();
        let r6 = sig.add_const("r6", ROLE).unwrap();
        let rule = rule_assign(&sig, r5, r6);
        let th = sv_theory(&sig, &[r5, r6], &[u0]);

        let mut goal = Cube::top();
        goal.lits.push(Literal::pos(Atom::Pred {
            pred: sig.ua(),
            args: vec![Term::Const(u0), Term::Const(r6)],
        }));
        let raw = pre_image(&sig, &rule, &ExistsFormula::single(goal), &th);
        // Case split: the updated pair is the goal pair, or the goal held
        // before the step.
        assert_eq!(raw.cubes.len(), 2);

        // After simplification the frame branch (goal already true, subject
        // holds r5) is subsumed by the match branch (subject holds r5).
        let pre = simplify(&sig, &raw, &th);
        assert_eq!(pre.cubes.len(), 1);
        let rendered = crate::fol::sexpr::cube_to_sexpr(&sig, &pre.cubes[0]);
        assert!(rendered.contains("(ua u0 r5)") && !rendered.contains("r6"), "{rendered}");
    }

    #[test]
    fn revoke_preimage_of_positive_goal_splits_on_pair() {
        // Revoking r6 from anyone: a state satisfies the pre-image of
        // ua(u0,r6) only through the frame branch with the pair untouched,
        // which is impossible when subject and pair coincide.
        let mut sig = Signature::arbac();
        let u0 = sig.add_const("u0", USER).unwrap();
        let r6 = sig.add_const("r6", ROLE).unwrap();
        let mut guard = Cube::top();
        let subject = guard.push_var(USER);
        let rule = TransitionRule {
            kind: RuleKind::Revoke,
            guard,
            subject,
            target_role: Term::Const(r6),
            label: "v".into(),
        };
        let th = sv_theory(&sig, &[r6], &[u0]);
        let mut goal = Cube::top();
        goal.lits.push(Literal::pos(Atom::Pred {
            pred: sig.ua(),
            args: vec![Term::Const(u0), Term::Const(r6)],
        }));
        let pre = simplify(&sig, &pre_image(&sig, &rule, &ExistsFormula::single(goal), &th), &th);
        // One user, one role: u != u0 and r != r6 are both unsatisfiable, so
        // the pre-image is empty.
        assert!(pre.is_false());
    }

    #[test]
    fn equality_propagation_collapses_constants() {
        let mut sig = Signature::arbac();
        let u0 = sig.add_const("u0", USER).unwrap();
        let r5 = sig.add_const("r5", ROLE).unwrap();
        let r6 = sig.add_const("r6", ROLE).unwrap();
        let th = sv_theory(&sig, &[r5, r6], &[u0]);

        let mut cube = Cube::top();
        let u = cube.push_var(USER);
        let r = cube.push_var(ROLE);
        cube.lits.push(Literal::pos(Atom::Pred { pred: sig.ua(), args: vec![Term::Var(u), Term::Var(r)] }));
        cube.lits.push(Literal::pos(Atom::Eq(Term::Var(u), Term::Const(u0))));
        cube.lits.push(Literal::pos(Atom::Eq(Term::Var(r), Term::Const(r5))));
        let simplified = simplify_cube(&sig, &cube, &th).unwrap();
        assert!(simplified.vars.is_empty());
        assert_eq!(simplified.lits.len(), 1);
    }

    #[test]
    fn scalar_conflict_kills_cube() {
        let mut sig = Signature::arbac();
        let r5 = sig.add_const("r5", ROLE).unwrap();
        let r6 = sig.add_const("r6", ROLE).unwrap();
        let th = sv_theory(&sig, &[r5, r6], &[]);
        let mut cube = Cube::top();
        let r = cube.push_var(ROLE);
        cube.lits.push(Literal::pos(Atom::Eq(Term::Var(r), Term::Const(r5))));
        cube.lits.push(Literal::pos(Atom::Eq(Term::Var(r), Term::Const(r6))));
        assert!(simplify_cube(&sig, &cube, &th).is_none());
    }

    #[test]
    fn subsumption_removes_more_specific_cube() {
        let mut sig = Signature::arbac();
        let u0 = sig.add_const("u0", USER).unwrap();
        let r5 = sig.add_const("r5", ROLE).unwrap();
        let th = UniversalTheory::default();

        // general: exists u. ua(u, r5); specific: ua(u0, r5).
        let mut general = Cube::top();
        let u = general.push_var(USER);
        general.lits.push(Literal::pos(Atom::Pred {
            pred: sig.ua(),
            args: vec![Term::Var(u), Term::Const(r5)],
        }));
        let mut specific = Cube::top();
        specific.lits.push(Literal::pos(Atom::Pred {
            pred: sig.ua(),
            args: vec![Term::Const(u0), Term::Const(r5)],
        }));
        assert!(subsumes(&sig, &general, &specific));
        assert!(!subsumes(&sig, &specific, &general));

        let f = ExistsFormula { cubes: vec![general, specific] };
        let simplified = simplify(&sig, &f, &th);
        assert_eq!(simplified.cubes.len(), 1);
        assert_eq!(simplified.cubes[0].vars.len(), 1);
    }
}
