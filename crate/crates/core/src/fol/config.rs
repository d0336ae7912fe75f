//! Finite first-order structures (concrete RBAC policies) and the dualities
//! between them and existential formulae: diagram formulae, embeddings, and
//! bounded model enumeration. The enumeration side is a test utility and is
//! only meant for small bounds.

use super::{Atom, ConstId, Cube, ExistsFormula, Literal, PredId, SharedSignature, SortId, Term, UniversalTheory};
use crate::oracle::eval::{eval_exists, eval_forall, EvalError};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Error, Debug, PartialEq, Eq)]
pub enum ConfigError {
    #[error("constant `{0}` interpreted outside its sort's domain")]
    ConstOutOfRange(String),
    #[error("sort `{0}` has constants but an empty domain")]
    EmptyDomainWithConstants(String),
    #[error("structure violates the attached theory")]
    TheoryViolation,
    #[error("evaluation failure: {0}")]
    Eval(#[from] EvalError),
    #[error("bound too small for sort `{0}`")]
    BoundTooSmall(String),
    #[error("bound too large: predicate `{0}` would need {1} tuples")]
    BoundTooLarge(String, usize),
}

/// A finite structure over a signature: per-sort domains `0..domain[s]`,
/// an element for every constant, and an extension for every predicate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Configuration {
    pub sig: SharedSignature,
    pub domain: Vec<usize>,
    pub const_interp: Vec<usize>,
    pub preds: Vec<BTreeSet<Vec<usize>>>,
}

impl Configuration {
    /// Build and validate: constants in range, nonempty domains wherever a
    /// constant needs a value, and the theory satisfied.
    pub fn new(
        sig: SharedSignature,
        domain: Vec<usize>,
        const_interp: Vec<usize>,
        preds: Vec<BTreeSet<Vec<usize>>>,
        theory: &UniversalTheory,
    ) -> Result<Configuration, ConfigError> {
        let cfg = Configuration { sig, domain, const_interp, preds };
        cfg.validate(theory)?;
        Ok(cfg)
    }

    /// Assemble a configuration without checking it against a theory.
    /// Constant interpretations must land inside their sorts' domains.
    pub fn from_parts(
        sig: SharedSignature,
        domain: Vec<usize>,
        const_interp: Vec<usize>,
        preds: Vec<BTreeSet<Vec<usize>>>,
    ) -> Configuration {
        debug_assert_eq!(const_interp.len(), sig.consts.len());
        debug_assert!(sig
            .consts
            .iter()
            .zip(&const_interp)
            .all(|(c, e)| *e < domain[c.sort.0 as usize]));
        Configuration { sig, domain, const_interp, preds }
    }

    pub fn validate(&self, theory: &UniversalTheory) -> Result<(), ConfigError> {
        for (i, c) in self.sig.consts.iter().enumerate() {
            let size = self.domain[c.sort.0 as usize];
            if size == 0 {
                return Err(ConfigError::EmptyDomainWithConstants(
                    self.sig.sorts[c.sort.0 as usize].name.clone(),
                ));
            }
            if self.const_interp[i] >= size {
                return Err(ConfigError::ConstOutOfRange(c.name.clone()));
            }
        }
        if !self.satisfies_theory(theory)? {
            return Err(ConfigError::TheoryViolation);
        }
        Ok(())
    }

    pub fn satisfies_theory(&self, theory: &UniversalTheory) -> Result<bool, ConfigError> {
        // Scalar-value sorts: values are pairwise distinct and exhaust the sort.
        for (&sort, values) in &theory.sv {
            let elems: Vec<usize> = values.iter().map(|v| self.const_interp[v.0 as usize]).collect();
            let distinct: BTreeSet<usize> = elems.iter().copied().collect();
            if distinct.len() != elems.len() || distinct.len() != self.domain[sort.0 as usize] {
                return Ok(false);
            }
        }
        for ax in &theory.axioms {
            if !eval_forall(self, ax)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn elem_of_const(&self, c: ConstId) -> usize {
        self.const_interp[c.0 as usize]
    }

    /// Name an element: the first constant denoting it, or a positional name.
    pub fn elem_name(&self, sort: SortId, e: usize) -> String {
        for (i, c) in self.sig.consts.iter().enumerate() {
            if c.sort == sort && self.const_interp[i] == e {
                return c.name.clone();
            }
        }
        format!("{}#{}", self.sig.sorts[sort.0 as usize].var_prefix, e)
    }

    /// Key identifying the isomorphism class: the least encoding over all
    /// sort-respecting relabelings (sorted adjacency encoding).
    pub fn canonical_key(&self) -> Vec<u8> {
        let sorts = self.domain.len();
        let mut perms_per_sort: Vec<Vec<Vec<usize>>> = Vec::with_capacity(sorts);
        for &size in &self.domain {
            perms_per_sort.push(permutations(size));
        }
        let mut best: Option<Vec<u8>> = None;
        let mut choice = vec![0usize; sorts];
        loop {
            let key = self.encode_under(&choice, &perms_per_sort);
            if best.as_ref().is_none_or(|b| key < *b) {
                best = Some(key);
            }
            let mut i = 0;
            loop {
                if i == sorts {
                    return best.unwrap();
                }
                choice[i] += 1;
                if choice[i] < perms_per_sort[i].len() {
                    break;
                }
                choice[i] = 0;
                i += 1;
            }
        }
    }

    fn encode_under(&self, choice: &[usize], perms: &[Vec<Vec<usize>>]) -> Vec<u8> {
        let map = |sort: SortId, e: usize| perms[sort.0 as usize][choice[sort.0 as usize]][e];
        let mut out = Vec::new();
        for &d in &self.domain {
            out.extend_from_slice(&(d as u32).to_be_bytes());
        }
        for (i, c) in self.sig.consts.iter().enumerate() {
            out.extend_from_slice(&(map(c.sort, self.const_interp[i]) as u32).to_be_bytes());
        }
        for (p, ext) in self.preds.iter().enumerate() {
            let args = self.sig.pred_args(PredId(p as u32));
            let mut tuples: Vec<Vec<usize>> = ext
                .iter()
                .map(|t| t.iter().zip(args).map(|(e, s)| map(*s, *e)).collect())
                .collect();
            tuples.sort();
            out.extend_from_slice(&(tuples.len() as u32).to_be_bytes());
            for t in tuples {
                for e in t {
                    out.extend_from_slice(&(e as u32).to_be_bytes());
                }
            }
        }
        out
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    let mut items: Vec<usize> = (0..n).collect();
    fn go(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if k == items.len() {
            out.push(items.clone());
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            go(items, k + 1, out);
            items.swap(k, i);
        }
    }
    go(&mut items, 0, &mut out);
    out
}

/// The diagram formula K_M: a single existential cube naming every domain
/// element with a fresh variable and listing every literal true in M —
/// predicate atoms with both polarities, disequalities between distinct
/// elements, and an equation for every element a constant names. Elements
/// no constant names get no equation, which is what keeps the model set of
/// the diagram upward closed.
pub fn diagram_formula(m: &Configuration) -> ExistsFormula {
    let mut cube = Cube::top();
    // Variable for element e of sort s: var_index[s][e].
    let mut var_index: Vec<Vec<super::VarId>> = Vec::new();
    for (s, &size) in m.domain.iter().enumerate() {
        let mut per = Vec::with_capacity(size);
        for _ in 0..size {
            per.push(cube.push_var(SortId(s as u32)));
        }
        var_index.push(per);
    }

    for (p, ext) in m.preds.iter().enumerate() {
        let pred = PredId(p as u32);
        let args = m.sig.pred_args(pred).to_vec();
        let mut tuple = vec![0usize; args.len()];
        if args.iter().any(|s| m.domain[s.0 as usize] == 0) {
            continue;
        }
        loop {
            let terms: Vec<Term> = tuple
                .iter()
                .zip(&args)
                .map(|(e, s)| Term::Var(var_index[s.0 as usize][*e]))
                .collect();
            cube.lits.push(Literal {
                positive: ext.contains(&tuple),
                atom: Atom::Pred { pred, args: terms },
            });
            let mut i = 0;
            loop {
                if i == tuple.len() {
                    break;
                }
                tuple[i] += 1;
                if tuple[i] < m.domain[args[i].0 as usize] {
                    break;
                }
                tuple[i] = 0;
                i += 1;
            }
            if i == tuple.len() {
                break;
            }
        }
    }

    for (s, &size) in m.domain.iter().enumerate() {
        for a in 0..size {
            for b in a + 1..size {
                cube.lits.push(Literal::neg(Atom::Eq(
                    Term::Var(var_index[s][a]),
                    Term::Var(var_index[s][b]),
                )));
            }
        }
    }

    for (i, c) in m.sig.consts.iter().enumerate() {
        cube.lits.push(Literal::pos(Atom::Eq(
            Term::Var(var_index[c.sort.0 as usize][m.const_interp[i]]),
            Term::Const(ConstId(i as u32)),
        )));
    }

    ExistsFormula::single(cube)
}

/// Does an injective, sort-respecting map exist from `m` into `n` that fixes
/// constants and preserves and reflects every predicate? Backtracking over
/// injective assignments, seeded by the constant interpretations.
pub fn embeds(m: &Configuration, n: &Configuration) -> bool {
    debug_assert_eq!(m.sig.consts.len(), n.sig.consts.len());
    let sorts = m.domain.len();
    // map[s][e] = image of element e of sort s, usize::MAX when unset.
    let mut map: Vec<Vec<usize>> = (0..sorts).map(|s| vec![usize::MAX; m.domain[s]]).collect();
    let mut used: Vec<Vec<bool>> = (0..sorts).map(|s| vec![false; n.domain[s]]).collect();

    for (i, c) in m.sig.consts.iter().enumerate() {
        let s = c.sort.0 as usize;
        let me = m.const_interp[i];
        let ne = n.const_interp[i];
        if map[s][me] == usize::MAX {
            if used[s][ne] {
                return false; // two m-elements would share an image
            }
            map[s][me] = ne;
            used[s][ne] = true;
        } else if map[s][me] != ne {
            return false;
        }
    }

    let todo: Vec<(usize, usize)> = (0..sorts)
        .flat_map(|s| (0..m.domain[s]).map(move |e| (s, e)))
        .filter(|(s, e)| map[*s][*e] == usize::MAX)
        .collect();

    fn preserved(m: &Configuration, n: &Configuration, map: &[Vec<usize>]) -> bool {
        for (p, ext) in m.preds.iter().enumerate() {
            let args = m.sig.pred_args(PredId(p as u32));
            if args.iter().any(|s| m.domain[s.0 as usize] == 0) {
                continue;
            }
            let mut tuple = vec![0usize; args.len()];
            loop {
                let image: Vec<usize> = tuple
                    .iter()
                    .zip(args)
                    .map(|(e, s)| map[s.0 as usize][*e])
                    .collect();
                if ext.contains(&tuple) != n.preds[p].contains(&image) {
                    return false;
                }
                let mut i = 0;
                loop {
                    if i == tuple.len() {
                        break;
                    }
                    tuple[i] += 1;
                    if tuple[i] < m.domain[args[i].0 as usize] {
                        break;
                    }
                    tuple[i] = 0;
                    i += 1;
                }
                if i == tuple.len() {
                    break;
                }
            }
        }
        true
    }

    fn go(
        m: &Configuration,
        n: &Configuration,
        todo: &[(usize, usize)],
        k: usize,
        map: &mut Vec<Vec<usize>>,
        used: &mut Vec<Vec<bool>>,
    ) -> bool {
        if k == todo.len() {
            return preserved(m, n, map);
        }
        let (s, e) = todo[k];
        for target in 0..n.domain[s] {
            if used[s][target] {
                continue;
            }
            map[s][e] = target;
            used[s][target] = true;
            if go(m, n, todo, k + 1, map, used) {
                return true;
            }
            map[s][e] = usize::MAX;
            used[s][target] = false;
        }
        false
    }

    go(m, n, &todo, 0, &mut map, &mut used)
}

/// Does `k /\ theory` have a model at exactly the given per-sort sizes?
/// Same enumeration as `formula_to_configs`, stopping at the first hit and
/// skipping the isomorphism reduction.
pub fn formula_has_model(
    k: &ExistsFormula,
    theory: &UniversalTheory,
    sig: &SharedSignature,
    bound: &[usize],
) -> Result<bool, ConfigError> {
    let mut found = false;
    enumerate_models(k, theory, sig, bound, &mut |_| {
        found = true;
        false
    })?;
    Ok(found)
}

/// All models of `k /\ theory` at exactly the given per-sort sizes, modulo
/// isomorphism. Only predicates that occur in `k` or in the theory axioms
/// are given extensions; the rest stay empty.
pub fn formula_to_configs(
    k: &ExistsFormula,
    theory: &UniversalTheory,
    sig: &SharedSignature,
    bound: &[usize],
) -> Result<Vec<Configuration>, ConfigError> {
    let mut seen: BTreeSet<Vec<u8>> = BTreeSet::new();
    let mut out: Vec<(Vec<u8>, Configuration)> = Vec::new();
    enumerate_models(k, theory, sig, bound, &mut |cfg| {
        let key = cfg.canonical_key();
        if seen.insert(key.clone()) {
            out.push((key, cfg.clone()));
        }
        true
    })?;
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out.into_iter().map(|(_, c)| c).collect())
}

/// Walk every model of `k /\ theory` at the given sizes; the visitor
/// returns false to stop early.
fn enumerate_models(
    k: &ExistsFormula,
    theory: &UniversalTheory,
    sig: &SharedSignature,
    bound: &[usize],
    visit: &mut dyn FnMut(&Configuration) -> bool,
) -> Result<(), ConfigError> {
    for (s, sort) in sig.sorts.iter().enumerate() {
        if let Some(values) = theory.sv_values(SortId(s as u32)) {
            if bound[s] < values.len() {
                return Err(ConfigError::BoundTooSmall(sort.name.clone()));
            }
            if bound[s] > values.len() {
                // Distinctness plus closure admit no such size.
                return Ok(());
            }
        }
        if bound[s] == 0 && !sig.consts_of(SortId(s as u32)).is_empty() {
            return Err(ConfigError::BoundTooSmall(sort.name.clone()));
        }
    }

    // Predicates that matter for the model set of k /\ theory.
    let mut relevant: BTreeSet<PredId> = BTreeSet::new();
    let scan_lit = |lit: &Literal, relevant: &mut BTreeSet<PredId>| {
        if let Atom::Pred { pred, .. } = &lit.atom {
            relevant.insert(*pred);
        }
    };
    for cube in &k.cubes {
        for lit in &cube.lits {
            scan_lit(lit, &mut relevant);
        }
    }
    for ax in &theory.axioms {
        collect_preds(&ax.matrix, &mut relevant);
    }

    let mut tuple_spaces: BTreeMap<PredId, Vec<Vec<usize>>> = BTreeMap::new();
    for &p in &relevant {
        let args = sig.pred_args(p);
        let mut space: Vec<Vec<usize>> = vec![vec![]];
        for s in args {
            let mut next = Vec::new();
            for t in &space {
                for e in 0..bound[s.0 as usize] {
                    let mut t2 = t.clone();
                    t2.push(e);
                    next.push(t2);
                }
            }
            space = next;
        }
        if space.len() > 24 {
            return Err(ConfigError::BoundTooLarge(sig.pred_name(p).into(), space.len()));
        }
        tuple_spaces.insert(p, space);
    }

    // Constant assignments: SV values are pinned to 0..n-1 in declaration
    // order; the rest range over their sort.
    let mut pinned: Vec<Option<usize>> = vec![None; sig.consts.len()];
    for values in theory.sv.values() {
        for (i, v) in values.iter().enumerate() {
            pinned[v.0 as usize] = Some(i);
        }
    }
    let free_consts: Vec<usize> = (0..sig.consts.len()).filter(|i| pinned[*i].is_none()).collect();

    let mut const_choice = vec![0usize; free_consts.len()];
    'consts: loop {
        let mut const_interp: Vec<usize> = pinned.iter().map(|p| p.unwrap_or(0)).collect();
        let mut feasible = true;
        for (j, &ci) in free_consts.iter().enumerate() {
            let size = bound[sig.consts[ci].sort.0 as usize];
            if size == 0 {
                feasible = false;
                break;
            }
            const_interp[ci] = const_choice[j];
        }

        if feasible
            && !enumerate_extensions(
                sig,
                theory,
                k,
                bound,
                &const_interp,
                &relevant,
                &tuple_spaces,
                visit,
            )?
        {
            return Ok(());
        }

        let mut i = 0;
        loop {
            if i == free_consts.len() {
                break 'consts;
            }
            let size = bound[sig.consts[free_consts[i]].sort.0 as usize].max(1);
            const_choice[i] += 1;
            if const_choice[i] < size {
                break;
            }
            const_choice[i] = 0;
            i += 1;
        }
    }

    Ok(())
}

fn collect_preds(m: &super::Nnf, out: &mut BTreeSet<PredId>) {
    match m {
        super::Nnf::Lit(l) => {
            if let Atom::Pred { pred, .. } = &l.atom {
                out.insert(*pred);
            }
        }
        super::Nnf::And(xs) | super::Nnf::Or(xs) => {
            for x in xs {
                collect_preds(x, out);
            }
        }
    }
}

/// Returns false when the visitor stopped the walk.
#[allow(clippy::too_many_arguments)]
fn enumerate_extensions(
    sig: &SharedSignature,
    theory: &UniversalTheory,
    k: &ExistsFormula,
    bound: &[usize],
    const_interp: &[usize],
    relevant: &BTreeSet<PredId>,
    tuple_spaces: &BTreeMap<PredId, Vec<Vec<usize>>>,
    visit: &mut dyn FnMut(&Configuration) -> bool,
) -> Result<bool, ConfigError> {
    let rel: Vec<PredId> = relevant.iter().copied().collect();
    let masks_bits: Vec<usize> = rel.iter().map(|p| tuple_spaces[p].len()).collect();
    let mut mask_choice = vec![0u64; rel.len()];

    loop {
        let mut preds: Vec<BTreeSet<Vec<usize>>> = vec![BTreeSet::new(); sig.preds.len()];
        for (j, p) in rel.iter().enumerate() {
            let space = &tuple_spaces[p];
            for (bit, tuple) in space.iter().enumerate() {
                if mask_choice[j] >> bit & 1 == 1 {
                    preds[p.0 as usize].insert(tuple.clone());
                }
            }
        }
        let cfg = Configuration::from_parts(
            sig.clone(),
            bound.to_vec(),
            const_interp.to_vec(),
            preds,
        );
        if cfg.satisfies_theory(theory)? && eval_exists(&cfg, k)? && !visit(&cfg) {
            return Ok(false);
        }

        let mut j = 0;
        loop {
            if j == rel.len() {
                return Ok(true);
            }
            mask_choice[j] += 1;
            if mask_choice[j] < (1u64 << masks_bits[j]) {
                break;
            }
            mask_choice[j] = 0;
            j += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fol::{Signature, ROLE, USER};
    use std::sync::Arc;

    fn tiny_sig() -> SharedSignature {
        Arc::new(Signature::arbac())
    }

    #[test]
    fn true_formula_at_bound_1_1_0_has_two_models() {
        let sig = tiny_sig();
        let theory = UniversalTheory::default();
        let mut k = ExistsFormula::top();
        // Mention ua so its extension is enumerated.
        let mut cube = Cube::top();
        let u = cube.push_var(USER);
        let r = cube.push_var(ROLE);
        cube.lits.push(Literal::pos(Atom::Pred { pred: sig.ua(), args: vec![Term::Var(u), Term::Var(r)] }));
        k.cubes.push(cube);
        // k is (true or exists ua): equivalent to true, but mentions ua.
        let configs = formula_to_configs(&k, &theory, &sig, &[1, 1, 0]).unwrap();
        assert_eq!(configs.len(), 2);
    }

    #[test]
    fn false_formula_has_no_models() {
        let sig = tiny_sig();
        let theory = UniversalTheory::default();
        let configs = formula_to_configs(&ExistsFormula::bottom(), &theory, &sig, &[1, 1, 1]).unwrap();
        assert!(configs.is_empty());
    }

    #[test]
    fn identity_embedding_exists() {
        let sig = tiny_sig();
        let mut preds = vec![BTreeSet::new(); sig.preds.len()];
        preds[sig.ua().0 as usize].insert(vec![0, 0]);
        let m = Configuration::from_parts(sig.clone(), vec![1, 1, 1], vec![], preds);
        assert!(embeds(&m, &m));
    }

    #[test]
    fn relation_loss_blocks_embedding() {
        let sig = tiny_sig();
        let mut preds = vec![BTreeSet::new(); sig.preds.len()];
        preds[sig.ua().0 as usize].insert(vec![0, 0]);
        let m = Configuration::from_parts(sig.clone(), vec![1, 1, 1], vec![], preds.clone());
        preds[sig.ua().0 as usize].clear();
        let n = Configuration::from_parts(sig.clone(), vec![1, 1, 1], vec![], preds);
        assert!(!embeds(&m, &n));
        // The other direction also fails: embeddings must reflect relations.
        assert!(!embeds(&n, &m));
    }

    #[test]
    fn configuration_satisfies_own_diagram() {
        let sig = tiny_sig();
        let mut preds = vec![BTreeSet::new(); sig.preds.len()];
        preds[sig.ua().0 as usize].insert(vec![0, 1]);
        let m = Configuration::from_parts(sig.clone(), vec![1, 2, 1], vec![], preds);
        let d = diagram_formula(&m);
        assert!(eval_exists(&m, &d).unwrap());
    }

    #[test]
    fn empty_ua_diagram_contains_negative_literal() {
        let sig = tiny_sig();
        let preds = vec![BTreeSet::new(); sig.preds.len()];
        let m = Configuration::from_parts(sig.clone(), vec![1, 1, 0], vec![], preds);
        let d = diagram_formula(&m);
        let cube = &d.cubes[0];
        let has_neg_ua = cube.lits.iter().any(|l| {
            !l.positive && matches!(&l.atom, Atom::Pred { pred, .. } if *pred == sig.ua())
        });
        assert!(has_neg_ua);
    }
}
