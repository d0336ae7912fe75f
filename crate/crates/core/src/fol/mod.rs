//! Many-sorted first-order syntax kernel: sorts, constants, predicates,
//! literals, cubes, existential and universal formulae. No function symbols.

pub mod canon;
pub mod config;
pub mod sexpr;

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct SortId(pub u32);

#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct ConstId(pub u32);

#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct PredId(pub u32);

/// Index into the bound-variable list of the enclosing cube or universal formula.
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct VarId(pub u32);

pub const USER: SortId = SortId(0);
pub const ROLE: SortId = SortId(1);
pub const PERMISSION: SortId = SortId(2);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sort {
    pub name: String,
    /// Prefix used when printing canonical bound variables of this sort (u0, r1, ...).
    pub var_prefix: String,
    /// Parameter sorts only exist under the parametric-role extension.
    pub is_param: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstDecl {
    pub name: String,
    pub sort: SortId,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredDecl {
    pub name: String,
    pub args: Vec<SortId>,
}

#[derive(Error, Debug, PartialEq, Eq)]
pub enum FolError {
    #[error("duplicate sort name `{0}`")]
    DuplicateSort(String),
    #[error("duplicate constant name `{0}`")]
    DuplicateConst(String),
    #[error("duplicate predicate name `{0}`")]
    DuplicatePred(String),
    #[error("unknown constant `{0}`")]
    UnknownConst(String),
    #[error("unknown predicate `{0}`")]
    UnknownPred(String),
    #[error("ill-sorted atom for predicate `{0}`")]
    IllSorted(String),
    #[error("negated implicit membership is not expressible in guards")]
    NegativeUaStar,
}

/// Relational signature: sorts, constants and predicates. Equality is
/// implicit at every sort; there are never any function symbols.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub sorts: Vec<Sort>,
    pub consts: Vec<ConstDecl>,
    pub preds: Vec<PredDecl>,
    const_index: BTreeMap<String, ConstId>,
    pred_index: BTreeMap<String, PredId>,
}

impl Signature {
    /// The base ARBAC signature: sorts User/Role/Permission and the
    /// predicates ua : User x Role, pa : Permission x Role, senior : Role x Role.
    pub fn arbac() -> Signature {
        let mut sig = Signature {
            sorts: vec![
                Sort { name: "User".into(), var_prefix: "u".into(), is_param: false },
                Sort { name: "Role".into(), var_prefix: "r".into(), is_param: false },
                Sort { name: "Permission".into(), var_prefix: "p".into(), is_param: false },
            ],
            consts: Vec::new(),
            preds: Vec::new(),
            const_index: BTreeMap::new(),
            pred_index: BTreeMap::new(),
        };
        sig.add_pred("ua", vec![USER, ROLE]).unwrap();
        sig.add_pred("pa", vec![PERMISSION, ROLE]).unwrap();
        sig.add_pred("senior", vec![ROLE, ROLE]).unwrap();
        sig
    }

    pub fn ua(&self) -> PredId {
        self.pred_id("ua").unwrap()
    }

    pub fn pa(&self) -> PredId {
        self.pred_id("pa").unwrap()
    }

    pub fn senior(&self) -> PredId {
        self.pred_id("senior").unwrap()
    }

    pub fn add_sort(&mut self, name: &str, var_prefix: &str, is_param: bool) -> Result<SortId, FolError> {
        if self.sorts.iter().any(|s| s.name == name) {
            return Err(FolError::DuplicateSort(name.into()));
        }
        self.sorts.push(Sort { name: name.into(), var_prefix: var_prefix.into(), is_param });
        Ok(SortId(self.sorts.len() as u32 - 1))
    }

    pub fn add_const(&mut self, name: &str, sort: SortId) -> Result<ConstId, FolError> {
        if self.const_index.contains_key(name) {
            return Err(FolError::DuplicateConst(name.into()));
        }
        let id = ConstId(self.consts.len() as u32);
        self.consts.push(ConstDecl { name: name.into(), sort });
        self.const_index.insert(name.into(), id);
        Ok(id)
    }

    pub fn add_pred(&mut self, name: &str, args: Vec<SortId>) -> Result<PredId, FolError> {
        if self.pred_index.contains_key(name) {
            return Err(FolError::DuplicatePred(name.into()));
        }
        let id = PredId(self.preds.len() as u32);
        self.preds.push(PredDecl { name: name.into(), args });
        self.pred_index.insert(name.into(), id);
        Ok(id)
    }

    pub fn const_id(&self, name: &str) -> Option<ConstId> {
        self.const_index.get(name).copied()
    }

    pub fn pred_id(&self, name: &str) -> Option<PredId> {
        self.pred_index.get(name).copied()
    }

    pub fn sort_id(&self, name: &str) -> Option<SortId> {
        self.sorts.iter().position(|s| s.name == name).map(|i| SortId(i as u32))
    }

    pub fn const_name(&self, c: ConstId) -> &str {
        &self.consts[c.0 as usize].name
    }

    pub fn const_sort(&self, c: ConstId) -> SortId {
        self.consts[c.0 as usize].sort
    }

    pub fn pred_name(&self, p: PredId) -> &str {
        &self.preds[p.0 as usize].name
    }

    pub fn pred_args(&self, p: PredId) -> &[SortId] {
        &self.preds[p.0 as usize].args
    }

    /// Constants of a given sort, in declaration order.
    pub fn consts_of(&self, sort: SortId) -> Vec<ConstId> {
        (0..self.consts.len() as u32)
            .map(ConstId)
            .filter(|c| self.const_sort(*c) == sort)
            .collect()
    }
}

#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub enum Term {
    Var(VarId),
    Const(ConstId),
}

impl Term {
    pub fn as_var(&self) -> Option<VarId> {
        match self {
            Term::Var(v) => Some(*v),
            Term::Const(_) => None,
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub enum Atom {
    Pred { pred: PredId, args: Vec<Term> },
    /// Equality; the two terms share a sort.
    Eq(Term, Term),
}

impl Atom {
    pub fn terms(&self) -> Vec<Term> {
        match self {
            Atom::Pred { args, .. } => args.clone(),
            Atom::Eq(a, b) => vec![*a, *b],
        }
    }

    pub fn map_terms(&self, f: &mut impl FnMut(Term) -> Term) -> Atom {
        match self {
            Atom::Pred { pred, args } => Atom::Pred { pred: *pred, args: args.iter().map(|t| f(*t)).collect() },
            Atom::Eq(a, b) => Atom::Eq(f(*a), f(*b)),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct Literal {
    pub positive: bool,
    pub atom: Atom,
}

impl Literal {
    pub fn pos(atom: Atom) -> Literal {
        Literal { positive: true, atom }
    }

    pub fn neg(atom: Atom) -> Literal {
        Literal { positive: false, atom }
    }

    pub fn negated(&self) -> Literal {
        Literal { positive: !self.positive, atom: self.atom.clone() }
    }

    pub fn map_terms(&self, f: &mut impl FnMut(Term) -> Term) -> Literal {
        Literal { positive: self.positive, atom: self.atom.map_terms(f) }
    }
}

/// An existentially closed conjunction of literals. One cube is one
/// disjunct of an `ExistsFormula`; guards of transitions are cubes too.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct Cube {
    /// Sort of each bound variable; `VarId(i)` refers to `vars[i]`.
    pub vars: Vec<SortId>,
    pub lits: Vec<Literal>,
}

impl Cube {
    pub fn top() -> Cube {
        Cube { vars: Vec::new(), lits: Vec::new() }
    }

    pub fn var_sort(&self, v: VarId) -> SortId {
        self.vars[v.0 as usize]
    }

    pub fn push_var(&mut self, sort: SortId) -> VarId {
        self.vars.push(sort);
        VarId(self.vars.len() as u32 - 1)
    }

    /// All well-sortedness obligations of the cube against a signature.
    pub fn check_sorted(&self, sig: &Signature) -> Result<(), FolError> {
        let term_sort = |t: &Term| match t {
            Term::Var(v) => self.vars.get(v.0 as usize).copied(),
            Term::Const(c) => Some(sig.const_sort(*c)),
        };
        for lit in &self.lits {
            match &lit.atom {
                Atom::Pred { pred, args } => {
                    let decl = sig.pred_args(*pred);
                    if decl.len() != args.len() {
                        return Err(FolError::IllSorted(sig.pred_name(*pred).into()));
                    }
                    for (t, want) in args.iter().zip(decl) {
                        if term_sort(t) != Some(*want) {
                            return Err(FolError::IllSorted(sig.pred_name(*pred).into()));
                        }
                    }
                }
                Atom::Eq(a, b) => {
                    if term_sort(a).is_none() || term_sort(a) != term_sort(b) {
                        return Err(FolError::IllSorted("=".into()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Display name of a bound variable under the per-sort indexing scheme.
    pub fn var_name(&self, sig: &Signature, v: VarId) -> String {
        let sort = self.var_sort(v);
        let idx = self.vars[..v.0 as usize].iter().filter(|s| **s == sort).count();
        format!("{}{}", sig.sorts[sort.0 as usize].var_prefix, idx)
    }
}

/// Finite disjunction of existentially closed cubes. The empty disjunction
/// is false; a cube with no literals is true.
#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct ExistsFormula {
    pub cubes: Vec<Cube>,
}

impl ExistsFormula {
    pub fn bottom() -> ExistsFormula {
        ExistsFormula { cubes: Vec::new() }
    }

    pub fn top() -> ExistsFormula {
        ExistsFormula { cubes: vec![Cube::top()] }
    }

    pub fn single(cube: Cube) -> ExistsFormula {
        ExistsFormula { cubes: vec![cube] }
    }

    pub fn is_false(&self) -> bool {
        self.cubes.is_empty()
    }
}

/// Quantifier-free negation-normal matrix used inside universal formulae.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Nnf {
    Lit(Literal),
    And(Vec<Nnf>),
    Or(Vec<Nnf>),
}

impl Nnf {
    pub fn top() -> Nnf {
        Nnf::And(Vec::new())
    }

    pub fn bottom() -> Nnf {
        Nnf::Or(Vec::new())
    }

    pub fn negated(&self) -> Nnf {
        match self {
            Nnf::Lit(l) => Nnf::Lit(l.negated()),
            Nnf::And(xs) => Nnf::Or(xs.iter().map(Nnf::negated).collect()),
            Nnf::Or(xs) => Nnf::And(xs.iter().map(Nnf::negated).collect()),
        }
    }

    pub fn map_literals(&self, f: &mut impl FnMut(&Literal) -> Nnf) -> Nnf {
        match self {
            Nnf::Lit(l) => f(l),
            Nnf::And(xs) => Nnf::And(xs.iter().map(|x| x.map_literals(f)).collect()),
            Nnf::Or(xs) => Nnf::Or(xs.iter().map(|x| x.map_literals(f)).collect()),
        }
    }

    /// Distribute to disjunctive normal form: a list of conjunctions.
    pub fn dnf(&self) -> Vec<Vec<Literal>> {
        match self {
            Nnf::Lit(l) => vec![vec![l.clone()]],
            Nnf::And(xs) => {
                let mut acc: Vec<Vec<Literal>> = vec![Vec::new()];
                for x in xs {
                    let parts = x.dnf();
                    let mut next = Vec::new();
                    for a in &acc {
                        for p in &parts {
                            let mut c = a.clone();
                            c.extend(p.iter().cloned());
                            next.push(c);
                        }
                    }
                    acc = next;
                }
                acc
            }
            Nnf::Or(xs) => xs.iter().flat_map(|x| x.dnf()).collect(),
        }
    }
}

/// Universally closed formula: the universal closure of `matrix` over `vars`.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ForallFormula {
    pub vars: Vec<SortId>,
    pub matrix: Nnf,
}

impl ForallFormula {
    pub fn top() -> ForallFormula {
        ForallFormula { vars: Vec::new(), matrix: Nnf::top() }
    }

    pub fn var_name(&self, sig: &Signature, v: VarId) -> String {
        let sort = self.vars[v.0 as usize];
        let idx = self.vars[..v.0 as usize].iter().filter(|s| **s == sort).count();
        format!("{}{}", sig.sorts[sort.0 as usize].var_prefix, idx)
    }
}

/// A theory axiomatized by universal sentences, with the scalar-value
/// structure (when declared) kept in explicit form so that the solver and
/// the evaluator can exploit it.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct UniversalTheory {
    pub axioms: Vec<ForallFormula>,
    /// Sorts axiomatized as scalar values: pairwise-distinct constants that
    /// exhaust the sort.
    pub sv: BTreeMap<SortId, Vec<ConstId>>,
    /// Pairs (senior, junior) in the declared hierarchy's reflexive-transitive
    /// closure, kept for literal-level simplification.
    pub hierarchy_closure: Vec<(ConstId, ConstId)>,
}

impl UniversalTheory {
    pub fn sv_values(&self, sort: SortId) -> Option<&[ConstId]> {
        self.sv.get(&sort).map(|v| v.as_slice())
    }

    /// Materialize the scalar-value axioms as universal sentences
    /// (distinctness plus domain closure), e.g. for export.
    pub fn sv_axioms(&self) -> Vec<ForallFormula> {
        let mut out = Vec::new();
        for (&sort, values) in &self.sv {
            for (i, a) in values.iter().enumerate() {
                for b in &values[i + 1..] {
                    out.push(ForallFormula {
                        vars: vec![],
                        matrix: Nnf::Lit(Literal::neg(Atom::Eq(Term::Const(*a), Term::Const(*b)))),
                    });
                }
            }
            out.push(ForallFormula {
                vars: vec![sort],
                matrix: Nnf::Or(
                    values
                        .iter()
                        .map(|v| Nnf::Lit(Literal::pos(Atom::Eq(Term::Var(VarId(0)), Term::Const(*v)))))
                        .collect(),
                ),
            });
        }
        out
    }
}

/// Splice implicit membership ua*(user, role) into a cube: a fresh role
/// variable r' with literals senior(r', role) and ua(user, r').
///
/// Only the positive form is expressible; the negation would need a
/// universal quantifier ranging over senior roles.
pub fn expand_ua_star(
    sig: &Signature,
    cube: &mut Cube,
    user: Term,
    role: Term,
    positive: bool,
) -> Result<VarId, FolError> {
    if !positive {
        return Err(FolError::NegativeUaStar);
    }
    let fresh = cube.push_var(ROLE);
    cube.lits.push(Literal::pos(Atom::Pred {
        pred: sig.senior(),
        args: vec![Term::Var(fresh), role],
    }));
    cube.lits.push(Literal::pos(Atom::Pred {
        pred: sig.ua(),
        args: vec![user, Term::Var(fresh)],
    }));
    Ok(fresh)
}

/// Negate a disjunction of existential cubes into one universal sentence:
/// a conjunction, over the cubes, of universally closed clauses.
pub fn negate_exists(f: &ExistsFormula) -> ForallFormula {
    let mut vars = Vec::new();
    let mut conjuncts = Vec::new();
    for cube in &f.cubes {
        let offset = vars.len() as u32;
        vars.extend(cube.vars.iter().copied());
        let clause = Nnf::Or(
            cube.lits
                .iter()
                .map(|lit| {
                    Nnf::Lit(lit.negated().map_terms(&mut |t| match t {
                        Term::Var(v) => Term::Var(VarId(v.0 + offset)),
                        c => c,
                    }))
                })
                .collect(),
        );
        conjuncts.push(clause);
    }
    ForallFormula { vars, matrix: Nnf::And(conjuncts) }
}

/// Negate a universal sentence into an existential formula by pushing the
/// negation through the matrix and distributing to cubes.
pub fn negate_forall(f: &ForallFormula) -> ExistsFormula {
    let neg = f.matrix.negated();
    let cubes = neg
        .dnf()
        .into_iter()
        .map(|lits| Cube { vars: f.vars.clone(), lits })
        .map(|c| canon::canonicalize(&c))
        .collect();
    ExistsFormula { cubes }
}

/// Replace every occurrence of predicate `from` with `to` in a universal formula.
pub fn replace_pred_forall(f: &ForallFormula, from: PredId, to: PredId) -> ForallFormula {
    let matrix = f.matrix.map_literals(&mut |lit| {
        let atom = match &lit.atom {
            Atom::Pred { pred, args } if *pred == from => Atom::Pred { pred: to, args: args.clone() },
            other => other.clone(),
        };
        Nnf::Lit(Literal { positive: lit.positive, atom })
    });
    ForallFormula { vars: f.vars.clone(), matrix }
}

/// Replace every occurrence of predicate `from` with `to` in a cube.
pub fn replace_pred_cube(c: &Cube, from: PredId, to: PredId) -> Cube {
    let lits = c
        .lits
        .iter()
        .map(|lit| {
            let atom = match &lit.atom {
                Atom::Pred { pred, args } if *pred == from => Atom::Pred { pred: to, args: args.clone() },
                other => other.clone(),
            };
            Literal { positive: lit.positive, atom }
        })
        .collect();
    Cube { vars: c.vars.clone(), lits }
}

pub type SharedSignature = Arc<Signature>;

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)
    }
}
