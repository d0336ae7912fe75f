//! Administrative RBAC domain layer: concrete policy declarations and their
//! compilation into the first-order objects the analyses run over.

pub mod parse;

use crate::fol::sexpr::{self, SexprError};
use crate::fol::{
    expand_ua_star, Atom, ConstId, Cube, ExistsFormula, FolError, ForallFormula, Literal, Nnf,
    PredId, SharedSignature, Signature, SortId, Term, UniversalTheory, VarId, PERMISSION, ROLE,
    USER,
};
use crate::solver::{self, Budget, SolverError, Verdict};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum CompileError {
    #[error("role hierarchy has a cycle through `{0}` and `{1}`")]
    CyclicHierarchy(String, String),
    #[error("undeclared constant `{0}`")]
    UndeclaredConstant(String),
    #[error("negated implicit membership in a precondition is not expressible")]
    NegativeUaStar,
    #[error("declaration error: {0}")]
    Fol(#[from] FolError),
    #[error("formula error: {0}")]
    Sexpr(#[from] SexprError),
    #[error("theory is inconsistent")]
    InconsistentTheory,
    #[error("solver failure while checking the theory: {0}")]
    Solver(#[from] SolverError),
    #[error("unknown schema `{0}`")]
    UnknownSchema(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[derive(Default)]
pub struct SortSection {
    /// Scalar-value sort: the listed constants are pairwise distinct and
    /// exhaust the sort. Otherwise the sort is finite but of unknown size.
    pub scalar: bool,
    pub consts: Vec<String>,
}


#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SchemaOrRole {
    Role(String),
    /// Parametric role instance: schema name applied to parameter variables.
    Schema { name: String, params: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoleExprDecl {
    pub role: SchemaOrRole,
    pub positive: bool,
    /// Explicit membership tests ua directly; implicit goes through the
    /// hierarchy. Negative expressions are always explicit.
    pub explicit: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanAssignDecl {
    /// None models administrator-less actions.
    pub admin: Option<SchemaOrRole>,
    pub precond: Vec<RoleExprDecl>,
    pub target: SchemaOrRole,
    /// Users that may not initiate this action (the trusted-user set T).
    pub trusted_excluded: Vec<String>,
    pub label: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanRevokeDecl {
    pub admin: Option<SchemaOrRole>,
    pub target: SchemaOrRole,
    pub label: Option<String>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GoalCmp {
    Eq,
    Senior,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoalPair {
    pub role: String,
    pub cmp: GoalCmp,
    pub permission: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoalDecl {
    pub user: Option<String>,
    pub pairs: Vec<GoalPair>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoleSchemaDecl {
    pub name: String,
    /// Parameter sort names, in the fixed argument order.
    pub params: Vec<String>,
    /// Schema whose instances contain this schema's instances, parameterized
    /// by a prefix of this schema's parameters.
    pub contains: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum InitDecl {
    /// Listed facts, closed by completion: ua holds exactly of these pairs.
    Facts(Vec<(String, String)>),
    /// A raw universal sentence over ua in s-expression syntax.
    Formula(String),
}

impl Default for InitDecl {
    fn default() -> InitDecl {
        InitDecl::Facts(Vec::new())
    }
}

/// Everything a policy file declares.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct PolicyDecls {
    pub user: SortSection,
    pub role: SortSection,
    pub permission: SortSection,
    pub hierarchy: Vec<(String, String)>,
    /// Permission assignment, closed by completion when present.
    pub pa: Option<Vec<(String, String)>>,
    pub init: InitDecl,
    pub smer: Vec<(String, String)>,
    /// Extra universal constraints in s-expression syntax.
    pub constraints: Vec<String>,
    pub schemas: Vec<RoleSchemaDecl>,
    pub can_assign: Vec<CanAssignDecl>,
    pub can_revoke: Vec<CanRevokeDecl>,
    pub goal: Option<GoalDecl>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub enum RuleKind {
    Assign,
    Revoke,
}

/// Compiled administrative action: a guard cube plus an update descriptor.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionRule {
    pub kind: RuleKind,
    pub guard: Cube,
    /// The user the role is granted to or revoked from.
    pub subject: VarId,
    /// Normally a role constant; under parametric roles a guard-bound role variable.
    pub target_role: Term,
    pub label: String,
}

/// The symbolic policy: initial-state sentence, transitions, constraints and
/// the background theory.
#[derive(Clone, Debug)]
pub struct SymbolicPolicy {
    pub sig: SharedSignature,
    pub theory: UniversalTheory,
    pub init: ForallFormula,
    pub transitions: Vec<TransitionRule>,
    pub constraints: Vec<ForallFormula>,
    /// Statically mutually exclusive role pairs, kept in structured form for
    /// constraint-aware cube strengthening.
    pub smer_pairs: Vec<(ConstId, ConstId)>,
    pub hierarchical: bool,
}

#[derive(Debug)]
pub struct CompiledPolicy {
    pub policy: SymbolicPolicy,
    pub goal: Option<ExistsFormula>,
    pub decls: PolicyDecls,
    pub lints: Vec<String>,
}

pub(crate) struct CompileCtx {
    sig: Signature,
    schemas: BTreeMap<String, (PredId, Vec<SortId>)>,
    hierarchical: bool,
}

impl CompileCtx {
    fn const_id(&self, name: &str) -> Result<ConstId, CompileError> {
        self.sig.const_id(name).ok_or_else(|| CompileError::UndeclaredConstant(name.into()))
    }
}

/// Compile a full declaration set. The theory is checked for consistency
/// once, so downstream analyses can assume it.
pub fn compile_policy(decls: &PolicyDecls) -> Result<CompiledPolicy, CompileError> {
    compile_policy_opts(decls, true)
}

pub fn compile_policy_opts(
    decls: &PolicyDecls,
    check_consistency: bool,
) -> Result<CompiledPolicy, CompileError> {
    let mut lints = Vec::new();
    let mut sig = Signature::arbac();
    for (section, sort) in [(&decls.user, USER), (&decls.role, ROLE), (&decls.permission, PERMISSION)] {
        for name in &section.consts {
            sig.add_const(name, sort)?;
        }
    }

    // Parameter sorts and schema predicates.
    let mut schemas: BTreeMap<String, (PredId, Vec<SortId>)> = BTreeMap::new();
    for schema in &decls.schemas {
        let mut arg_sorts = Vec::new();
        for p in &schema.params {
            let sid = match sig.sort_id(p) {
                Some(s) => s,
                None => sig.add_sort(p, &format!("{}_", &p[..1.min(p.len())]), true)?,
            };
            arg_sorts.push(sid);
        }
        let mut args = arg_sorts.clone();
        args.push(ROLE);
        let pred_name = if decls.schemas.iter().filter(|s| s.name == schema.name).count() > 1 {
            format!("{}_{}", schema.name, schema.params.len())
        } else {
            schema.name.clone()
        };
        let pred = sig.add_pred(&pred_name, args)?;
        schemas.insert(pred_name, (pred, arg_sorts));
    }

    let hierarchical = !decls.hierarchy.is_empty();
    let mut ctx = CompileCtx { sig, schemas, hierarchical };

    let mut theory = UniversalTheory::default();
    for (section, sort) in [(&decls.user, USER), (&decls.role, ROLE), (&decls.permission, PERMISSION)] {
        if section.scalar {
            let values: Result<Vec<ConstId>, _> =
                section.consts.iter().map(|n| ctx.const_id(n)).collect();
            theory.sv.insert(sort, values?);
        }
    }

    if hierarchical {
        theory.axioms.extend(hierarchy_axioms(&ctx.sig));
        let mut base = Vec::new();
        for (senior, junior) in &decls.hierarchy {
            let s = ctx.const_id(senior)?;
            let j = ctx.const_id(junior)?;
            base.push((s, j));
            theory.axioms.push(ForallFormula {
                vars: vec![],
                matrix: Nnf::Lit(Literal::pos(Atom::Pred {
                    pred: ctx.sig.senior(),
                    args: vec![Term::Const(s), Term::Const(j)],
                })),
            });
        }
        theory.hierarchy_closure = hierarchy_closure(&ctx.sig, &base)?;
    }

    if let Some(pa) = &decls.pa {
        let pairs: Result<Vec<(ConstId, ConstId)>, _> = pa
            .iter()
            .map(|(p, r)| Ok::<_, CompileError>((ctx.const_id(p)?, ctx.const_id(r)?)))
            .collect();
        theory.axioms.push(pa_completion(&ctx.sig, &pairs?));
    }

    for schema in &decls.schemas {
        let (preds, axioms) = compile_role_schema(&mut ctx, schema)?;
        let _ = preds;
        theory.axioms.extend(axioms);
    }

    let init = match &decls.init {
        InitDecl::Facts(facts) => {
            let pairs: Result<Vec<(ConstId, ConstId)>, _> = facts
                .iter()
                .map(|(u, r)| Ok::<_, CompileError>((ctx.const_id(u)?, ctx.const_id(r)?)))
                .collect();
            clark_completion_ua(&ctx.sig, &pairs?)
        }
        InitDecl::Formula(text) => {
            sexpr::parse_forall(&ctx.sig, &sexpr::parse_sexpr(text)?)?
        }
    };

    let mut constraints = Vec::new();
    let mut smer_pairs = Vec::new();
    for (a, b) in &decls.smer {
        let ca = ctx.const_id(a)?;
        let cb = ctx.const_id(b)?;
        constraints.push(smer_formula(&ctx.sig, ca, cb));
        smer_pairs.push((ca, cb));
    }
    for text in &decls.constraints {
        constraints.push(sexpr::parse_forall(&ctx.sig, &sexpr::parse_sexpr(text)?)?);
    }

    let mut transitions = Vec::new();
    for (i, decl) in decls.can_assign.iter().enumerate() {
        transitions.push(compile_can_assign(&mut ctx, decl, i, &mut lints)?);
    }
    for (i, decl) in decls.can_revoke.iter().enumerate() {
        transitions.push(compile_can_revoke(&mut ctx, decl, i)?);
    }

    let goal = match &decls.goal {
        Some(g) => Some(compile_goal(&ctx, g, &mut lints, decls.pa.is_some())?),
        None => None,
    };

    let sig: SharedSignature = Arc::new(ctx.sig);
    let policy = SymbolicPolicy {
        sig: sig.clone(),
        theory,
        init,
        transitions,
        constraints,
        smer_pairs,
        hierarchical,
    };

    if check_consistency {
        let p = solver::BsrProblem::with_theory(sig, &policy.theory);
        if solver::check_sat(&p, &Budget::default())?.verdict != Verdict::Sat {
            return Err(CompileError::InconsistentTheory);
        }
    }

    Ok(CompiledPolicy { policy, goal, decls: decls.clone(), lints })
}

/// Partial-order axioms for the seniority relation.
fn hierarchy_axioms(sig: &Signature) -> Vec<ForallFormula> {
    let senior = sig.senior();
    let v = |i: u32| Term::Var(VarId(i));
    let at = |a: Term, b: Term| Atom::Pred { pred: senior, args: vec![a, b] };
    vec![
        // reflexivity
        ForallFormula { vars: vec![ROLE], matrix: Nnf::Lit(Literal::pos(at(v(0), v(0)))) },
        // antisymmetry
        ForallFormula {
            vars: vec![ROLE, ROLE],
            matrix: Nnf::Or(vec![
                Nnf::Lit(Literal::neg(at(v(0), v(1)))),
                Nnf::Lit(Literal::neg(at(v(1), v(0)))),
                Nnf::Lit(Literal::pos(Atom::Eq(v(0), v(1)))),
            ]),
        },
        // transitivity
        ForallFormula {
            vars: vec![ROLE, ROLE, ROLE],
            matrix: Nnf::Or(vec![
                Nnf::Lit(Literal::neg(at(v(0), v(1)))),
                Nnf::Lit(Literal::neg(at(v(1), v(2)))),
                Nnf::Lit(Literal::pos(at(v(0), v(2)))),
            ]),
        },
    ]
}

/// Reflexive-transitive closure of the declared pairs over the named roles,
/// with the acyclicity check.
fn hierarchy_closure(
    sig: &Signature,
    base: &[(ConstId, ConstId)],
) -> Result<Vec<(ConstId, ConstId)>, CompileError> {
    let roles = sig.consts_of(ROLE);
    let idx: BTreeMap<ConstId, usize> = roles.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let n = roles.len();
    let mut reach = vec![vec![false; n]; n];
    for (i, _) in roles.iter().enumerate() {
        reach[i][i] = true;
    }
    for (s, j) in base {
        reach[idx[s]][idx[j]] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                let row_k: Vec<bool> = reach[k].clone();
                for (j, &via) in row_k.iter().enumerate() {
                    if via {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && reach[i][j] && reach[j][i] {
                return Err(CompileError::CyclicHierarchy(
                    sig.const_name(roles[i]).into(),
                    sig.const_name(roles[j]).into(),
                ));
            }
        }
    }
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if reach[i][j] {
                out.push((roles[i], roles[j]));
            }
        }
    }
    Ok(out)
}

/// Completion axiom: pa(p, r) holds exactly of the listed pairs.
fn pa_completion(sig: &Signature, pairs: &[(ConstId, ConstId)]) -> ForallFormula {
    let p = Term::Var(VarId(0));
    let r = Term::Var(VarId(1));
    let atom = Nnf::Lit(Literal::pos(Atom::Pred { pred: sig.pa(), args: vec![p, r] }));
    completion(atom, pairs, p, r)
}

/// Clark completion of the listed initial facts: ua(u, r) holds exactly of them.
pub fn clark_completion_ua(sig: &Signature, facts: &[(ConstId, ConstId)]) -> ForallFormula {
    let u = Term::Var(VarId(0));
    let r = Term::Var(VarId(1));
    let atom = Nnf::Lit(Literal::pos(Atom::Pred { pred: sig.ua(), args: vec![u, r] }));
    let mut f = completion(atom, facts, u, r);
    f.vars = vec![USER, ROLE];
    f
}

fn completion(atom: Nnf, pairs: &[(ConstId, ConstId)], x: Term, y: Term) -> ForallFormula {
    let rhs = Nnf::Or(
        pairs
            .iter()
            .map(|(a, b)| {
                Nnf::And(vec![
                    Nnf::Lit(Literal::pos(Atom::Eq(x, Term::Const(*a)))),
                    Nnf::Lit(Literal::pos(Atom::Eq(y, Term::Const(*b)))),
                ])
            })
            .collect(),
    );
    let matrix = Nnf::And(vec![
        Nnf::Or(vec![atom.negated(), rhs.clone()]),
        Nnf::Or(vec![rhs.negated(), atom]),
    ]);
    ForallFormula { vars: vec![PERMISSION, ROLE], matrix }
}

fn smer_formula(sig: &Signature, a: ConstId, b: ConstId) -> ForallFormula {
    let u = Term::Var(VarId(0));
    ForallFormula {
        vars: vec![USER],
        matrix: Nnf::Or(vec![
            Nnf::Lit(Literal::neg(Atom::Pred { pred: sig.ua(), args: vec![u, Term::Const(a)] })),
            Nnf::Lit(Literal::neg(Atom::Pred { pred: sig.ua(), args: vec![u, Term::Const(b)] })),
        ]),
    }
}

/// Resolve a schema-or-role expression in a guard under construction.
/// Returns the role term that names the (possibly parametric) role.
fn role_term(
    ctx: &CompileCtx,
    guard: &mut Cube,
    param_vars: &mut BTreeMap<String, VarId>,
    expr: &SchemaOrRole,
) -> Result<Term, CompileError> {
    match expr {
        SchemaOrRole::Role(name) => Ok(Term::Const(ctx.const_id(name)?)),
        SchemaOrRole::Schema { name, params } => {
            let (pred, arg_sorts) = ctx
                .schemas
                .get(name)
                .or_else(|| ctx.schemas.get(&format!("{}_{}", name, params.len())))
                .ok_or_else(|| CompileError::UnknownSchema(name.clone()))?
                .clone();
            let mut args: Vec<Term> = Vec::new();
            for (pname, sort) in params.iter().zip(&arg_sorts) {
                let v = *param_vars.entry(pname.clone()).or_insert_with(|| guard.push_var(*sort));
                args.push(Term::Var(v));
            }
            let role_var = guard.push_var(ROLE);
            args.push(Term::Var(role_var));
            guard.lits.push(Literal::pos(Atom::Pred { pred, args }));
            Ok(Term::Var(role_var))
        }
    }
}

fn admin_literals(
    ctx: &CompileCtx,
    guard: &mut Cube,
    param_vars: &mut BTreeMap<String, VarId>,
    admin: &SchemaOrRole,
    trusted_excluded: &[String],
) -> Result<(), CompileError> {
    let admin_var = guard.push_var(USER);
    let role = role_term(ctx, guard, param_vars, admin)?;
    match admin {
        SchemaOrRole::Role(_) if ctx.hierarchical => {
            // Implicit membership through the hierarchy, as in the guard
            // ua(u, r) /\ senior(r, r_a).
            expand_ua_star(&ctx.sig, guard, Term::Var(admin_var), role, true)?;
        }
        _ => {
            guard.lits.push(Literal::pos(Atom::Pred {
                pred: ctx.sig.ua(),
                args: vec![Term::Var(admin_var), role],
            }));
        }
    }
    for t in trusted_excluded {
        let tc = ctx.const_id(t)?;
        guard.lits.push(Literal::neg(Atom::Eq(Term::Var(admin_var), Term::Const(tc))));
    }
    Ok(())
}

/// Compile one assignment action into a transition rule.
pub(crate) fn compile_can_assign(
    ctx: &mut CompileCtx,
    decl: &CanAssignDecl,
    index: usize,
    lints: &mut Vec<String>,
) -> Result<TransitionRule, CompileError> {
    let mut guard = Cube::top();
    let mut param_vars: BTreeMap<String, VarId> = BTreeMap::new();
    let subject = guard.push_var(USER);

    if let Some(admin) = &decl.admin {
        admin_literals(ctx, &mut guard, &mut param_vars, admin, &decl.trusted_excluded)?;
    } else if !decl.trusted_excluded.is_empty() {
        lints.push(format!(
            "can_assign #{index}: trusted-user exclusions ignored on an administrator-less action"
        ));
    }

    for expr in &decl.precond {
        match (&expr.role, expr.positive) {
            (SchemaOrRole::Role(name), true) => {
                let role = ctx.const_id(name)?;
                if expr.explicit || !ctx.hierarchical {
                    guard.lits.push(Literal::pos(Atom::Pred {
                        pred: ctx.sig.ua(),
                        args: vec![Term::Var(subject), Term::Const(role)],
                    }));
                } else {
                    expand_ua_star(&ctx.sig, &mut guard, Term::Var(subject), Term::Const(role), true)?;
                }
            }
            (SchemaOrRole::Role(name), false) => {
                if !expr.explicit {
                    return Err(CompileError::NegativeUaStar);
                }
                let role = ctx.const_id(name)?;
                guard.lits.push(Literal::neg(Atom::Pred {
                    pred: ctx.sig.ua(),
                    args: vec![Term::Var(subject), Term::Const(role)],
                }));
            }
            (schema @ SchemaOrRole::Schema { .. }, positive) => {
                if !positive && !expr.explicit {
                    return Err(CompileError::NegativeUaStar);
                }
                let role = role_term(ctx, &mut guard, &mut param_vars, schema)?;
                guard.lits.push(Literal {
                    positive,
                    atom: Atom::Pred { pred: ctx.sig.ua(), args: vec![Term::Var(subject), role] },
                });
            }
        }
    }

    let target_role = role_term(ctx, &mut guard, &mut param_vars, &decl.target)?;
    let label = decl.label.clone().unwrap_or_else(|| format!("assign#{index}"));
    guard.check_sorted(&ctx.sig)?;
    Ok(TransitionRule { kind: RuleKind::Assign, guard, subject, target_role, label })
}

pub(crate) fn compile_can_revoke(
    ctx: &mut CompileCtx,
    decl: &CanRevokeDecl,
    index: usize,
) -> Result<TransitionRule, CompileError> {
    let mut guard = Cube::top();
    let mut param_vars: BTreeMap<String, VarId> = BTreeMap::new();
    let subject = guard.push_var(USER);
    if let Some(admin) = &decl.admin {
        admin_literals(ctx, &mut guard, &mut param_vars, admin, &[])?;
    }
    let target_role = role_term(ctx, &mut guard, &mut param_vars, &decl.target)?;
    let label = decl.label.clone().unwrap_or_else(|| format!("revoke#{index}"));
    guard.check_sorted(&ctx.sig)?;
    Ok(TransitionRule { kind: RuleKind::Revoke, guard, subject, target_role, label })
}

/// Compile the goal declaration into its symbolic form: one cube with a
/// membership conjunct per pair, the role comparison, and the permission
/// binding when present.
pub(crate) fn compile_goal(
    ctx: &CompileCtx,
    goal: &GoalDecl,
    lints: &mut Vec<String>,
    pa_present: bool,
) -> Result<ExistsFormula, CompileError> {
    let mut cube = Cube::top();
    let user_const = match &goal.user {
        Some(name) => Some(ctx.const_id(name)?),
        None => None,
    };
    for pair in &goal.pairs {
        let role = ctx.const_id(&pair.role)?;
        let u = cube.push_var(USER);
        let r = cube.push_var(ROLE);
        cube.lits.push(Literal::pos(Atom::Pred {
            pred: ctx.sig.ua(),
            args: vec![Term::Var(u), Term::Var(r)],
        }));
        match pair.cmp {
            GoalCmp::Eq => cube.lits.push(Literal::pos(Atom::Eq(Term::Var(r), Term::Const(role)))),
            GoalCmp::Senior => cube.lits.push(Literal::pos(Atom::Pred {
                pred: ctx.sig.senior(),
                args: vec![Term::Var(r), Term::Const(role)],
            })),
        }
        if let Some(p) = &pair.permission {
            if !pa_present {
                lints.push(format!(
                    "goal mentions permission `{p}` but no pa section constrains the assignment"
                ));
            }
            let pc = ctx.const_id(p)?;
            let pv = cube.push_var(PERMISSION);
            cube.lits.push(Literal::pos(Atom::Eq(Term::Var(pv), Term::Const(pc))));
            cube.lits.push(Literal::pos(Atom::Pred {
                pred: ctx.sig.pa(),
                args: vec![Term::Var(pv), Term::Var(r)],
            }));
        }
        if let Some(uc) = user_const {
            cube.lits.push(Literal::pos(Atom::Eq(Term::Var(u), Term::Const(uc))));
        }
    }
    cube.check_sorted(&ctx.sig)?;
    Ok(ExistsFormula::single(cube))
}

/// One predicate of arity n+1, a functionality axiom, and a containment
/// axiom when the schema is linked to a coarser one.
pub(crate) fn compile_role_schema(
    ctx: &mut CompileCtx,
    schema: &RoleSchemaDecl,
) -> Result<(PredId, Vec<ForallFormula>), CompileError> {
    let lookup = |ctx: &CompileCtx, name: &str, arity: usize| {
        ctx.schemas
            .get(name)
            .or_else(|| ctx.schemas.get(&format!("{name}_{arity}")))
            .cloned()
    };
    let (pred, arg_sorts) = lookup(ctx, &schema.name, schema.params.len())
        .ok_or_else(|| CompileError::UnknownSchema(schema.name.clone()))?;

    let n = arg_sorts.len() as u32;
    let mut axioms = Vec::new();

    // Functionality: equal parameters pin the role.
    {
        let mut vars = arg_sorts.clone();
        vars.push(ROLE);
        vars.push(ROLE);
        let xs: Vec<Term> = (0..n).map(|i| Term::Var(VarId(i))).collect();
        let r1 = Term::Var(VarId(n));
        let r2 = Term::Var(VarId(n + 1));
        let app = |r: Term| {
            let mut args = xs.clone();
            args.push(r);
            Nnf::Lit(Literal::neg(Atom::Pred { pred, args }))
        };
        axioms.push(ForallFormula {
            vars,
            matrix: Nnf::Or(vec![app(r1), app(r2), Nnf::Lit(Literal::pos(Atom::Eq(r1, r2)))]),
        });
    }

    if let Some(coarser) = &schema.contains {
        // Try any arity up to this schema's; the parameters are a prefix.
        let mut found = None;
        for arity in (0..=arg_sorts.len()).rev() {
            if let Some((cpred, cargs)) = lookup(ctx, coarser, arity) {
                if cargs.len() <= arg_sorts.len() && cargs[..] == arg_sorts[..cargs.len()] {
                    found = Some((cpred, cargs));
                    break;
                }
            }
        }
        let (cpred, cargs) = found.ok_or_else(|| CompileError::UnknownSchema(coarser.clone()))?;
        let mut vars = arg_sorts.clone();
        vars.push(ROLE);
        let r = Term::Var(VarId(n));
        let mut full_args: Vec<Term> = (0..n).map(|i| Term::Var(VarId(i))).collect();
        full_args.push(r);
        let mut prefix_args: Vec<Term> = (0..cargs.len() as u32).map(|i| Term::Var(VarId(i))).collect();
        prefix_args.push(r);
        axioms.push(ForallFormula {
            vars,
            matrix: Nnf::Or(vec![
                Nnf::Lit(Literal::neg(Atom::Pred { pred, args: full_args })),
                Nnf::Lit(Literal::pos(Atom::Pred { pred: cpred, args: prefix_args })),
            ]),
        });
    }

    Ok((pred, axioms))
}

impl SymbolicPolicy {
    /// Stable, human-readable rendering used by determinism tests and debug dumps.
    pub fn describe(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = writeln!(out, "init {}", sexpr::forall_to_sexpr(&self.sig, &self.init));
        for c in &self.constraints {
            let _ = writeln!(out, "constraint {}", sexpr::forall_to_sexpr(&self.sig, c));
        }
        for ax in &self.theory.axioms {
            let _ = writeln!(out, "axiom {}", sexpr::forall_to_sexpr(&self.sig, ax));
        }
        for (s, values) in &self.theory.sv {
            let names: Vec<&str> = values.iter().map(|v| self.sig.const_name(*v)).collect();
            let _ = writeln!(out, "sv {} ({})", self.sig.sorts[s.0 as usize].name, names.join(" "));
        }
        for t in &self.transitions {
            let op = match t.kind {
                RuleKind::Assign => "+",
                RuleKind::Revoke => "-",
            };
            let target = match t.target_role {
                Term::Const(c) => self.sig.const_name(c).to_string(),
                Term::Var(v) => t.guard.var_name(&self.sig, v),
            };
            let _ = writeln!(
                out,
                "rule {} {} {} subject={} guard={}",
                t.label,
                op,
                target,
                t.guard.var_name(&self.sig, t.subject),
                sexpr::cube_to_sexpr(&self.sig, &t.guard)
            );
        }
        out
    }

    /// All SMER-style negative binary clauses over ua, in structured form.
    pub fn smer_pairs(&self) -> &[(ConstId, ConstId)] {
        &self.smer_pairs
    }
}

/// Lookup of goal/trace constants by name, used by the CLI layer.
pub fn named_user(policy: &SymbolicPolicy, name: &str) -> Result<ConstId, CompileError> {
    policy
        .sig
        .const_id(name)
        .filter(|c| policy.sig.const_sort(*c) == USER)
        .ok_or_else(|| CompileError::UndeclaredConstant(name.into()))
}

pub fn named_role(policy: &SymbolicPolicy, name: &str) -> Result<ConstId, CompileError> {
    policy
        .sig
        .const_id(name)
        .filter(|c| policy.sig.const_sort(*c) == ROLE)
        .ok_or_else(|| CompileError::UndeclaredConstant(name.into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn company_decls() -> PolicyDecls {
        parse::parse_policy(include_str!("../../../../policies/company.policy")).unwrap()
    }

    #[test]
    fn company_policy_compiles() {
        let decls = company_decls();
        let compiled = compile_policy(&decls).unwrap();
        assert_eq!(compiled.policy.transitions.len(), 7);
        assert!(compiled.policy.hierarchical);
        assert!(compiled.goal.is_some());
    }

    #[test]
    fn admin_guard_follows_running_example() {
        // <Manager, {Engineer, FullTime}, ProjectLead> with Carol excluded:
        // ua(u,r), senior(r,Manager), u != Carol, then two implicit
        // membership pairs for the subject, update adds ProjectLead.
        let decls = company_decls();
        let compiled = compile_policy(&decls).unwrap();
        let rule = &compiled.policy.transitions[0];
        assert_eq!(rule.kind, RuleKind::Assign);
        let sig = &compiled.policy.sig;
        assert_eq!(rule.target_role, Term::Const(sig.const_id("ProjectLead").unwrap()));
        // 2 admin literals + 1 disequality + 2*2 subject literals = 7.
        assert_eq!(rule.guard.lits.len(), 7);
        let ua_count = rule
            .guard
            .lits
            .iter()
            .filter(|l| matches!(&l.atom, Atom::Pred { pred, .. } if *pred == sig.ua()))
            .count();
        assert_eq!(ua_count, 3);
        let senior_count = rule
            .guard
            .lits
            .iter()
            .filter(|l| matches!(&l.atom, Atom::Pred { pred, .. } if *pred == sig.senior()))
            .count();
        assert_eq!(senior_count, 3);
        let neq = rule.guard.lits.iter().any(|l| !l.positive && matches!(&l.atom, Atom::Eq(..)));
        assert!(neq, "the trusted-user set compiles to a disequality on the administrator");
    }

    #[test]
    fn empty_policy_compiles_to_empty_init() {
        let decls = PolicyDecls {
            user: SortSection { scalar: true, consts: vec!["u0".into()] },
            role: SortSection { scalar: true, consts: vec!["r0".into()] },
            ..PolicyDecls::default()
        };
        let compiled = compile_policy(&decls).unwrap();
        assert!(compiled.policy.transitions.is_empty());
        // In = forall u,r. not ua(u,r): the completion of no facts.
        let sig = compiled.policy.sig.clone();
        let config = crate::fol::config::Configuration::from_parts(
            sig.clone(),
            vec![1, 1, 1],
            vec![0, 0],
            vec![BTreeSet::new(); sig.preds.len()],
        );
        assert!(crate::oracle::eval::eval_forall(&config, &compiled.policy.init).unwrap());
    }

    #[test]
    fn cyclic_hierarchy_is_rejected() {
        let mut decls = PolicyDecls {
            role: SortSection { scalar: true, consts: vec!["a".into(), "b".into()] },
            user: SortSection { scalar: true, consts: vec!["u".into()] },
            ..PolicyDecls::default()
        };
        decls.hierarchy = vec![("a".into(), "b".into()), ("b".into(), "a".into())];
        match compile_policy(&decls) {
            Err(CompileError::CyclicHierarchy(..)) => {}
            other => panic!("expected cycle error, got {other:?}"),
        }
    }

    #[test]
    fn implicit_negative_precondition_is_rejected() {
        let mut decls = PolicyDecls {
            user: SortSection { scalar: true, consts: vec!["u".into()] },
            role: SortSection { scalar: true, consts: vec!["a".into(), "b".into()] },
            ..PolicyDecls::default()
        };
        decls.can_assign.push(CanAssignDecl {
            admin: None,
            precond: vec![RoleExprDecl {
                role: SchemaOrRole::Role("a".into()),
                positive: false,
                explicit: false,
            }],
            target: SchemaOrRole::Role("b".into()),
            trusted_excluded: vec![],
            label: None,
        });
        match compile_policy(&decls) {
            Err(CompileError::NegativeUaStar) => {}
            other => panic!("expected NegativeUaStar, got {other:?}"),
        }
    }

    #[test]
    fn schema_functionality_axiom_shape() {
        let mut decls = PolicyDecls {
            user: SortSection { scalar: true, consts: vec!["u".into()] },
            role: SortSection { scalar: false, consts: vec![] },
            ..PolicyDecls::default()
        };
        decls.schemas.push(RoleSchemaDecl { name: "Chair".into(), params: vec!["dept".into()], contains: None });
        let compiled = compile_policy(&decls).unwrap();
        let sig = &compiled.policy.sig;
        let chair = sig.pred_id("Chair").unwrap();
        assert_eq!(sig.pred_args(chair).len(), 2);
        // The functionality axiom quantifies over dept, r1, r2.
        let func = compiled
            .policy
            .theory
            .axioms
            .iter()
            .find(|a| a.vars.len() == 3)
            .expect("functionality axiom present");
        assert_eq!(func.vars[1], ROLE);
        assert_eq!(func.vars[2], ROLE);
    }

    #[test]
    fn student_containment_axiom() {
        let mut decls = PolicyDecls {
            user: SortSection { scalar: true, consts: vec!["u".into()] },
            ..PolicyDecls::default()
        };
        decls.schemas.push(RoleSchemaDecl {
            name: "Student".into(),
            params: vec!["dept".into(), "cid".into()],
            contains: Some("Student1".into()),
        });
        decls.schemas.push(RoleSchemaDecl { name: "Student1".into(), params: vec!["dept".into()], contains: None });
        let compiled = compile_policy(&decls).unwrap();
        let sig = &compiled.policy.sig;
        assert!(sig.pred_id("Student").is_some());
        assert!(sig.pred_id("Student1").is_some());
        // Containment: forall dept, cid, r. Student(dept,cid,r) => Student1(dept,r).
        let containment = compiled
            .policy
            .theory
            .axioms
            .iter()
            .any(|a| a.vars.len() == 3 && matches!(&a.matrix, Nnf::Or(xs) if xs.len() == 2));
        assert!(containment);
    }
}
