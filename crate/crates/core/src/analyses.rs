//! Derived security analyses: inductive policy invariants, role containment
//! via a reduction to reachability, and weakest preconditions computed by a
//! forest-shaped backward search.

use crate::fol::config::{formula_to_configs, ConfigError, Configuration};
use crate::fol::{
    negate_exists, negate_forall, Atom, ConstId, Cube, ExistsFormula, ForallFormula, Literal, Nnf,
    Term, ROLE, USER,
};
use crate::policy::{
    CanAssignDecl, CompileError, CompiledPolicy, GoalCmp, GoalDecl, GoalPair, RoleExprDecl,
    RuleKind, SchemaOrRole, SymbolicPolicy,
};
use crate::preimage::{pre_image, simplify};
use crate::reach::{
    backward_reach, strengthen_with_smer, ReachConfig, ReachError, ReachVerdict, TraceStep,
};
use crate::solver::{check_sat, BsrProblem, Budget, SolverError, Verdict};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum AnalysisError {
    #[error("role containment requires a flat policy, but a hierarchy is declared")]
    HierarchyPresent,
    #[error("distinct roles required")]
    RolesNotDistinct,
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Reach(#[from] ReachError),
    #[error("model enumeration failed: {0}")]
    Config(#[from] ConfigError),
    #[error("forest budget of {0} nodes exceeded")]
    ForestBudget(usize),
}

#[derive(Debug)]
pub enum InvariantOutcome {
    Holds,
    /// The base case fails: an initial state violates the candidate.
    FailsInit(Configuration),
    /// Some step breaks the candidate; the witness satisfies the guard and
    /// the pre-state invariant but not the post-state one.
    FailsStep { rule: String, countermodel: Configuration },
}

/// Replace each occurrence of the state predicate in an NNF matrix by the
/// update expression of a rule whose existential variables have been fixed
/// to constants.
fn apply_update_nnf(
    m: &Nnf,
    ua: crate::fol::PredId,
    add: bool,
    subject: Term,
    role: Term,
) -> Nnf {
    m.map_literals(&mut |lit| {
        let args = match &lit.atom {
            Atom::Pred { pred, args } if *pred == ua => args.clone(),
            other => {
                return Nnf::Lit(Literal { positive: lit.positive, atom: other.clone() });
            }
        };
        let (a, b) = (args[0], args[1]);
        let hit = Nnf::And(vec![
            Nnf::Lit(Literal::pos(Atom::Eq(a, subject))),
            Nnf::Lit(Literal::pos(Atom::Eq(b, role))),
        ]);
        let cur = Nnf::Lit(Literal { positive: true, atom: lit.atom.clone() });
        let updated = if add {
            Nnf::Or(vec![hit, cur])
        } else {
            Nnf::And(vec![hit.negated(), cur])
        };
        if lit.positive {
            updated
        } else {
            updated.negated()
        }
    })
}

/// Is the universal sentence an inductive invariant: implied by the initial
/// sentence, and preserved by every constrained step?
pub fn check_inductive_invariant(
    policy: &SymbolicPolicy,
    psi: &ForallFormula,
    budget: &Budget,
) -> Result<InvariantOutcome, AnalysisError> {
    let sig = &policy.sig;

    // (a) init => psi, refuted by init /\ not psi.
    let p = BsrProblem::with_theory(sig.clone(), &policy.theory)
        .forall(&policy.init)
        .exists(&negate_forall(psi));
    let r = check_sat(&p, budget)?;
    if r.verdict == Verdict::Sat {
        return Ok(InvariantOutcome::FailsInit(r.model.expect("sat carries model")));
    }

    // (b) per rule: constraints /\ psi /\ guard /\ not psi' unsatisfiable,
    // where psi' reads ua through the update.
    for rule in &policy.transitions {
        // Fix the rule's existential variables as fresh constants.
        let mut sig2 = (**sig).clone();
        let consts: Vec<ConstId> = rule
            .guard
            .vars
            .iter()
            .enumerate()
            .map(|(i, s)| sig2.add_const(&format!("!step{i}"), *s).expect("fresh step skolem"))
            .collect();
        let ground = |t: Term| match t {
            Term::Var(v) => Term::Const(consts[v.0 as usize]),
            c => c,
        };
        let guard_cube = Cube {
            vars: vec![],
            lits: rule.guard.lits.iter().map(|l| l.map_terms(&mut |t| ground(t))).collect(),
        };
        let subject = ground(Term::Var(rule.subject));
        let role = ground(rule.target_role);

        let psi_post = ForallFormula {
            vars: psi.vars.clone(),
            matrix: apply_update_nnf(
                &psi.matrix,
                sig.ua(),
                rule.kind == RuleKind::Assign,
                subject,
                role,
            ),
        };

        let sig2 = std::sync::Arc::new(sig2);
        let mut p = BsrProblem::with_theory(sig2, &policy.theory)
            .forall(psi)
            .exists(&ExistsFormula::single(guard_cube))
            .exists(&negate_forall(&psi_post));
        for c in &policy.constraints {
            p = p.forall(c);
        }
        let r = check_sat(&p, budget)?;
        if r.verdict == Verdict::Sat {
            return Ok(InvariantOutcome::FailsStep {
                rule: rule.label.clone(),
                countermodel: r.model.expect("sat carries model"),
            });
        }
    }
    Ok(InvariantOutcome::Holds)
}

#[derive(Debug)]
pub enum ContainmentOutcome {
    Holds,
    Violated { witness: Vec<TraceStep> },
    Inconclusive,
}

/// Does every member of `r1` also hold `r2` in every reachable state? The
/// reduction adds a fresh role and an action granting it exactly to a user
/// holding `r1` but not `r2`; containment holds iff that role is
/// unreachable. The subject of the probe action is the user whose
/// memberships are inspected.
pub fn role_containment(
    compiled: &CompiledPolicy,
    r1: &str,
    r2: &str,
    cfg: &ReachConfig,
) -> Result<ContainmentOutcome, AnalysisError> {
    if !compiled.decls.hierarchy.is_empty() {
        return Err(AnalysisError::HierarchyPresent);
    }
    if r1 == r2 {
        return Err(AnalysisError::RolesNotDistinct);
    }
    let mut decls = compiled.decls.clone();
    let mut witness = "containment_probe_role".to_string();
    while decls.role.consts.contains(&witness) {
        witness.push('_');
    }
    decls.role.consts.push(witness.clone());
    decls.can_assign.push(CanAssignDecl {
        admin: None,
        precond: vec![
            RoleExprDecl { role: SchemaOrRole::Role(r1.into()), positive: true, explicit: true },
            RoleExprDecl { role: SchemaOrRole::Role(r2.into()), positive: false, explicit: true },
        ],
        target: SchemaOrRole::Role(witness.clone()),
        trusted_excluded: vec![],
        label: Some("containment_probe".into()),
    });
    decls.goal = Some(GoalDecl {
        user: None,
        pairs: vec![GoalPair { role: witness, cmp: GoalCmp::Eq, permission: None }],
    });

    let probe = crate::policy::compile_policy(&decls)?;
    let result = backward_reach(&probe.policy, probe.goal.as_ref().unwrap(), cfg)?;
    Ok(match result.verdict {
        ReachVerdict::Unreachable => ContainmentOutcome::Holds,
        ReachVerdict::Reachable => {
            ContainmentOutcome::Violated { witness: result.trace.unwrap_or_default() }
        }
        ReachVerdict::Inconclusive => ContainmentOutcome::Inconclusive,
    })
}

#[derive(Debug, Clone)]
pub struct WpResult {
    /// Pairwise incomparable minimal initial role-membership sets of the
    /// designated user under which the goal is reachable.
    pub minimal_sets: Vec<BTreeSet<String>>,
    pub forest_nodes: usize,
    pub expanded_nodes: usize,
}

/// Minimal initial role memberships of `user` that make the goal reachable.
/// Backward forest search: roots are the goal cubes, children are per-rule
/// pre-image cubes, and a node is closed when the disjunction of the other
/// nodes already covers it under the constraints. On termination every node
/// is turned into its finite models, projected onto the user's memberships
/// and minimized.
pub fn weakest_precondition(
    compiled: &CompiledPolicy,
    goal: &ExistsFormula,
    user: &str,
    cfg: &ReachConfig,
    max_nodes: usize,
) -> Result<WpResult, AnalysisError> {
    let policy = &compiled.policy;
    let sig = &policy.sig;
    let theory = &policy.theory;
    let user_const = sig
        .const_id(user)
        .ok_or_else(|| AnalysisError::Compile(CompileError::UndeclaredConstant(user.into())))?;

    let mut nodes: Vec<Cube> = Vec::new();
    let mut expanded = 0usize;
    let prepared = simplify(sig, goal, theory);
    for cube in prepared.cubes {
        if let Some(c) = strengthen_with_smer(sig, &cube, &policy.smer_pairs) {
            nodes.push(c);
        }
    }
    let mut worklist: Vec<usize> = (0..nodes.len()).collect();

    let mut head = 0usize;
    while head < worklist.len() {
        let id = worklist[head];
        head += 1;
        if nodes.len() > max_nodes {
            return Err(AnalysisError::ForestBudget(max_nodes));
        }

        // Fixpoint test against the disjunction of all other nodes.
        let others = ExistsFormula {
            cubes: nodes
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != id)
                .map(|(_, c)| c.clone())
                .collect(),
        };
        let mut p = BsrProblem::with_theory(sig.clone(), theory)
            .exists(&ExistsFormula::single(nodes[id].clone()));
        for c in &policy.constraints {
            p = p.forall(c);
        }
        if !others.cubes.is_empty() {
            p = p.forall(&negate_exists(&others));
        }
        let novel = check_sat(&p, &cfg.budget)?.verdict == Verdict::Sat;
        if !novel {
            continue;
        }

        expanded += 1;
        for rule in &policy.transitions {
            let single = ExistsFormula::single(nodes[id].clone());
            let pre = simplify(sig, &pre_image(sig, rule, &single, theory), theory);
            for cube in pre.cubes {
                if let Some(c) = strengthen_with_smer(sig, &cube, &policy.smer_pairs) {
                    if !nodes.contains(&c) {
                        nodes.push(c);
                        worklist.push(nodes.len() - 1);
                    }
                }
            }
        }
    }

    // Convert every node to configurations and project.
    let mut bounds = vec![0usize; sig.sorts.len()];
    for (s, _) in sig.sorts.iter().enumerate() {
        let sid = crate::fol::SortId(s as u32);
        bounds[s] = match theory.sv_values(sid) {
            Some(vs) => vs.len(),
            None => sig.consts_of(sid).len().max(usize::from(s == USER.0 as usize || s == ROLE.0 as usize)),
        };
    }

    let mut sets: Vec<BTreeSet<ConstId>> = Vec::new();
    for cube in &nodes {
        let configs = formula_to_configs(&ExistsFormula::single(cube.clone()), theory, sig, &bounds)?;
        for cfg_model in configs {
            let user_elem = cfg_model.elem_of_const(user_const);
            let ua = sig.ua().0 as usize;
            let mut set: BTreeSet<ConstId> = BTreeSet::new();
            for role in sig.consts_of(ROLE) {
                let relem = cfg_model.elem_of_const(role);
                if cfg_model.preds[ua].contains(&vec![user_elem, relem]) {
                    set.insert(role);
                }
            }
            sets.push(set);
        }
    }

    // Antichain of subset-minimal sets.
    sets.sort_by_key(|s| s.len());
    let mut minimal: Vec<BTreeSet<ConstId>> = Vec::new();
    for s in sets {
        if !minimal.iter().any(|m| m.is_subset(&s)) {
            minimal.push(s);
        }
    }

    let minimal_sets = minimal
        .into_iter()
        .map(|s| s.iter().map(|c| sig.const_name(*c).to_string()).collect())
        .collect();
    Ok(WpResult { minimal_sets, forest_nodes: nodes.len(), expanded_nodes: expanded })
}
