//! Backward reachability over existential formulae: the core loop keeps a
//! frontier P and the accumulated set B, tests safety against the initial
//! sentence and fixpoint against B, and computes pre-images until one of
//! them closes. The default mode refines the loop per transition with local
//! fixpoint tests; a monolithic mode follows the textbook loop verbatim.
//! A bounded-unfolding check over distinct state copies complements it.

use crate::fol::config::Configuration;
use crate::fol::{
    negate_exists, replace_pred_cube, replace_pred_forall, Atom, ConstId, Cube, ExistsFormula,
    ForallFormula, Literal, Nnf, Term, VarId, ROLE, USER,
};
use crate::oracle::eval::{eval_cube, eval_exists, eval_forall};
use crate::oracle::successors_via_rule;
use crate::policy::{RuleKind, SymbolicPolicy};
use crate::preimage::{pre_image, simplify};
use crate::solver::{check_sat, BsrProblem, Budget, GExpr, GroundBuilder, SolverError, Verdict};
use serde::Serialize;
use std::time::Instant;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum ReachError {
    #[error("trace replay failed at step {0}; this indicates a soundness bug")]
    TraceReplay(usize),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Clone, Debug)]
pub struct ReachConfig {
    /// Per-transition refinement with local fixpoint tests (default), or the
    /// verbatim monolithic loop for conformance runs.
    pub per_transition: bool,
    /// Conjoin the constraints into the safety test as well.
    pub strict_l0_constraints: bool,
    /// Drop frontier cubes entailed by the rest of the frontier (solver cost).
    pub semantic_subsumption: bool,
    /// Strengthen frontier cubes with consequences of the mutual-exclusion
    /// constraints. Only meaningful in per-transition mode.
    pub saturate_constraints: bool,
    pub max_iterations: usize,
    pub budget: Budget,
    pub record_b_snapshots: bool,
}

impl Default for ReachConfig {
    fn default() -> ReachConfig {
        ReachConfig {
            per_transition: true,
            strict_l0_constraints: false,
            semantic_subsumption: false,
            saturate_constraints: true,
            max_iterations: 10_000,
            budget: Budget::default(),
            record_b_snapshots: false,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub enum ReachVerdict {
    Reachable,
    Unreachable,
    Inconclusive,
}

#[derive(Clone, Debug)]
pub struct TraceStep {
    pub rule: Option<String>,
    pub state: Configuration,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub frontier_cubes: usize,
    pub subsumed_cubes: usize,
    pub new_cubes: usize,
    pub solver_calls: u64,
    pub wall_ms: u128,
}

#[derive(Debug)]
pub struct ReachResult {
    pub verdict: ReachVerdict,
    /// Iterations performed; on reachable, the length of the found run.
    pub steps: usize,
    pub trace: Option<Vec<TraceStep>>,
    /// The accumulated set B when the search closed.
    pub fixpoint: Option<ExistsFormula>,
    pub iterations: Vec<IterationStats>,
    pub solver_calls: u64,
    pub b_snapshots: Vec<ExistsFormula>,
    pub inconclusive_reason: Option<String>,
}

struct Node {
    cube: Cube,
    rule: Option<usize>,
    parent: Option<usize>,
    depth: usize,
}

/// Strengthen a cube with consequences of the mutual-exclusion pairs: a
/// positive ua literal on a constrained role forbids the partner role for
/// the same user term. None when the cube contradicts the constraints.
pub fn strengthen_with_smer(
    sig: &crate::fol::Signature,
    cube: &Cube,
    smer: &[(ConstId, ConstId)],
) -> Option<Cube> {
    if smer.is_empty() {
        return Some(cube.clone());
    }
    let ua = sig.ua();
    let mut lits = cube.lits.clone();
    let mut added: Vec<Literal> = Vec::new();
    for lit in &cube.lits {
        if !lit.positive {
            continue;
        }
        if let Atom::Pred { pred, args } = &lit.atom {
            if *pred != ua {
                continue;
            }
            let (user, role) = (args[0], args[1]);
            let role_const = match role {
                Term::Const(c) => c,
                Term::Var(_) => continue,
            };
            for (a, b) in smer {
                let partner = if *a == role_const {
                    *b
                } else if *b == role_const {
                    *a
                } else {
                    continue;
                };
                let forbidden = Literal::neg(Atom::Pred {
                    pred: ua,
                    args: vec![user, Term::Const(partner)],
                });
                if lits.contains(&forbidden.negated()) {
                    return None;
                }
                if !lits.contains(&forbidden) && !added.contains(&forbidden) {
                    added.push(forbidden);
                }
            }
        }
    }
    lits.extend(added);
    Some(crate::fol::canon::canonicalize(&Cube { vars: cube.vars.clone(), lits }))
}

pub fn backward_reach(
    policy: &SymbolicPolicy,
    goal: &ExistsFormula,
    cfg: &ReachConfig,
) -> Result<ReachResult, ReachError> {
    let sig = &policy.sig;
    let theory = &policy.theory;
    let mut solver_calls: u64 = 0;
    let mut iterations: Vec<IterationStats> = Vec::new();
    let mut b_snapshots: Vec<ExistsFormula> = Vec::new();

    let mut nodes: Vec<Node> = Vec::new();
    let mut frontier: Vec<usize> = Vec::new();
    let prepared = simplify(sig, goal, theory);
    for cube in prepared.cubes {
        let cube = if cfg.per_transition && cfg.saturate_constraints {
            match strengthen_with_smer(sig, &cube, &policy.smer_pairs) {
                Some(c) => c,
                None => continue,
            }
        } else {
            cube
        };
        nodes.push(Node { cube, rule: None, parent: None, depth: 0 });
        frontier.push(nodes.len() - 1);
    }

    let mut b_cubes: Vec<Cube> = Vec::new();
    let mut neg_b: Vec<ForallFormula> = Vec::new();

    let inconclusive = |reason: String,
                        b_cubes: &[Cube],
                        iterations: Vec<IterationStats>,
                        solver_calls: u64,
                        b_snapshots: Vec<ExistsFormula>,
                        steps: usize| ReachResult {
        verdict: ReachVerdict::Inconclusive,
        steps,
        trace: None,
        fixpoint: Some(ExistsFormula { cubes: b_cubes.to_vec() }),
        iterations,
        solver_calls,
        b_snapshots,
        inconclusive_reason: Some(reason),
    };

    let mut iteration = 0usize;
    loop {
        let iter_start = Instant::now();
        let mut stats = IterationStats { iteration, frontier_cubes: frontier.len(), ..Default::default() };

        if iteration > cfg.max_iterations {
            return Ok(inconclusive(
                format!("iteration cap {} exceeded", cfg.max_iterations),
                &b_cubes,
                iterations,
                solver_calls,
                b_snapshots,
                iteration,
            ));
        }

        let mut alive: Vec<usize> = Vec::new();
        if cfg.per_transition {
            for &id in &frontier {
                let cube = nodes[id].cube.clone();
                // Local fixpoint: does the cube add constraint-satisfying
                // states beyond B?
                let mut p = BsrProblem::with_theory(sig.clone(), theory)
                    .exists(&ExistsFormula::single(cube.clone()));
                for c in &policy.constraints {
                    p = p.forall(c);
                }
                for nb in &neg_b {
                    p = p.forall(nb);
                }
                solver_calls += 1;
                stats.solver_calls += 1;
                let novel = match check_sat(&p, &cfg.budget) {
                    Ok(r) => r.verdict == Verdict::Sat,
                    Err(SolverError::Timeout { .. }) => {
                        return Ok(inconclusive(
                            "solver budget exhausted in fixpoint check".into(),
                            &b_cubes,
                            iterations,
                            solver_calls,
                            b_snapshots,
                            iteration,
                        ))
                    }
                    Err(e) => return Err(e.into()),
                };
                if !novel {
                    stats.subsumed_cubes += 1;
                    continue;
                }

                // Safety: does the cube intersect the initial states?
                let mut p = BsrProblem::with_theory(sig.clone(), theory)
                    .exists(&ExistsFormula::single(cube.clone()))
                    .forall(&policy.init);
                if cfg.strict_l0_constraints {
                    for c in &policy.constraints {
                        p = p.forall(c);
                    }
                }
                solver_calls += 1;
                stats.solver_calls += 1;
                match check_sat(&p, &cfg.budget) {
                    Ok(r) if r.verdict == Verdict::Sat => {
                        let model = r.model.expect("sat result carries a model");
                        let trace = extract_trace(policy, &nodes, id, model)?;
                        stats.wall_ms = iter_start.elapsed().as_millis();
                        iterations.push(stats);
                        return Ok(ReachResult {
                            verdict: ReachVerdict::Reachable,
                            steps: nodes[id].depth,
                            trace: Some(trace),
                            fixpoint: None,
                            iterations,
                            solver_calls,
                            b_snapshots,
                            inconclusive_reason: None,
                        });
                    }
                    Ok(_) => {}
                    Err(SolverError::Timeout { .. }) => {
                        return Ok(inconclusive(
                            "solver budget exhausted in safety check".into(),
                            &b_cubes,
                            iterations,
                            solver_calls,
                            b_snapshots,
                            iteration,
                        ))
                    }
                    Err(e) => return Err(e.into()),
                }

                alive.push(id);
                neg_b.push(negate_exists(&ExistsFormula::single(cube.clone())));
                b_cubes.push(cube);
            }
        } else {
            // Monolithic conformance mode: one fixpoint check and one safety
            // check over the whole frontier formula.
            let p_formula = ExistsFormula {
                cubes: frontier.iter().map(|&id| nodes[id].cube.clone()).collect(),
            };
            let mut p = BsrProblem::with_theory(sig.clone(), theory).exists(&p_formula);
            for c in &policy.constraints {
                p = p.forall(c);
            }
            for nb in &neg_b {
                p = p.forall(nb);
            }
            solver_calls += 1;
            stats.solver_calls += 1;
            let novel = match check_sat(&p, &cfg.budget) {
                Ok(r) => r.verdict == Verdict::Sat,
                Err(SolverError::Timeout { .. }) => {
                    return Ok(inconclusive(
                        "solver budget exhausted in fixpoint check".into(),
                        &b_cubes,
                        iterations,
                        solver_calls,
                        b_snapshots,
                        iteration,
                    ))
                }
                Err(e) => return Err(e.into()),
            };
            if novel {
                let mut p = BsrProblem::with_theory(sig.clone(), theory)
                    .exists(&p_formula)
                    .forall(&policy.init);
                if cfg.strict_l0_constraints {
                    for c in &policy.constraints {
                        p = p.forall(c);
                    }
                }
                solver_calls += 1;
                stats.solver_calls += 1;
                match check_sat(&p, &cfg.budget) {
                    Ok(r) if r.verdict == Verdict::Sat => {
                        let model = r.model.expect("sat result carries a model");
                        // Find the frontier cube the model satisfies.
                        let id = frontier
                            .iter()
                            .copied()
                            .find(|&id| eval_cube(&model, &nodes[id].cube).unwrap_or(false))
                            .ok_or(ReachError::TraceReplay(0))?;
                        let trace = extract_trace(policy, &nodes, id, model)?;
                        stats.wall_ms = iter_start.elapsed().as_millis();
                        iterations.push(stats);
                        return Ok(ReachResult {
                            verdict: ReachVerdict::Reachable,
                            steps: nodes[id].depth,
                            trace: Some(trace),
                            fixpoint: None,
                            iterations,
                            solver_calls,
                            b_snapshots,
                            inconclusive_reason: None,
                        });
                    }
                    Ok(_) => {}
                    Err(SolverError::Timeout { .. }) => {
                        return Ok(inconclusive(
                            "solver budget exhausted in safety check".into(),
                            &b_cubes,
                            iterations,
                            solver_calls,
                            b_snapshots,
                            iteration,
                        ))
                    }
                    Err(e) => return Err(e.into()),
                }
                for &id in &frontier {
                    let cube = nodes[id].cube.clone();
                    neg_b.push(negate_exists(&ExistsFormula::single(cube.clone())));
                    b_cubes.push(cube);
                    alive.push(id);
                }
            }
        }

        if cfg.record_b_snapshots {
            b_snapshots.push(ExistsFormula { cubes: b_cubes.clone() });
        }

        stats.new_cubes = alive.len();
        stats.wall_ms = iter_start.elapsed().as_millis();
        iterations.push(stats);

        if alive.is_empty() {
            return Ok(ReachResult {
                verdict: ReachVerdict::Unreachable,
                steps: iteration,
                trace: None,
                fixpoint: Some(ExistsFormula { cubes: b_cubes }),
                iterations,
                solver_calls,
                b_snapshots,
                inconclusive_reason: None,
            });
        }

        // Expand: per-rule pre-images of every live cube, in rule order.
        let mut next_frontier: Vec<usize> = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        for (rule_idx, rule) in policy.transitions.iter().enumerate() {
            for &id in &alive {
                let single = ExistsFormula::single(nodes[id].cube.clone());
                let pre = simplify(sig, &pre_image(sig, rule, &single, theory), theory);
                for cube in pre.cubes {
                    let cube = if cfg.per_transition && cfg.saturate_constraints {
                        match strengthen_with_smer(sig, &cube, &policy.smer_pairs) {
                            Some(c) => c,
                            None => continue,
                        }
                    } else {
                        cube
                    };
                    if !seen.insert(format!("{cube:?}")) {
                        continue;
                    }
                    nodes.push(Node { cube, rule: Some(rule_idx), parent: Some(id), depth: iteration + 1 });
                    next_frontier.push(nodes.len() - 1);
                }
            }
        }

        if cfg.semantic_subsumption {
            next_frontier = prune_entailed(policy, &nodes, next_frontier, &cfg.budget, &mut solver_calls)?;
        }

        frontier = next_frontier;
        iteration += 1;
    }
}

/// Drop frontier cubes entailed by the disjunction of the others.
fn prune_entailed(
    policy: &SymbolicPolicy,
    nodes: &[Node],
    frontier: Vec<usize>,
    budget: &Budget,
    solver_calls: &mut u64,
) -> Result<Vec<usize>, ReachError> {
    let mut kept: Vec<usize> = Vec::new();
    for (i, &id) in frontier.iter().enumerate() {
        let others: Vec<Cube> = frontier
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i && (*j > i || kept.contains(&frontier[*j])))
            .map(|(_, &jid)| nodes[jid].cube.clone())
            .collect();
        if others.is_empty() {
            kept.push(id);
            continue;
        }
        *solver_calls += 1;
        let entailed = crate::solver::entails(
            &policy.sig,
            &policy.theory,
            &ExistsFormula::single(nodes[id].cube.clone()),
            &ExistsFormula { cubes: others },
            &[],
            budget,
        )?;
        if !entailed {
            kept.push(id);
        }
    }
    Ok(kept)
}

/// Walk the provenance chain from the cube that met the initial states back
/// to the goal cube, instantiating each step on concrete structures.
fn extract_trace(
    policy: &SymbolicPolicy,
    nodes: &[Node],
    hit: usize,
    initial_model: Configuration,
) -> Result<Vec<TraceStep>, ReachError> {
    let mut chain = vec![hit];
    while let Some(p) = nodes[*chain.last().unwrap()].parent {
        chain.push(p);
    }

    let mut trace = vec![TraceStep { rule: None, state: initial_model }];
    for step in 0..chain.len() - 1 {
        let node = &nodes[chain[step]];
        let rule_idx = node.rule.ok_or(ReachError::TraceReplay(step))?;
        let rule = &policy.transitions[rule_idx];
        let target_cube = &nodes[chain[step + 1]].cube;
        let current = trace.last().unwrap().state.clone();
        let successors = successors_via_rule(&current, rule);
        let constraint_ok = |s: &Configuration| {
            policy.constraints.iter().all(|c| eval_forall(s, c).unwrap_or(false))
        };
        let matching: Vec<Configuration> = successors
            .into_iter()
            .filter(|s| eval_cube(s, target_cube).unwrap_or(false))
            .collect();
        let chosen = matching
            .iter()
            .find(|s| constraint_ok(s))
            .or_else(|| matching.first())
            .cloned()
            .ok_or(ReachError::TraceReplay(step))?;
        trace.push(TraceStep { rule: Some(rule.label.clone()), state: chosen });
    }
    Ok(trace)
}

/// Validate a trace against the concrete semantics: the first state models
/// the initial sentence, every step is a legal application of its rule,
/// every state satisfies the constraints, and the last state satisfies the
/// goal.
pub fn replay_trace(
    policy: &SymbolicPolicy,
    goal: &ExistsFormula,
    trace: &[TraceStep],
) -> Result<(), ReachError> {
    let first = trace.first().ok_or(ReachError::TraceReplay(0))?;
    if !eval_forall(&first.state, &policy.init).unwrap_or(false) {
        return Err(ReachError::TraceReplay(0));
    }
    for (i, step) in trace.iter().enumerate() {
        for c in &policy.constraints {
            if !eval_forall(&step.state, c).unwrap_or(false) {
                return Err(ReachError::TraceReplay(i));
            }
        }
    }
    for i in 1..trace.len() {
        let label = trace[i].rule.as_deref().ok_or(ReachError::TraceReplay(i))?;
        let rule = policy
            .transitions
            .iter()
            .find(|r| r.label == label)
            .ok_or(ReachError::TraceReplay(i))?;
        let succs = successors_via_rule(&trace[i - 1].state, rule);
        if !succs.contains(&trace[i].state) {
            return Err(ReachError::TraceReplay(i));
        }
    }
    let last = trace.last().unwrap();
    if !eval_exists(&last.state, goal).unwrap_or(false) {
        return Err(ReachError::TraceReplay(trace.len()));
    }
    Ok(())
}

/// The bounded-unfolding check: is the goal reachable in exactly the given
/// number of steps, with every state on the run satisfying the constraints?
/// Built over distinct copies of the state predicate and decided directly.
pub fn bounded_reach(
    policy: &SymbolicPolicy,
    goal: &ExistsFormula,
    steps: usize,
    budget: &Budget,
) -> Result<Verdict, SolverError> {
    let sig = &policy.sig;
    let ua = sig.ua();
    let mut b = GroundBuilder::new(sig, &policy.theory.sv);

    let copies: Vec<_> = (0..=steps)
        .map(|i| b.add_pred(&format!("ua!{i}"), vec![USER, ROLE]))
        .collect();

    for ax in &policy.theory.axioms {
        b.assert_forall(ax);
    }
    b.assert_forall(&replace_pred_forall(&policy.init, ua, copies[0]));
    for copy in &copies {
        for c in &policy.constraints {
            b.assert_forall(&replace_pred_forall(c, ua, *copy));
        }
    }

    for i in 0..steps {
        let mut disjuncts = Vec::new();
        for rule in &policy.transitions {
            let guard = replace_pred_cube(&rule.guard, ua, copies[i]);
            let (consts, lits) = b.skolemize_cube(&guard);
            let subject = Term::Const(consts[rule.subject.0 as usize]);
            let target = match rule.target_role {
                Term::Var(v) => Term::Const(consts[v.0 as usize]),
                c => c,
            };

            // ua_{i+1}(w, v) holds iff the update of ua_i says so.
            let w = Term::Var(VarId(0));
            let v = Term::Var(VarId(1));
            let next_atom = Atom::Pred { pred: copies[i + 1], args: vec![w, v] };
            let cur_lit = Nnf::Lit(Literal::pos(Atom::Pred { pred: copies[i], args: vec![w, v] }));
            let update = match rule.kind {
                RuleKind::Assign => Nnf::Or(vec![
                    Nnf::And(vec![
                        Nnf::Lit(Literal::pos(Atom::Eq(w, subject))),
                        Nnf::Lit(Literal::pos(Atom::Eq(v, target))),
                    ]),
                    cur_lit,
                ]),
                RuleKind::Revoke => Nnf::And(vec![
                    Nnf::Or(vec![
                        Nnf::Lit(Literal::neg(Atom::Eq(w, subject))),
                        Nnf::Lit(Literal::neg(Atom::Eq(v, target))),
                    ]),
                    cur_lit,
                ]),
            };
            let def = ForallFormula {
                vars: vec![USER, ROLE],
                matrix: Nnf::And(vec![
                    Nnf::Or(vec![Nnf::Lit(Literal::neg(next_atom.clone())), update.clone()]),
                    Nnf::Or(vec![update.negated(), Nnf::Lit(Literal::pos(next_atom))]),
                ]),
            };

            let mut parts: Vec<GExpr> = lits.into_iter().map(GExpr::Lit).collect();
            parts.push(GExpr::Forall(def));
            disjuncts.push(GExpr::And(parts));
        }
        b.assert_gexpr(GExpr::Or(disjuncts));
    }

    let final_goal = ExistsFormula {
        cubes: goal.cubes.iter().map(|c| replace_pred_cube(c, ua, copies[steps])).collect(),
    };
    b.assert_exists(&final_goal);

    let out = b.solve(budget)?;
    Ok(if out.model.is_some() { Verdict::Sat } else { Verdict::Unsat })
}
