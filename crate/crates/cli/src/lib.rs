//! Command-line front end: parse policy files, run the analyses, emit JSON
//! or text reports, generate benchmark families and run the scaling harness.

pub mod bench;
pub mod gen;
pub mod report;
pub mod rng;

use rolereach_core::analyses::{
    check_inductive_invariant, role_containment, weakest_precondition, ContainmentOutcome,
    InvariantOutcome,
};
use rolereach_core::fol::sexpr;
use rolereach_core::oracle::{ConcreteInstance, ForwardResult};
use rolereach_core::policy::{compile_policy, parse, CompiledPolicy};
use rolereach_core::reach::{backward_reach, bounded_reach, ReachConfig, ReachVerdict};
use rolereach_core::solver::{smtlib, Budget, SolverError, Verdict};
use rolereach_core::BsrProblem;
use std::time::Instant;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Clone, Debug, Default)]
pub struct AnalyzeFlags {
    pub monolithic: bool,
    pub strict_l0: bool,
    pub semantic_subsumption: bool,
    pub no_saturate: bool,
    pub max_iterations: Option<usize>,
    pub max_conflicts: Option<u64>,
    pub dump_fixpoint: bool,
}

impl AnalyzeFlags {
    pub fn reach_config(&self) -> ReachConfig {
        let mut cfg = ReachConfig {
            per_transition: !self.monolithic,
            strict_l0_constraints: self.strict_l0,
            semantic_subsumption: self.semantic_subsumption,
            saturate_constraints: !self.no_saturate,
            ..ReachConfig::default()
        };
        if let Some(n) = self.max_iterations {
            cfg.max_iterations = n;
        }
        if let Some(c) = self.max_conflicts {
            cfg.budget.max_conflicts = c;
        }
        cfg
    }
}

#[derive(Clone, Debug)]
pub enum Command {
    Analyze { input: String, flags: AnalyzeFlags },
    Bounded { input: String, steps: usize },
    Invariant { input: String, formula: String },
    Contain { input: String, sub: String, sup: String },
    Wp { input: String, user: String },
    Oracle { input: String, cap: usize },
    Gen { params: gen::GenParams, out: Option<String>, json: bool },
    Bench { params: bench::BenchParams, out: Option<String> },
    Dump { input: String },
    Smt { input: String, solver: Option<String> },
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    pub json: bool,
}

fn load_policy(path: &str) -> Result<CompiledPolicy, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {path}: {e}"))?;
    let decls = if path.ends_with(".json") {
        parse::parse_policy_json(&text).map_err(|e| format!("{path}: {e}"))?
    } else {
        parse::parse_policy(&text).map_err(|e| format!("{path}: {e}"))?
    };
    compile_policy(&decls).map_err(|e| format!("{path}: {e}"))
}

pub fn run(cfg: &RunConfig, out: &mut dyn std::io::Write) -> i32 {
    match run_inner(cfg, out) {
        Ok(code) => code,
        Err(msg) => {
            let _ = writeln!(out, "error: {msg}");
            EXIT_INPUT
        }
    }
}

fn run_inner(cfg: &RunConfig, out: &mut dyn std::io::Write) -> Result<i32, String> {
    let w = |out: &mut dyn std::io::Write, s: String| {
        let _ = writeln!(out, "{s}");
    };
    match &cfg.command {
        Command::Analyze { input, flags } => {
            let compiled = load_policy(input)?;
            let goal = compiled.goal.clone().ok_or("policy file declares no goal")?;
            let started = Instant::now();
            let result = backward_reach(&compiled.policy, &goal, &flags.reach_config())
                .map_err(|e| e.to_string())?;
            let wall = started.elapsed().as_millis();
            if cfg.json {
                let rep = report::analyze_report(
                    "analyze",
                    &compiled.policy,
                    &result,
                    &compiled.lints,
                    wall,
                    flags.dump_fixpoint,
                );
                w(out, serde_json::to_string_pretty(&rep).unwrap());
            } else {
                for lint in &compiled.lints {
                    w(out, format!("note: {lint}"));
                }
                w(out, format!("verdict: {}", report::verdict_name(result.verdict)));
                w(out, format!("iterations: {}", result.iterations.len()));
                w(out, format!("solver calls: {}", result.solver_calls));
                if result.verdict == ReachVerdict::Reachable {
                    w(out, format!("run length: {}", result.steps));
                    if let Some(trace) = &result.trace {
                        for (i, step) in trace.iter().enumerate() {
                            let label = step.rule.as_deref().unwrap_or("initial");
                            let ua = report::render_state(&step.state);
                            let pairs: Vec<String> =
                                ua.iter().map(|(u, r)| format!("({u},{r})")).collect();
                            w(out, format!("  state {i} [{label}]: {}", pairs.join(" ")));
                        }
                    }
                }
                if flags.dump_fixpoint {
                    if let Some(f) = &result.fixpoint {
                        for c in &f.cubes {
                            w(
                                out,
                                format!(
                                    "fixpoint cube: {}",
                                    sexpr::cube_to_sexpr(&compiled.policy.sig, c)
                                ),
                            );
                        }
                    }
                }
                if let Some(r) = &result.inconclusive_reason {
                    w(out, format!("reason: {r}"));
                }
            }
            Ok(if result.verdict == ReachVerdict::Inconclusive { EXIT_BUDGET } else { EXIT_OK })
        }
        Command::Bounded { input, steps } => {
            let compiled = load_policy(input)?;
            let goal = compiled.goal.clone().ok_or("policy file declares no goal")?;
            match bounded_reach(&compiled.policy, &goal, *steps, &Budget::default()) {
                Ok(v) => {
                    let name = if v == Verdict::Sat { "sat" } else { "unsat" };
                    if cfg.json {
                        w(
                            out,
                            format!(
                                "{{\"command\":\"bounded\",\"steps\":{steps},\"verdict\":\"{name}\"}}"
                            ),
                        );
                    } else {
                        w(out, format!("bound {steps}: {name}"));
                    }
                    Ok(EXIT_OK)
                }
                Err(SolverError::Timeout { .. }) => {
                    w(out, "budget exceeded".into());
                    Ok(EXIT_BUDGET)
                }
                Err(e) => Err(e.to_string()),
            }
        }
        Command::Invariant { input, formula } => {
            let compiled = load_policy(input)?;
            let parsed = sexpr::parse_sexpr(formula).map_err(|e| e.to_string())?;
            let psi =
                sexpr::parse_forall(&compiled.policy.sig, &parsed).map_err(|e| e.to_string())?;
            match check_inductive_invariant(&compiled.policy, &psi, &Budget::default()) {
                Ok(InvariantOutcome::Holds) => {
                    w(
                        out,
                        if cfg.json {
                            "{\"verdict\":\"holds\"}".into()
                        } else {
                            "inductive: holds".into()
                        },
                    );
                    Ok(EXIT_OK)
                }
                Ok(InvariantOutcome::FailsInit(model)) => {
                    let ua = report::render_state(&model);
                    if cfg.json {
                        w(
                            out,
                            serde_json::json!({"verdict":"fails","which":"init","ua":ua})
                                .to_string(),
                        );
                    } else {
                        w(out, format!("inductive: fails at init, countermodel ua={ua:?}"));
                    }
                    Ok(EXIT_OK)
                }
                Ok(InvariantOutcome::FailsStep { rule, countermodel }) => {
                    let ua = report::render_state(&countermodel);
                    if cfg.json {
                        w(
                            out,
                            serde_json::json!({"verdict":"fails","which":"step","rule":rule,"ua":ua})
                                .to_string(),
                        );
                    } else {
                        w(out, format!("inductive: fails at step {rule}, countermodel ua={ua:?}"));
                    }
                    Ok(EXIT_OK)
                }
                Err(e) => Err(e.to_string()),
            }
        }
        Command::Contain { input, sub, sup } => {
            let compiled = load_policy(input)?;
            match role_containment(&compiled, sub, sup, &ReachConfig::default()) {
                Ok(ContainmentOutcome::Holds) => {
                    w(
                        out,
                        if cfg.json {
                            format!("{{\"verdict\":\"holds\",\"sub\":\"{sub}\",\"super\":\"{sup}\"}}")
                        } else {
                            format!("containment: every member of {sub} also holds {sup}")
                        },
                    );
                    Ok(EXIT_OK)
                }
                Ok(ContainmentOutcome::Violated { witness }) => {
                    if cfg.json {
                        let steps = report::trace_report(&witness);
                        w(out, serde_json::json!({"verdict":"violated","witness":steps}).to_string());
                    } else {
                        w(
                            out,
                            format!(
                                "containment: violated in {} steps",
                                witness.len().saturating_sub(1)
                            ),
                        );
                    }
                    Ok(EXIT_OK)
                }
                Ok(ContainmentOutcome::Inconclusive) => {
                    w(out, "budget exceeded".into());
                    Ok(EXIT_BUDGET)
                }
                Err(e) => Err(e.to_string()),
            }
        }
        Command::Wp { input, user } => {
            let compiled = load_policy(input)?;
            let goal = compiled.goal.clone().ok_or("policy file declares no goal")?;
            let wp = weakest_precondition(&compiled, &goal, user, &ReachConfig::default(), 20_000)
                .map_err(|e| e.to_string())?;
            if cfg.json {
                let sets: Vec<Vec<String>> =
                    wp.minimal_sets.iter().map(|s| s.iter().cloned().collect()).collect();
                w(
                    out,
                    serde_json::json!({
                        "user": user,
                        "minimal_sets": sets,
                        "forest_nodes": wp.forest_nodes,
                        "expanded_nodes": wp.expanded_nodes,
                    })
                    .to_string(),
                );
            } else {
                w(out, format!("minimal initial memberships for {user}:"));
                for s in &wp.minimal_sets {
                    let names: Vec<&str> = s.iter().map(|x| x.as_str()).collect();
                    w(out, format!("  {{{}}}", names.join(", ")));
                }
                w(out, format!("forest nodes: {}", wp.forest_nodes));
            }
            Ok(EXIT_OK)
        }
        Command::Oracle { input, cap } => {
            let compiled = load_policy(input)?;
            let goal = compiled.goal.clone().ok_or("policy file declares no goal")?;
            let inst = ConcreteInstance::from_policy(&compiled).map_err(|e| e.to_string())?;
            let checker = ConcreteInstance::goal_checker(&goal);
            match inst.forward_reach(&checker, *cap).map_err(|e| e.to_string())? {
                ForwardResult::Reachable { run } => {
                    if cfg.json {
                        let states: Vec<serde_json::Value> = run
                            .iter()
                            .map(|(rule, s)| {
                                serde_json::json!({
                                    "rule": rule,
                                    "ua": report::render_state(&inst.to_configuration(*s)),
                                })
                            })
                            .collect();
                        w(out, serde_json::json!({"verdict":"reachable","run":states}).to_string());
                    } else {
                        w(out, format!("verdict: reachable (run length {})", run.len() - 1));
                    }
                }
                ForwardResult::Unreachable { explored } => {
                    if cfg.json {
                        w(out, format!("{{\"verdict\":\"unreachable\",\"explored\":{explored}}}"));
                    } else {
                        w(out, format!("verdict: unreachable ({explored} states explored)"));
                    }
                }
            }
            Ok(EXIT_OK)
        }
        Command::Gen { params, out: path, json } => {
            let decls = gen::gen_random(params);
            let text =
                if *json { parse::policy_to_json(&decls) } else { gen::decls_to_text(&decls) };
            match path {
                Some(p) => std::fs::write(p, text).map_err(|e| e.to_string())?,
                None => w(out, text),
            }
            Ok(EXIT_OK)
        }
        Command::Bench { params, out: path } => {
            let rows = bench::run_bench(params);
            let mut csv = String::from(bench::csv_header());
            for r in &rows {
                csv.push('\n');
                csv.push_str(&bench::row_csv(r));
            }
            match path {
                Some(p) => std::fs::write(p, csv + "\n").map_err(|e| e.to_string())?,
                None => w(out, csv),
            }
            for (g, m) in bench::median_iterations_by_goal_size(&rows) {
                w(out, format!("goal size {g}: median iterations {m}"));
            }
            let over = rows.iter().filter(|r| r.over_budget).count();
            if over > 0 {
                w(out, format!("{over} instances exceeded the budget"));
                return Ok(EXIT_BUDGET);
            }
            Ok(EXIT_OK)
        }
        Command::Dump { input } => {
            let compiled = load_policy(input)?;
            w(out, compiled.policy.describe());
            if let Some(goal) = &compiled.goal {
                w(out, format!("goal {}", sexpr::exists_to_sexpr(&compiled.policy.sig, goal)));
            }
            Ok(EXIT_OK)
        }
        Command::Smt { input, solver } => {
            let compiled = load_policy(input)?;
            let goal = compiled.goal.clone().ok_or("policy file declares no goal")?;
            let p = BsrProblem::with_theory(compiled.policy.sig.clone(), &compiled.policy.theory)
                .forall(&compiled.policy.init)
                .exists(&goal);
            let script = smtlib::export_smtlib(&p);
            w(out, script);
            let solver =
                solver.clone().or_else(|| std::env::var("ROLEREACH_SMT_SOLVER").ok());
            if let Some(bin) = solver {
                let internal = rolereach_core::check_sat(&p, &Budget::default())
                    .map_err(|e| e.to_string())?
                    .verdict;
                match smtlib::external_check(&p, &bin) {
                    Some(external) => {
                        w(
                            out,
                            format!(
                                "; internal={internal:?} external={external:?} agree={}",
                                internal == external
                            ),
                        );
                    }
                    None => w(out, "; external solver unavailable or answered unknown".into()),
                }
            }
            Ok(EXIT_OK)
        }
    }
}
