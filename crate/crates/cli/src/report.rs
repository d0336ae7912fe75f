//! JSON report records emitted by the subcommands. The shapes are documented
//! in docs/report-schema.json.

use rolereach_core::fol::config::Configuration;
use rolereach_core::fol::sexpr;
use rolereach_core::reach::{IterationStats, ReachResult, ReachVerdict, TraceStep};
use rolereach_core::SymbolicPolicy;
use serde::Serialize;

#[derive(Serialize)]
pub struct AnalyzeReport {
    pub command: String,
    pub verdict: String,
    pub steps: usize,
    pub iterations: Vec<IterationStats>,
    pub solver_calls: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixpoint: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceStepReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub lints: Vec<String>,
    pub wall_ms: u128,
}

#[derive(Serialize)]
pub struct TraceStepReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule: Option<String>,
    /// Held memberships as (user, role) name pairs.
    pub ua: Vec<(String, String)>,
}

pub fn render_state(cfg: &Configuration) -> Vec<(String, String)> {
    let sig = &cfg.sig;
    let ua = sig.ua().0 as usize;
    cfg.preds[ua]
        .iter()
        .map(|t| {
            (
                cfg.elem_name(rolereach_core::fol::USER, t[0]),
                cfg.elem_name(rolereach_core::fol::ROLE, t[1]),
            )
        })
        .collect()
}

pub fn trace_report(trace: &[TraceStep]) -> Vec<TraceStepReport> {
    trace
        .iter()
        .map(|s| TraceStepReport { rule: s.rule.clone(), ua: render_state(&s.state) })
        .collect()
}

pub fn verdict_name(v: ReachVerdict) -> &'static str {
    match v {
        ReachVerdict::Reachable => "reachable",
        ReachVerdict::Unreachable => "unreachable",
        ReachVerdict::Inconclusive => "inconclusive",
    }
}

pub fn analyze_report(
    command: &str,
    policy: &SymbolicPolicy,
    result: &ReachResult,
    lints: &[String],
    wall_ms: u128,
    dump_fixpoint: bool,
) -> AnalyzeReport {
    AnalyzeReport {
        command: command.into(),
        verdict: verdict_name(result.verdict).into(),
        steps: result.steps,
        iterations: result.iterations.clone(),
        solver_calls: result.solver_calls,
        fixpoint: result.fixpoint.as_ref().filter(|_| dump_fixpoint).map(|f| {
            f.cubes
                .iter()
                .map(|c| sexpr::cube_to_sexpr(&policy.sig, c))
                .collect()
        }),
        trace: result.trace.as_ref().map(|t| trace_report(t)),
        reason: result.inconclusive_reason.clone(),
        lints: lints.to_vec(),
        wall_ms,
    }
}
