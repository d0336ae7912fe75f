//! Scaling harness: generated instance families per goal size, analyzed
//! under a wall-clock budget, results as CSV rows for external plotting.

use crate::gen::{gen_random, GenParams};
use rolereach_core::policy::compile_policy;
use rolereach_core::reach::{backward_reach, ReachConfig};
use std::io::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

#[derive(Clone, Debug)]
pub struct BenchParams {
    pub goal_sizes: Vec<u32>,
    pub instances_per_size: u32,
    pub roles: u32,
    pub seed: u64,
    pub budget_secs: u64,
    pub workers: usize,
}

impl Default for BenchParams {
    fn default() -> BenchParams {
        BenchParams {
            goal_sizes: vec![1, 2, 3, 4],
            instances_per_size: 32,
            roles: 8,
            seed: 7,
            budget_secs: 60,
            workers: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchRow {
    pub instance: String,
    pub goal_size: u32,
    pub verdict: String,
    pub iterations: usize,
    pub solver_calls: u64,
    pub wall_ms: u128,
    pub over_budget: bool,
}

pub fn csv_header() -> &'static str {
    "instance,goal_size,verdict,iterations,solver_calls,wall_ms,over_budget"
}

pub fn row_csv(r: &BenchRow) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        r.instance, r.goal_size, r.verdict, r.iterations, r.solver_calls, r.wall_ms, r.over_budget
    )
}

fn run_one(goal_size: u32, index: u32, params: &BenchParams) -> BenchRow {
    let gen_params = GenParams {
        users: 1 + (index % 2),
        roles: params.roles,
        assigns: params.roles.max(4),
        revokes: 3 + index % 3,
        goal_size,
        pre_width: 2,
        smer: 0,
        neg_pct: 15,
        with_permission: false,
        chain: true,
        seed: params.seed ^ ((goal_size as u64) << 32) ^ index as u64,
    };
    let decls = gen_random(&gen_params);
    let instance = format!("g{goal_size}-i{index}");
    let started = Instant::now();
    let compiled = match compile_policy(&decls) {
        Ok(c) => c,
        Err(e) => {
            return BenchRow {
                instance,
                goal_size,
                verdict: format!("compile-error:{e}"),
                iterations: 0,
                solver_calls: 0,
                wall_ms: started.elapsed().as_millis(),
                over_budget: false,
            }
        }
    };
    let goal = compiled.goal.clone().expect("generated instances carry a goal");
    let result = backward_reach(&compiled.policy, &goal, &ReachConfig::default());
    let wall_ms = started.elapsed().as_millis();
    match result {
        Ok(r) => BenchRow {
            instance,
            goal_size,
            verdict: crate::report::verdict_name(r.verdict).into(),
            iterations: r.iterations.len(),
            solver_calls: r.solver_calls,
            wall_ms,
            over_budget: wall_ms > params.budget_secs as u128 * 1000,
        },
        Err(e) => BenchRow {
            instance,
            goal_size,
            verdict: format!("error:{e}"),
            iterations: 0,
            solver_calls: 0,
            wall_ms,
            over_budget: wall_ms > params.budget_secs as u128 * 1000,
        },
    }
}

/// Run the whole family set; rows come back sorted by (goal size, index)
/// regardless of worker interleaving.
pub fn run_bench(params: &BenchParams) -> Vec<BenchRow> {
    let jobs: Vec<(u32, u32)> = params
        .goal_sizes
        .iter()
        .flat_map(|&g| (0..params.instances_per_size).map(move |i| (g, i)))
        .collect();

    let rows = Mutex::new(Vec::with_capacity(jobs.len()));
    let next = AtomicUsize::new(0);
    let workers = params.workers.max(1).min(jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= jobs.len() {
                    break;
                }
                let (g, idx) = jobs[i];
                let row = run_one(g, idx, params);
                rows.lock().unwrap().push(row);
            });
        }
    });
    let mut rows = rows.into_inner().unwrap();
    rows.sort_by(|a, b| (a.goal_size, &a.instance).cmp(&(b.goal_size, &b.instance)));
    rows
}

pub fn write_csv(path: &str, rows: &[BenchRow]) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "{}", csv_header())?;
    for r in rows {
        writeln!(f, "{}", row_csv(r))?;
    }
    Ok(())
}

pub fn median_iterations_by_goal_size(rows: &[BenchRow]) -> Vec<(u32, usize)> {
    let mut sizes: Vec<u32> = rows.iter().map(|r| r.goal_size).collect();
    sizes.sort_unstable();
    sizes.dedup();
    sizes
        .into_iter()
        .map(|g| {
            let mut iters: Vec<usize> =
                rows.iter().filter(|r| r.goal_size == g).map(|r| r.iterations).collect();
            iters.sort_unstable();
            (g, iters[iters.len() / 2])
        })
        .collect()
}
