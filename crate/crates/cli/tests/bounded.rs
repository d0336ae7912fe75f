//! Agreement between the bounded-unfolding check, the backward search and
//! the shortest runs found by forward exploration.

use rolereach_cli::gen::{gen_random, GenParams};
use rolereach_core::oracle::{ConcreteInstance, ForwardResult};
use rolereach_core::policy::compile_policy;
use rolereach_core::reach::{backward_reach, bounded_reach, ReachConfig, ReachVerdict};
use rolereach_core::solver::{Budget, Verdict};

fn params(seed: u64) -> GenParams {
    GenParams {
        users: 1 + (seed % 2) as u32,
        roles: 4 + (seed % 2) as u32,
        assigns: 3 + (seed % 3) as u32,
        revokes: (seed % 3) as u32,
        goal_size: 1,
        pre_width: 2,
        smer: (seed % 2) as u32,
        neg_pct: 20,
        with_permission: false,
        chain: seed.is_multiple_of(3),
        seed,
    }
}

#[test]
fn bounded_unfolding_matches_shortest_runs() {
    let budget = Budget::default();
    let mut reachable_seen = 0;
    let mut unreachable_seen = 0;
    for seed in 0..30u64 {
        let decls = gen_random(&params(seed));
        let compiled = compile_policy(&decls).unwrap();
        let goal = compiled.goal.clone().unwrap();
        let inst = ConcreteInstance::from_policy(&compiled).unwrap();
        let checker = ConcreteInstance::goal_checker(&goal);

        match inst.forward_reach(&checker, 1 << 20).unwrap() {
            ForwardResult::Reachable { run } => {
                reachable_seen += 1;
                let shortest = run.len() - 1;
                // Unsat strictly below the shortest run, sat exactly at it.
                for l in 0..shortest.min(4) {
                    assert_eq!(
                        bounded_reach(&compiled.policy, &goal, l, &budget).unwrap(),
                        Verdict::Unsat,
                        "seed {seed}: spurious run at bound {l} < shortest {shortest}"
                    );
                }
                if shortest <= 5 {
                    assert_eq!(
                        bounded_reach(&compiled.policy, &goal, shortest, &budget).unwrap(),
                        Verdict::Sat,
                        "seed {seed}: shortest run {shortest} not found"
                    );
                }
                // Satisfiable unfolding implies the backward verdict.
                let result =
                    backward_reach(&compiled.policy, &goal, &ReachConfig::default()).unwrap();
                assert_eq!(result.verdict, ReachVerdict::Reachable);
                assert!(result.steps <= shortest, "seed {seed}: run longer than shortest");
            }
            ForwardResult::Unreachable { .. } => {
                unreachable_seen += 1;
                for l in 0..=3 {
                    assert_eq!(
                        bounded_reach(&compiled.policy, &goal, l, &budget).unwrap(),
                        Verdict::Unsat,
                        "seed {seed}: spurious bounded run at {l}"
                    );
                }
            }
        }
    }
    assert!(reachable_seen >= 8, "family too one-sided: {reachable_seen} reachable");
    assert!(unreachable_seen >= 8, "family too one-sided: {unreachable_seen} unreachable");
}

#[test]
fn monolithic_mode_agrees_with_oracle_on_exclusion_free_instances() {
    // Without mutual-exclusion constraints the textbook loop and the
    // refined one decide the same relation, and both match forward search.
    for seed in 0..40u64 {
        let decls = gen_random(&GenParams { smer: 0, ..params(seed) });
        let compiled = compile_policy(&decls).unwrap();
        let goal = compiled.goal.clone().unwrap();
        let inst = ConcreteInstance::from_policy(&compiled).unwrap();
        let checker = ConcreteInstance::goal_checker(&goal);
        let oracle_reachable = matches!(
            inst.forward_reach(&checker, 1 << 20).unwrap(),
            ForwardResult::Reachable { .. }
        );

        let cfg = ReachConfig { per_transition: false, ..ReachConfig::default() };
        let result = backward_reach(&compiled.policy, &goal, &cfg).unwrap();
        let symbolic_reachable = result.verdict == ReachVerdict::Reachable;
        assert_eq!(symbolic_reachable, oracle_reachable, "seed {seed}");
    }
}
/// Opt-in stress run (`cargo test -- --ignored`): two thousand mixed
/// instances against the oracle, every reachable trace replayed.
#[test]
#[ignore]
fn large_differential_fuzz() {
    let mut reachable = 0usize;
    for seed in 1000..3000u64 {
        let mut rng = rolereach_cli::rng::Rng::new(seed ^ 0xF022);
        let p = GenParams {
            users: 1 + rng.below(3) as u32,
            roles: 3 + rng.below(6) as u32,
            assigns: 2 + rng.below(5) as u32,
            revokes: rng.below(5) as u32,
            goal_size: 1 + rng.below(3) as u32,
            pre_width: 1 + rng.below(3) as u32,
            smer: rng.below(4) as u32,
            neg_pct: rng.below(60) as u32,
            with_permission: rng.below(3) == 0,
            chain: rng.below(2) == 0,
            seed,
        };
        let decls = gen_random(&p);
        let compiled = compile_policy(&decls).unwrap();
        let goal = compiled.goal.clone().unwrap();
        let inst = ConcreteInstance::from_policy(&compiled).unwrap();
        let checker = ConcreteInstance::goal_checker(&goal);
        let oracle = match inst.forward_reach(&checker, 1 << 21) {
            Ok(v) => v,
            Err(_) => continue,
        };
        let result = backward_reach(&compiled.policy, &goal, &ReachConfig::default()).unwrap();
        match (&oracle, result.verdict) {
            (ForwardResult::Reachable { .. }, ReachVerdict::Reachable) => {
                reachable += 1;
                let trace = result.trace.as_ref().unwrap();
                rolereach_core::reach::replay_trace(&compiled.policy, &goal, trace)
                    .unwrap_or_else(|e| panic!("seed {seed}: replay failed: {e}"));
            }
            (ForwardResult::Unreachable { .. }, ReachVerdict::Unreachable) => {}
            (o, v) => panic!("seed {seed}: oracle {o:?} vs symbolic {v:?}\n{}", rolereach_cli::gen::decls_to_text(&decls)),
        }
    }
    eprintln!("fuzz: 2000 instances, {reachable} reachable");
}
