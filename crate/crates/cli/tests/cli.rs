//! End-to-end runs of the command-line binary: golden files reproduce their
//! verdicts, reports are valid JSON, generation is reproducible, and the
//! exit-code contract holds.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rolereach"))
}

fn policy(rel: &str) -> String {
    format!("{}/../../policies/{rel}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn analyze_chain_reports_unreachable() {
    let out = bin().args(["analyze", &policy("single_user_chain.policy")]).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("verdict: unreachable"), "{stdout}");
}

#[test]
fn analyze_company_reports_unreachable() {
    let out = bin().args(["analyze", &policy("company.policy")]).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("verdict: unreachable"), "{stdout}");
}

#[test]
fn oracle_agrees_on_golden_files() {
    for file in ["single_user_chain.policy", "company.policy"] {
        let sym = bin().args(["analyze", &policy(file)]).output().unwrap();
        let orc = bin().args(["oracle", &policy(file)]).output().unwrap();
        let sv = String::from_utf8_lossy(&sym.stdout);
        let ov = String::from_utf8_lossy(&orc.stdout);
        assert!(sv.contains("unreachable") && ov.contains("unreachable"), "{file}: {sv} vs {ov}");
    }
}

#[test]
fn json_report_is_schema_shaped() {
    let out = bin()
        .args(["analyze", &policy("single_user_chain.policy"), "--json", "--dump-fixpoint"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).expect("valid JSON");
    assert_eq!(v["command"], "analyze");
    assert_eq!(v["verdict"], "unreachable");
    assert!(v["steps"].is_number());
    assert!(v["iterations"].is_array());
    assert!(v["solver_calls"].is_number());
    assert!(v["fixpoint"].is_array());
    assert!(v["wall_ms"].is_number());
}

#[test]
fn bounded_subcommand_runs() {
    let out = bin()
        .args(["bounded", &policy("single_user_chain.policy"), "--steps", "3"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("bound 3: unsat"));
}

#[test]
fn gen_is_reproducible_and_roundtrips() {
    let args = ["gen", "--roles", "8", "--goal-size", "2", "--seed", "42", "--chain"];
    let a = bin().args(args).output().unwrap();
    let b = bin().args(args).output().unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout, "fixed seeds must be byte-identical");

    // The generated text parses and analyzes without error.
    let dir = std::env::temp_dir().join(format!("rolereach-gen-{}.policy", std::process::id()));
    std::fs::write(&dir, &a.stdout).unwrap();
    let run = bin().args(["analyze", dir.to_str().unwrap()]).output().unwrap();
    let _ = std::fs::remove_file(&dir);
    assert!(run.status.success());
}

#[test]
fn json_mirror_is_accepted_as_input() {
    let gen = bin().args(["gen", "--seed", "9", "--json"]).output().unwrap();
    assert!(gen.status.success());
    let path = std::env::temp_dir().join(format!("rolereach-gen-{}.json", std::process::id()));
    std::fs::write(&path, &gen.stdout).unwrap();
    let run = bin().args(["analyze", path.to_str().unwrap()]).output().unwrap();
    let _ = std::fs::remove_file(&path);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stdout));
}

#[test]
fn usage_errors_exit_one() {
    let out = bin().args(["frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().args(["analyze"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_input_exits_two() {
    let out = bin().args(["analyze", "/nonexistent/nope.policy"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dump_prints_compiled_rules() {
    let out = bin().args(["dump", &policy("company.policy")]).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("rule promote_lead"));
    assert!(stdout.contains("goal (or (exists"));
}

#[test]
fn smt_export_ends_with_check_sat() {
    let out = bin().args(["smt", &policy("company.policy")]).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("(set-logic UF)"));
    assert!(stdout.contains("(check-sat)"));
}

#[test]
fn contain_and_wp_and_invariant_run_on_flat_instances() {
    let gen = bin()
        .args(["gen", "--seed", "4", "--users", "1", "--roles", "4", "--out"])
        .arg(std::env::temp_dir().join(format!("rolereach-flat-{}.policy", std::process::id())))
        .output()
        .unwrap();
    assert!(gen.status.success());
    let path = std::env::temp_dir().join(format!("rolereach-flat-{}.policy", std::process::id()));
    let p = path.to_str().unwrap();

    let contain = bin().args(["contain", p, "--sub", "r0", "--super", "r1"]).output().unwrap();
    assert!(contain.status.success(), "{}", String::from_utf8_lossy(&contain.stdout));

    let wp = bin().args(["wp", p, "--user", "u0"]).output().unwrap();
    assert!(wp.status.success());
    assert!(String::from_utf8_lossy(&wp.stdout).contains("minimal initial memberships"));

    let inv = bin()
        .args([
            "invariant",
            p,
            "--formula",
            "(forall ((u User)) (not (ua u r3)))",
        ])
        .output()
        .unwrap();
    assert!(inv.status.success());
    assert!(String::from_utf8_lossy(&inv.stdout).contains("inductive:"));

    let _ = std::fs::remove_file(&path);
}

#[test]
fn bench_emits_csv_and_medians() {
    let csv = std::env::temp_dir().join(format!("rolereach-bench-cli-{}.csv", std::process::id()));
    let out = bin()
        .args([
            "bench",
            "--goal-sizes",
            "1,2",
            "--instances",
            "3",
            "--roles",
            "5",
            "--seed",
            "11",
            "--workers",
            "2",
            "--out",
            csv.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let content = std::fs::read_to_string(&csv).unwrap();
    let _ = std::fs::remove_file(&csv);
    assert!(content.starts_with("instance,goal_size,verdict,iterations,solver_calls,wall_ms"));
    assert_eq!(content.lines().count(), 7);
    assert!(String::from_utf8_lossy(&out.stdout).contains("median iterations"));
}

#[test]
fn exhausted_budget_exits_three() {
    let gen = bin()
        .args(["gen", "--seed", "21", "--roles", "6", "--goal-size", "2", "--chain", "--out"])
        .arg(std::env::temp_dir().join(format!("rolereach-budget-{}.policy", std::process::id())))
        .output()
        .unwrap();
    assert!(gen.status.success());
    let path = std::env::temp_dir().join(format!("rolereach-budget-{}.policy", std::process::id()));
    let out = bin()
        .args(["analyze", path.to_str().unwrap(), "--max-iterations", "0"])
        .output()
        .unwrap();
    let _ = std::fs::remove_file(&path);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("inconclusive"));
}

#[test]
fn oracle_refuses_open_sort_instances() {
    let text = "
sorts {
  user open (e0)
  role sv (f0)
  permission open ()
}
goal { (eq f0) }
";
    let path = std::env::temp_dir().join(format!("rolereach-open-{}.policy", std::process::id()));
    std::fs::write(&path, text).unwrap();
    let out = bin().args(["oracle", path.to_str().unwrap()]).output().unwrap();
    let _ = std::fs::remove_file(&path);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("scalar-value"));
}

#[test]
fn exclusion_policy_is_unreachable_and_oracle_agrees() {
    let out = bin().args(["analyze", &policy("exclusive.policy")]).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("verdict: unreachable"));

    let orc = bin().args(["oracle", &policy("exclusive.policy")]).output().unwrap();
    assert!(orc.status.success());
    assert!(String::from_utf8_lossy(&orc.stdout).contains("unreachable"));
}
