use rolereach_cli::{bench::BenchParams, gen::GenParams, AnalyzeFlags, Command, RunConfig};
use std::process::exit;

const USAGE: &str = "\
rolereach — symbolic analysis of administrative RBAC policies

USAGE:
  rolereach <command> [options]

COMMANDS:
  analyze <file>                reachability of the declared goal
      --monolithic              textbook loop without per-rule refinement
      --strict-l0               conjoin constraints into the safety test
      --semantic-subsumption    prune frontier cubes by entailment
      --no-saturate             skip constraint-aware cube strengthening
      --max-iterations <n>      iteration cap (default 10000)
      --max-conflicts <n>       per-call solver conflict cap
      --dump-fixpoint           print the closed set on unreachable
  bounded <file> --steps <n>    satisfiability of the n-step unfolding
  invariant <file> --formula <sexpr>
                                inductive-invariant check
  contain <file> --sub <r1> --super <r2>
                                role containment (flat policies)
  wp <file> --user <name>       minimal initial memberships for the goal
  oracle <file> [--cap <n>]     explicit-state forward search
  gen [--users n] [--roles n] [--assigns n] [--revokes n] [--goal-size k]
      [--pre-width w] [--smer n] [--neg-pct p] [--permission] [--chain]
      [--seed s] [--out file] [--json]
                                generate a random instance
  bench [--goal-sizes 1,2,3,4] [--instances n] [--roles n] [--seed s]
        [--budget-secs n] [--workers n] [--out file.csv]
                                scaling harness; emits CSV
  dump <file>                   compiled policy in symbolic form
  smt <file> [--solver path]    SMT-LIB export of init-and-goal; optional
                                differential run (env ROLEREACH_SMT_SOLVER)

Common options:
  --json                        machine-readable report on stdout

Exit codes: 0 analysis completed, 1 usage error, 2 input error, 3 budget exceeded.
";

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() || args[0] == "--help" || args[0] == "-h" || args[0] == "help" {
        print!("{USAGE}");
        exit(if args.is_empty() { rolereach_cli::EXIT_USAGE } else { rolereach_cli::EXIT_OK });
    }
    match parse_args(&args) {
        Ok(cfg) => {
            let mut stdout = std::io::stdout();
            exit(rolereach_cli::run(&cfg, &mut stdout));
        }
        Err(msg) => {
            if !msg.is_empty() {
                eprintln!("error: {msg}\n");
            }
            eprint!("{USAGE}");
            exit(rolereach_cli::EXIT_USAGE);
        }
    }
}

struct ArgStream<'a> {
    args: &'a [String],
    pos: usize,
}

impl<'a> ArgStream<'a> {
    fn next(&mut self) -> Option<&'a str> {
        let a = self.args.get(self.pos).map(|s| s.as_str());
        self.pos += 1;
        a
    }

    fn value(&mut self, flag: &str) -> Result<&'a str, String> {
        self.next().ok_or_else(|| format!("{flag} needs a value"))
    }
}

fn parse_args(args: &[String]) -> Result<RunConfig, String> {
    let mut s = ArgStream { args, pos: 0 };
    let cmd = s.next().ok_or("")?;
    let mut json = false;

    let parsed = match cmd {
        "analyze" => {
            let mut input = None;
            let mut flags = AnalyzeFlags::default();
            while let Some(a) = s.next() {
                match a {
                    "--json" => json = true,
                    "--monolithic" => flags.monolithic = true,
                    "--strict-l0" => flags.strict_l0 = true,
                    "--semantic-subsumption" => flags.semantic_subsumption = true,
                    "--no-saturate" => flags.no_saturate = true,
                    "--dump-fixpoint" => flags.dump_fixpoint = true,
                    "--max-iterations" => {
                        flags.max_iterations =
                            Some(s.value(a)?.parse().map_err(|_| "bad --max-iterations")?)
                    }
                    "--max-conflicts" => {
                        flags.max_conflicts =
                            Some(s.value(a)?.parse().map_err(|_| "bad --max-conflicts")?)
                    }
                    other if !other.starts_with("--") && input.is_none() => {
                        input = Some(other.to_string())
                    }
                    other => return Err(format!("unknown option `{other}`")),
                }
            }
            Command::Analyze { input: input.ok_or("analyze needs a policy file")?, flags }
        }
        "bounded" => {
            let mut input = None;
            let mut steps = None;
            while let Some(a) = s.next() {
                match a {
                    "--json" => json = true,
                    "--steps" => steps = Some(s.value(a)?.parse().map_err(|_| "bad --steps")?),
                    other if !other.starts_with("--") && input.is_none() => {
                        input = Some(other.to_string())
                    }
                    other => return Err(format!("unknown option `{other}`")),
                }
            }
            Command::Bounded {
                input: input.ok_or("bounded needs a policy file")?,
                steps: steps.ok_or("bounded needs --steps")?,
            }
        }
        "invariant" => {
            let mut input = None;
            let mut formula = None;
            while let Some(a) = s.next() {
                match a {
                    "--json" => json = true,
                    "--formula" => formula = Some(s.value(a)?.to_string()),
                    other if !other.starts_with("--") && input.is_none() => {
                        input = Some(other.to_string())
                    }
                    other => return Err(format!("unknown option `{other}`")),
                }
            }
            Command::Invariant {
                input: input.ok_or("invariant needs a policy file")?,
                formula: formula.ok_or("invariant needs --formula")?,
            }
        }
        "contain" => {
            let mut input = None;
            let mut sub = None;
            let mut sup = None;
            while let Some(a) = s.next() {
                match a {
                    "--json" => json = true,
                    "--sub" => sub = Some(s.value(a)?.to_string()),
                    "--super" => sup = Some(s.value(a)?.to_string()),
                    other if !other.starts_with("--") && input.is_none() => {
                        input = Some(other.to_string())
                    }
                    other => return Err(format!("unknown option `{other}`")),
                }
            }
            Command::Contain {
                input: input.ok_or("contain needs a policy file")?,
                sub: sub.ok_or("contain needs --sub")?,
                sup: sup.ok_or("contain needs --super")?,
            }
        }
        "wp" => {
            let mut input = None;
            let mut user = None;
            while let Some(a) = s.next() {
                match a {
                    "--json" => json = true,
                    "--user" => user = Some(s.value(a)?.to_string()),
                    other if !other.starts_with("--") && input.is_none() => {
                        input = Some(other.to_string())
                    }
                    other => return Err(format!("unknown option `{other}`")),
                }
            }
            Command::Wp {
                input: input.ok_or("wp needs a policy file")?,
                user: user.ok_or("wp needs --user")?,
            }
        }
        "oracle" => {
            let mut input = None;
            let mut cap = rolereach_core::oracle::DEFAULT_STATE_CAP;
            while let Some(a) = s.next() {
                match a {
                    "--json" => json = true,
                    "--cap" => cap = s.value(a)?.parse().map_err(|_| "bad --cap")?,
                    other if !other.starts_with("--") && input.is_none() => {
                        input = Some(other.to_string())
                    }
                    other => return Err(format!("unknown option `{other}`")),
                }
            }
            Command::Oracle { input: input.ok_or("oracle needs a policy file")?, cap }
        }
        "gen" => {
            let mut params = GenParams::default();
            let mut out = None;
            let mut as_json = false;
            while let Some(a) = s.next() {
                match a {
                    "--json" => as_json = true,
                    "--users" => params.users = s.value(a)?.parse().map_err(|_| "bad --users")?,
                    "--roles" => params.roles = s.value(a)?.parse().map_err(|_| "bad --roles")?,
                    "--assigns" => {
                        params.assigns = s.value(a)?.parse().map_err(|_| "bad --assigns")?
                    }
                    "--revokes" => {
                        params.revokes = s.value(a)?.parse().map_err(|_| "bad --revokes")?
                    }
                    "--goal-size" => {
                        params.goal_size = s.value(a)?.parse().map_err(|_| "bad --goal-size")?
                    }
                    "--pre-width" => {
                        params.pre_width = s.value(a)?.parse().map_err(|_| "bad --pre-width")?
                    }
                    "--smer" => params.smer = s.value(a)?.parse().map_err(|_| "bad --smer")?,
                    "--neg-pct" => {
                        params.neg_pct = s.value(a)?.parse().map_err(|_| "bad --neg-pct")?
                    }
                    "--permission" => params.with_permission = true,
                    "--chain" => params.chain = true,
                    "--seed" => params.seed = s.value(a)?.parse().map_err(|_| "bad --seed")?,
                    "--out" => out = Some(s.value(a)?.to_string()),
                    other => return Err(format!("unknown option `{other}`")),
                }
            }
            Command::Gen { params, out, json: as_json }
        }
        "bench" => {
            let mut params = BenchParams::default();
            let mut out = None;
            while let Some(a) = s.next() {
                match a {
                    "--goal-sizes" => {
                        params.goal_sizes = s
                            .value(a)?
                            .split(',')
                            .map(|x| x.parse().map_err(|_| "bad --goal-sizes".to_string()))
                            .collect::<Result<Vec<u32>, _>>()?
                    }
                    "--instances" => {
                        params.instances_per_size =
                            s.value(a)?.parse().map_err(|_| "bad --instances")?
                    }
                    "--roles" => params.roles = s.value(a)?.parse().map_err(|_| "bad --roles")?,
                    "--seed" => params.seed = s.value(a)?.parse().map_err(|_| "bad --seed")?,
                    "--budget-secs" => {
                        params.budget_secs =
                            s.value(a)?.parse().map_err(|_| "bad --budget-secs")?
                    }
                    "--workers" => {
                        params.workers = s.value(a)?.parse().map_err(|_| "bad --workers")?
                    }
                    "--out" => out = Some(s.value(a)?.to_string()),
                    other => return Err(format!("unknown option `{other}`")),
                }
            }
            Command::Bench { params, out }
        }
        "dump" => {
            let input = s.next().ok_or("dump needs a policy file")?;
            Command::Dump { input: input.to_string() }
        }
        "smt" => {
            let mut input = None;
            let mut solver = None;
            while let Some(a) = s.next() {
                match a {
                    "--solver" => solver = Some(s.value(a)?.to_string()),
                    other if !other.starts_with("--") && input.is_none() => {
                        input = Some(other.to_string())
                    }
                    other => return Err(format!("unknown option `{other}`")),
                }
            }
            Command::Smt { input: input.ok_or("smt needs a policy file")?, solver }
        }
        other => return Err(format!("unknown command `{other}`")),
    };

    Ok(RunConfig { command: parsed, json })
}
