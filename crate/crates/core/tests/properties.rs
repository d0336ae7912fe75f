//! Cross-module property suites: the dualities between formulae and finite
//! structures, pre-image semantics against concrete stepping, and solver
//! verdicts against brute-force model enumeration.

use rolereach_core::fol::config::{diagram_formula, embeds, formula_to_configs, Configuration};
use rolereach_core::fol::{
    canon::canonicalize, negate_exists, Atom, ConstId, Cube, ExistsFormula, Literal, Signature,
    SortId, Term, UniversalTheory, VarId, PERMISSION, ROLE, USER,
};
use rolereach_core::oracle::eval::{eval_cube, eval_exists, eval_forall};
use rolereach_core::oracle::ConcreteInstance;
use rolereach_core::policy::{compile_policy, parse::parse_policy};
use rolereach_core::preimage::{pre_image, pre_image_all, simplify};
use rolereach_core::solver::{check_sat, entails, BsrProblem, Budget, Verdict};
use std::collections::BTreeSet;
use std::sync::Arc;

struct Rng(u64);

impl Rng {
    fn new(seed: u64) -> Rng {
        Rng(seed.max(1))
    }

    fn next(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }

    fn below(&mut self, n: u64) -> u64 {
        self.next() % n
    }

    fn flip(&mut self) -> bool {
        self.next() & 1 == 0
    }
}

/// Fixed small scene: 2 users, 3 roles, 1 permission, all scalar.
fn small_scene() -> (Arc<Signature>, UniversalTheory) {
    let mut sig = Signature::arbac();
    let users: Vec<ConstId> = (0..2).map(|i| sig.add_const(&format!("u{i}"), USER).unwrap()).collect();
    let roles: Vec<ConstId> = (0..3).map(|i| sig.add_const(&format!("r{i}"), ROLE).unwrap()).collect();
    let perms: Vec<ConstId> = (0..1).map(|i| sig.add_const(&format!("p{i}"), PERMISSION).unwrap()).collect();
    let mut theory = UniversalTheory::default();
    theory.sv.insert(USER, users);
    theory.sv.insert(ROLE, roles);
    theory.sv.insert(PERMISSION, perms);
    (Arc::new(sig), theory)
}

/// All configurations of the small scene: every ua extension over the fixed
/// scalar domains; pa and the hierarchy stay empty.
fn all_small_configs(sig: &Arc<Signature>) -> Vec<Configuration> {
    let mut out = Vec::new();
    let pairs: Vec<(usize, usize)> =
        (0..2).flat_map(|u| (0..3).map(move |r| (u, r))).collect();
    for mask in 0..(1u32 << pairs.len()) {
        let mut preds = vec![BTreeSet::new(); sig.preds.len()];
        for (bit, (u, r)) in pairs.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                preds[sig.ua().0 as usize].insert(vec![*u, *r]);
            }
        }
        out.push(Configuration::from_parts(
            sig.clone(),
            vec![2, 3, 1],
            vec![0, 1, 0, 1, 2, 0],
            preds,
        ));
    }
    out
}

fn random_cube(sig: &Signature, rng: &mut Rng) -> Cube {
    let mut cube = Cube::top();
    let u_var = cube.push_var(USER);
    let r_var = cube.push_var(ROLE);
    let users: Vec<ConstId> = sig.consts_of(USER);
    let roles: Vec<ConstId> = sig.consts_of(ROLE);
    let n_lits = 1 + rng.below(3);
    for _ in 0..n_lits {
        let user_term = if rng.flip() {
            Term::Var(u_var)
        } else {
            Term::Const(users[rng.below(users.len() as u64) as usize])
        };
        let role_term = if rng.flip() {
            Term::Var(r_var)
        } else {
            Term::Const(roles[rng.below(roles.len() as u64) as usize])
        };
        match rng.below(4) {
            0..=1 => cube.lits.push(Literal {
                positive: rng.flip(),
                atom: Atom::Pred { pred: sig.ua(), args: vec![user_term, role_term] },
            }),
            2 => cube.lits.push(Literal {
                positive: rng.flip(),
                atom: Atom::Eq(user_term, Term::Const(users[rng.below(2) as usize])),
            }),
            _ => cube.lits.push(Literal {
                positive: rng.flip(),
                atom: Atom::Eq(role_term, Term::Const(roles[rng.below(3) as usize])),
            }),
        }
    }
    canonicalize(&cube)
}

fn random_formula(sig: &Signature, rng: &mut Rng) -> ExistsFormula {
    let n = rng.below(3) as usize; // possibly false
    ExistsFormula { cubes: (0..n).map(|_| random_cube(sig, rng)).collect() }
}

#[test]
fn negate_exists_complements_on_all_configs() {
    let (sig, _theory) = small_scene();
    let configs = all_small_configs(&sig);
    let mut rng = Rng::new(0xfeed);
    for _ in 0..100 {
        let f = random_formula(&sig, &mut rng);
        let n = negate_exists(&f);
        for cfg in &configs {
            let a = eval_exists(cfg, &f).unwrap();
            let b = eval_forall(cfg, &n).unwrap();
            assert!(a ^ b, "negation must complement");
        }
    }
}

#[test]
fn canonicalize_is_alpha_invariant_on_random_cubes() {
    let (sig, _) = small_scene();
    let mut rng = Rng::new(0xabcdef);
    for _ in 0..300 {
        let cube = random_cube(&sig, &mut rng);
        // Shuffle literals and swap variable order.
        let mut variant = cube.clone();
        variant.lits.reverse();
        if variant.vars.len() == 2 && variant.vars[0] != variant.vars[1] {
            // Swapping differently-sorted vars needs index remapping; build it.
            variant = Cube {
                vars: vec![variant.vars[1], variant.vars[0]],
                lits: variant
                    .lits
                    .iter()
                    .map(|l| {
                        l.map_terms(&mut |t| match t {
                            Term::Var(VarId(0)) => Term::Var(VarId(1)),
                            Term::Var(VarId(1)) => Term::Var(VarId(0)),
                            other => other,
                        })
                    })
                    .collect(),
            };
        }
        assert_eq!(canonicalize(&cube), canonicalize(&variant));
        // Idempotence.
        assert_eq!(canonicalize(&cube), canonicalize(&canonicalize(&cube)));
    }
}

#[test]
fn diagram_lemma_on_all_pairs_up_to_three_elements() {
    // embeds(m, n) iff n satisfies the diagram formula of m, over every pair
    // of structures with domains of at most three users and roles. The
    // permission domain stays at one element to keep the space small.
    let mut sig = Signature::arbac();
    sig.add_const("c", ROLE).unwrap();
    let sig = Arc::new(sig);

    let mut structures = Vec::new();
    for users in 1..=2usize {
        for roles in 1..=2usize {
            let pairs: Vec<(usize, usize)> = (0..users)
                .flat_map(|u| (0..roles).map(move |r| (u, r)))
                .collect();
            for mask in 0..(1u32 << pairs.len()) {
                for c_elem in 0..roles {
                    let mut preds = vec![BTreeSet::new(); sig.preds.len()];
                    for (bit, (u, r)) in pairs.iter().enumerate() {
                        if mask >> bit & 1 == 1 {
                            preds[sig.ua().0 as usize].insert(vec![*u, *r]);
                        }
                    }
                    structures.push(Configuration::from_parts(
                        sig.clone(),
                        vec![users, roles, 1],
                        vec![c_elem],
                        preds,
                    ));
                }
            }
        }
    }

    let mut checked = 0usize;
    for m in &structures {
        let d = diagram_formula(m);
        for n in &structures {
            let lhs = embeds(m, n);
            let rhs = eval_exists(n, &d).unwrap();
            assert_eq!(lhs, rhs, "diagram lemma violated");
            checked += 1;
        }
        // A structure always models its own diagram.
        assert!(eval_exists(m, &d).unwrap());
    }
    assert!(checked > 1000);
}

#[test]
fn formula_to_configs_agrees_with_pointwise_eval() {
    let (sig, theory) = small_scene();
    let mut rng = Rng::new(0x5eed);
    for _ in 0..40 {
        let f = random_formula(&sig, &mut rng);
        let configs = formula_to_configs(&f, &theory, &sig, &[2, 3, 1]).unwrap();
        // Soundness: every returned configuration satisfies the formula.
        for c in &configs {
            assert!(eval_exists(c, &f).unwrap());
            assert!(c.satisfies_theory(&theory).unwrap());
        }
        // Completeness modulo isomorphism over the enumerated reduct:
        // predicates the formula does not mention stay empty.
        let mentions_ua = f.cubes.iter().any(|c| {
            c.lits
                .iter()
                .any(|l| matches!(&l.atom, Atom::Pred { pred, .. } if *pred == sig.ua()))
        });
        let mut keys = BTreeSet::new();
        for c in all_small_configs(&sig) {
            if !mentions_ua && !c.preds[sig.ua().0 as usize].is_empty() {
                continue;
            }
            if eval_exists(&c, &f).unwrap() {
                keys.insert(c.canonical_key());
            }
        }
        assert_eq!(keys.len(), configs.len());
    }
}

#[test]
fn preimage_matches_concrete_stepping() {
    // s satisfies the pre-image of k under a rule iff some step successor of
    // s satisfies k: checked for every state at two users and four roles.
    let text = "
sorts {
  user sv (u0 u1)
  role sv (r0 r1 r2 r3)
  permission sv (p0)
}
init { (u0 r0) }
can_assign {
  (r0 (=r1) r2 label a0)
  (* (=r0 !r3) r1 label a1)
  (* () r3 label a2)
}
can_revoke {
  (r0 r1 label v0)
  (* r0 label v1)
}
";
    let compiled = compile_policy(&parse_policy(text).unwrap()).unwrap();
    let inst = ConcreteInstance::from_policy(&compiled).unwrap();
    let sig = &compiled.policy.sig;
    let theory = &compiled.policy.theory;

    let mut rng = Rng::new(0xdead);
    for _ in 0..30 {
        let k = ExistsFormula::single(random_cube(sig, &mut rng));
        for (ri, rule) in compiled.policy.transitions.iter().enumerate() {
            let pre = simplify(sig, &pre_image(sig, rule, &k, theory), theory);
            for s in 0..(1u64 << 8) {
                let cfg = inst.to_configuration(s);
                let lhs = eval_exists(&cfg, &pre).unwrap();
                let rhs = inst
                    .step(&inst.rules[ri], s, false)
                    .into_iter()
                    .any(|s2| eval_exists(&inst.to_configuration(s2), &k).unwrap());
                assert_eq!(lhs, rhs, "rule {ri}, state {s:#b}");
            }
        }
    }
}

#[test]
fn preimage_distributes_over_rule_disjunction() {
    let text = "
sorts {
  user sv (u0 u1)
  role sv (r0 r1 r2 r3)
  permission sv (p0)
}
init { (u0 r0) }
can_assign {
  (* (=r0) r1 label a0)
  (* (=r1) r2 label a1)
}
can_revoke {
  (* r1 label v0)
}
";
    let compiled = compile_policy(&parse_policy(text).unwrap()).unwrap();
    let inst = ConcreteInstance::from_policy(&compiled).unwrap();
    let sig = &compiled.policy.sig;
    let theory = &compiled.policy.theory;
    let rules = &compiled.policy.transitions;

    let mut rng = Rng::new(0xbeef);
    for _ in 0..40 {
        let k = ExistsFormula::single(random_cube(sig, &mut rng));
        let all = pre_image_all(sig, rules, &k, theory);
        let per_rule: Vec<ExistsFormula> = rules
            .iter()
            .map(|r| simplify(sig, &pre_image(sig, r, &k, theory), theory))
            .collect();
        for s in 0..(1u64 << 8) {
            let cfg = inst.to_configuration(s);
            let lhs = eval_exists(&cfg, &all.formula).unwrap();
            let rhs = per_rule.iter().any(|p| eval_exists(&cfg, p).unwrap());
            assert_eq!(lhs, rhs);
        }
    }
}

#[test]
fn simplify_preserves_models_and_never_grows() {
    let (sig, theory) = small_scene();
    let configs = all_small_configs(&sig);
    let mut rng = Rng::new(0xc0ffee);
    for _ in 0..100 {
        let f = random_formula(&sig, &mut rng);
        let s = simplify(&sig, &f, &theory);
        assert!(s.cubes.len() <= f.cubes.len());
        for c in &configs {
            assert_eq!(
                eval_exists(c, &f).unwrap(),
                eval_exists(c, &s).unwrap(),
                "simplification changed the model set"
            );
        }
    }
}

#[test]
fn entailment_coincides_with_containment() {
    // Validity of f => g modulo the theory against pointwise containment of
    // model sets over the fixed finite scene, on 200 random pairs.
    let (sig, theory) = small_scene();
    let configs = all_small_configs(&sig);
    let budget = Budget::default();
    let mut rng = Rng::new(0x1234);
    let mut nontrivial = 0;
    for _ in 0..200 {
        let f = random_formula(&sig, &mut rng);
        let g = random_formula(&sig, &mut rng);
        let contained = configs
            .iter()
            .all(|c| !eval_exists(c, &f).unwrap() || eval_exists(c, &g).unwrap());
        let entailed = entails(&sig, &theory, &f, &g, &[], &budget).unwrap();
        assert_eq!(entailed, contained);
        if contained {
            nontrivial += 1;
        }
    }
    assert!(nontrivial > 5, "suite too one-sided: {nontrivial}");
}

#[test]
fn check_sat_agrees_with_enumeration() {
    let (sig, theory) = small_scene();
    let configs = all_small_configs(&sig);
    let budget = Budget::default();
    let mut rng = Rng::new(0x77777);
    let mut sats = 0;
    for _ in 0..200 {
        let f = random_formula(&sig, &mut rng);
        let not_g = negate_exists(&random_formula(&sig, &mut rng));
        let p = BsrProblem::with_theory(sig.clone(), &theory).exists(&f).forall(&not_g);
        let verdict = check_sat(&p, &budget).unwrap().verdict;
        let brute = configs
            .iter()
            .any(|c| eval_exists(c, &f).unwrap() && eval_forall(c, &not_g).unwrap());
        assert_eq!(verdict == Verdict::Sat, brute);
        if brute {
            sats += 1;
        }
    }
    assert!(sats > 20 && sats < 200, "mix of verdicts expected: {sats}");
}

#[test]
fn returned_models_satisfy_their_problems() {
    let (sig, theory) = small_scene();
    let budget = Budget::default();
    let mut rng = Rng::new(0x99999);
    for _ in 0..100 {
        let f = random_formula(&sig, &mut rng);
        let p = BsrProblem::with_theory(sig.clone(), &theory).exists(&f);
        let r = check_sat(&p, &budget).unwrap();
        if r.verdict == Verdict::Sat {
            let model = r.model.expect("sat carries a model");
            assert!(eval_exists(&model, &f).unwrap());
            assert!(model.satisfies_theory(&theory).unwrap());
        }
    }
}

#[test]
fn cube_eval_equals_bruteforce_assignment_search() {
    // The optimized cube evaluator with binding propagation agrees with the
    // naive product enumeration.
    let (sig, _) = small_scene();
    let configs = all_small_configs(&sig);
    let mut rng = Rng::new(0x31337);
    for _ in 0..60 {
        let cube = random_cube(&sig, &mut rng);
        for cfg in configs.iter().take(16) {
            let smart = eval_cube(cfg, &cube).unwrap();
            let naive = naive_eval(cfg, &cube);
            assert_eq!(smart, naive);
        }
    }
}

fn naive_eval(cfg: &Configuration, cube: &Cube) -> bool {
    fn go(cfg: &Configuration, cube: &Cube, binding: &mut Vec<usize>, i: usize) -> bool {
        if i == cube.vars.len() {
            return cube.lits.iter().all(|l| {
                eval_forall(
                    cfg,
                    &rolereach_core::fol::ForallFormula {
                        vars: vec![],
                        matrix: rolereach_core::fol::Nnf::Lit(l.map_terms(&mut |t| match t {
                            Term::Var(v) => Term::Const(pin(cfg, cube.vars[v.0 as usize], binding[v.0 as usize])),
                            c => c,
                        })),
                    },
                )
                .unwrap()
            });
        }
        let size = cfg.domain[cube.vars[i].0 as usize];
        for e in 0..size {
            binding[i] = e;
            if go(cfg, cube, binding, i + 1) {
                return true;
            }
        }
        false
    }
    // Pin an element by naming it with some constant of the sort; the small
    // scene interprets the scalar constants bijectively.
    fn pin(cfg: &Configuration, sort: SortId, elem: usize) -> ConstId {
        for (i, c) in cfg.sig.consts.iter().enumerate() {
            if c.sort == sort && cfg.const_interp[i] == elem {
                return ConstId(i as u32);
            }
        }
        unreachable!("scalar scene names every element")
    }
    let mut binding = vec![0usize; cube.vars.len()];
    go(cfg, cube, &mut binding, 0)
}

#[test]
fn diagram_and_checksat_agree_on_pinned_structures() {
    // Under scalar-value theories the domain is pinned, so a structure's
    // diagram conjoined with a formula is satisfiable exactly when the
    // structure itself satisfies the formula.
    use rolereach_core::fol::config::diagram_formula;
    use rolereach_core::solver::{check_sat, BsrProblem, Budget, Verdict};

    let (sig, theory) = small_scene();
    let configs = all_small_configs(&sig);
    let budget = Budget::default();
    let mut rng = Rng::new(0xd1a6);
    for _ in 0..25 {
        let f = random_formula(&sig, &mut rng);
        for cfg in configs.iter().step_by(7) {
            let p = BsrProblem::with_theory(sig.clone(), &theory)
                .exists(&diagram_formula(cfg))
                .exists(&f);
            let sat = check_sat(&p, &budget).unwrap().verdict == Verdict::Sat;
            assert_eq!(sat, eval_exists(cfg, &f).unwrap());
        }
    }
}

#[test]
fn implicit_membership_holds_reflexively() {
    // Splicing implicit membership produces two literals; with a reflexive
    // seniority relation the held role itself witnesses them.
    use rolereach_core::fol::expand_ua_star;
    let mut sig = Signature::arbac();
    let r0 = sig.add_const("rr", ROLE).unwrap();
    let sig = Arc::new(sig);
    let mut cube = Cube::top();
    let u = cube.push_var(USER);
    expand_ua_star(&sig, &mut cube, Term::Var(u), Term::Const(r0), true).unwrap();
    assert_eq!(cube.lits.len(), 2);

    let mut preds = vec![BTreeSet::new(); sig.preds.len()];
    preds[sig.ua().0 as usize].insert(vec![0, 0]);
    preds[sig.senior().0 as usize].insert(vec![0, 0]);
    let cfg = Configuration::from_parts(sig.clone(), vec![1, 1, 1], vec![0], preds);
    assert!(eval_cube(&cfg, &cube).unwrap());

    // Without the reflexive pair the membership is not implied.
    let mut preds = vec![BTreeSet::new(); sig.preds.len()];
    preds[sig.ua().0 as usize].insert(vec![0, 0]);
    let cfg = Configuration::from_parts(sig.clone(), vec![1, 1, 1], vec![0], preds);
    assert!(!eval_cube(&cfg, &cube).unwrap());
}

#[test]
fn simplify_preserves_models_under_hierarchies() {
    // Seniority-literal saturation must only drop literals the partial-order
    // axioms and base facts actually entail: checked on every consistent
    // extension of a small declared hierarchy.
    use rolereach_core::policy::{compile_policy, parse::parse_policy};
    use rolereach_core::preimage::simplify;

    let text = "
sorts {
  user sv (w0)
  role sv (ta tb tc)
  permission open ()
}
hierarchy {
  (ta tb)
}
init { (w0 tb) }
";
    let compiled = compile_policy(&parse_policy(text).unwrap()).unwrap();
    let policy = &compiled.policy;
    let sig = &policy.sig;
    let roles: Vec<ConstId> = sig.consts_of(ROLE);

    // All partial orders over {ta, tb, tc} containing (ta, tb).
    let mut orders: Vec<Vec<Vec<bool>>> = Vec::new();
    for mask in 0..(1u32 << 9) {
        let mut m = vec![vec![false; 3]; 3];
        for (bit, (i, j)) in (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).enumerate() {
            m[i][j] = mask >> bit & 1 == 1 || i == j;
        }
        if !m[0][1] {
            continue;
        }
        let transitive = (0..3).all(|i| {
            (0..3).all(|j| {
                (0..3).all(|k| !(m[i][j] && m[j][k]) || m[i][k])
            })
        });
        let antisym = (0..3).all(|i| (0..3).all(|j| i == j || !(m[i][j] && m[j][i])));
        if transitive && antisym {
            orders.push(m);
        }
    }
    assert!(orders.len() > 3);

    let build = |ua_mask: u32, order: &Vec<Vec<bool>>| {
        let mut preds = vec![BTreeSet::new(); sig.preds.len()];
        for r in 0..3 {
            if ua_mask >> r & 1 == 1 {
                preds[sig.ua().0 as usize].insert(vec![0, r]);
            }
        }
        for (i, row) in order.iter().enumerate() {
            for (j, &holds) in row.iter().enumerate() {
                if holds {
                    preds[sig.senior().0 as usize].insert(vec![i, j]);
                }
            }
        }
        let mut const_interp = vec![0usize; sig.consts.len()];
        for (i, c) in roles.iter().enumerate() {
            const_interp[c.0 as usize] = i;
        }
        Configuration::from_parts(sig.clone(), vec![1, 3, 1], const_interp, preds)
    };

    let mut rng = Rng::new(0x0141);
    let senior = sig.senior();
    for _ in 0..60 {
        // Random cubes over ua, seniority and equations.
        let mut cube = Cube::top();
        let u = cube.push_var(USER);
        let r = cube.push_var(ROLE);
        for _ in 0..1 + rng.below(3) {
            let role_term = |rng: &mut Rng| {
                if rng.flip() {
                    Term::Var(r)
                } else {
                    Term::Const(roles[rng.below(3) as usize])
                }
            };
            match rng.below(3) {
                0 => cube.lits.push(Literal {
                    positive: rng.flip(),
                    atom: Atom::Pred { pred: sig.ua(), args: vec![Term::Var(u), role_term(&mut rng)] },
                }),
                1 => cube.lits.push(Literal {
                    positive: rng.flip(),
                    atom: Atom::Pred { pred: senior, args: vec![role_term(&mut rng), role_term(&mut rng)] },
                }),
                _ => cube.lits.push(Literal {
                    positive: rng.flip(),
                    atom: Atom::Eq(role_term(&mut rng), role_term(&mut rng)),
                }),
            }
        }
        let f = ExistsFormula::single(cube);
        let s = simplify(sig, &f, &policy.theory);
        for order in &orders {
            for ua_mask in 0..8u32 {
                let cfg = build(ua_mask, order);
                assert_eq!(
                    eval_exists(&cfg, &f).unwrap(),
                    eval_exists(&cfg, &s).unwrap(),
                    "hierarchy-aware simplification changed the model set"
                );
            }
        }
    }
}

#[test]
fn dpll_reference_mode_matches_cdcl_on_ground_problems() {
    let (sig, theory) = small_scene();
    let mut rng = Rng::new(0xd011);
    for _ in 0..60 {
        let f = random_formula(&sig, &mut rng);
        let g = negate_exists(&random_formula(&sig, &mut rng));
        let p = BsrProblem::with_theory(sig.clone(), &theory).exists(&f).forall(&g);
        let cdcl = check_sat(&p, &Budget::default()).unwrap().verdict;
        let dpll_budget = Budget { use_dpll: true, ..Budget::default() };
        let dpll = check_sat(&p, &dpll_budget).unwrap().verdict;
        assert_eq!(cdcl, dpll);
    }
}
