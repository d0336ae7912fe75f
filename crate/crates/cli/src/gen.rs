//! Random benchmark-instance generation: flat hierarchies, scalar sorts,
//! mixed assignments and revocations. Two shapes are supported: fully random
//! instances for differential testing, and chained families whose goal size
//! drives the search depth, mirroring the third class of the published
//! synthetic benchmarks. Parameter distributions are our own.

use crate::rng::Rng;
use rolereach_core::policy::{
    CanAssignDecl, CanRevokeDecl, GoalCmp, GoalDecl, GoalPair, InitDecl, PolicyDecls,
    RoleExprDecl, SchemaOrRole, SortSection,
};

#[derive(Clone, Debug)]
pub struct GenParams {
    pub users: u32,
    pub roles: u32,
    pub assigns: u32,
    pub revokes: u32,
    pub goal_size: u32,
    /// Maximum precondition width of random assignment rules.
    pub pre_width: u32,
    pub smer: u32,
    /// Percentage of precondition entries that are negative.
    pub neg_pct: u32,
    pub with_permission: bool,
    /// Seed a chain of assignments so reaching the goal takes at least
    /// goal-size steps.
    pub chain: bool,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> GenParams {
        GenParams {
            users: 2,
            roles: 6,
            assigns: 5,
            revokes: 3,
            goal_size: 1,
            pre_width: 2,
            smer: 1,
            neg_pct: 25,
            with_permission: false,
            chain: false,
            seed: 0,
        }
    }
}

pub fn gen_random(params: &GenParams) -> PolicyDecls {
    let mut rng = Rng::new(params.seed ^ 0xA5A5_5A5A_D00D_F00D);
    let users: Vec<String> = (0..params.users.max(1)).map(|i| format!("u{i}")).collect();
    let roles: Vec<String> = (0..params.roles.max(2)).map(|i| format!("r{i}")).collect();

    let mut decls = PolicyDecls {
        user: SortSection { scalar: true, consts: users.clone() },
        role: SortSection { scalar: true, consts: roles.clone() },
        permission: SortSection {
            scalar: params.with_permission,
            consts: if params.with_permission { vec!["q0".into()] } else { vec![] },
        },
        ..PolicyDecls::default()
    };

    let goal_size = params.goal_size.clamp(1, roles.len() as u32 - 1) as usize;
    let goal_roles: Vec<String> =
        roles[roles.len() - goal_size..].to_vec();
    let support_roles: Vec<String> =
        roles[..roles.len() - goal_size].to_vec();

    // Mutual exclusions first, then an initial state that respects them.
    for _ in 0..params.smer {
        let a = rng.pick(&support_roles).clone();
        let b = rng.pick(&roles).clone();
        if a != b && !decls.smer.contains(&(a.clone(), b.clone())) {
            decls.smer.push((a, b));
        }
    }

    let mut init: Vec<(String, String)> = Vec::new();
    for u in &users {
        for r in &support_roles {
            if rng.chance(35) {
                init.push((u.clone(), r.clone()));
            }
        }
    }
    if params.chain && !init.iter().any(|(u, r)| u == &users[0] && r == &roles[0]) {
        init.push((users[0].clone(), roles[0].clone()));
    }
    // Drop the later member of any mutually exclusive pair.
    let mut kept: Vec<(String, String)> = Vec::new();
    for (u, r) in init {
        let clash = decls.smer.iter().any(|(a, b)| {
            (r == *a && kept.iter().any(|(ku, kr)| ku == &u && kr == b))
                || (r == *b && kept.iter().any(|(ku, kr)| ku == &u && kr == a))
        });
        if !clash {
            kept.push((u, r));
        }
    }
    decls.init = InitDecl::Facts(kept);

    if params.with_permission {
        let mut pa = Vec::new();
        for r in &roles {
            if rng.chance(30) {
                pa.push(("q0".to_string(), r.clone()));
            }
        }
        decls.pa = Some(pa);
    }

    let expr = |role: String, positive: bool, explicit: bool| RoleExprDecl {
        role: SchemaOrRole::Role(role),
        positive,
        explicit,
    };

    if params.chain {
        // A dependency chain through the goal roles: each needs the one
        // before it, the first needs the base role.
        let mut prev = roles[0].clone();
        for g in &goal_roles {
            decls.can_assign.push(CanAssignDecl {
                admin: None,
                precond: vec![expr(prev.clone(), true, true)],
                target: SchemaOrRole::Role(g.clone()),
                trusted_excluded: vec![],
                label: None,
            });
            prev = g.clone();
        }
    }

    let remaining = (params.assigns as usize).saturating_sub(decls.can_assign.len());
    for _ in 0..remaining {
        let admin = if rng.chance(40) { Some(SchemaOrRole::Role(rng.pick(&roles).clone())) } else { None };
        let width = rng.below(params.pre_width as u64 + 1) as usize;
        let mut precond = Vec::new();
        for _ in 0..width {
            let role = rng.pick(&roles).clone();
            let positive = !rng.chance(params.neg_pct as u64);
            // Negative expressions are always explicit; positives pick a
            // style at random (equivalent on flat instances).
            let explicit = !positive || rng.chance(50);
            precond.push(expr(role, positive, explicit));
        }
        let target = if params.chain {
            SchemaOrRole::Role(rng.pick(&support_roles).clone())
        } else {
            SchemaOrRole::Role(rng.pick(&roles).clone())
        };
        let trusted_excluded = if admin.is_some() && users.len() > 1 && rng.chance(20) {
            vec![rng.pick(&users).clone()]
        } else {
            vec![]
        };
        decls.can_assign.push(CanAssignDecl { admin, precond, target, trusted_excluded, label: None });
    }

    for _ in 0..params.revokes {
        let admin = if rng.chance(30) { Some(SchemaOrRole::Role(rng.pick(&roles).clone())) } else { None };
        let target = rng.pick(&roles).clone();
        decls.can_revoke.push(CanRevokeDecl { admin, target: SchemaOrRole::Role(target), label: None });
    }

    let pairs = goal_roles
        .iter()
        .map(|g| GoalPair {
            role: g.clone(),
            cmp: GoalCmp::Eq,
            permission: None,
        })
        .collect();
    decls.goal = Some(GoalDecl { user: Some(users[0].clone()), pairs });

    decls
}

/// Render the generated declarations in the policy language.
pub fn decls_to_text(decls: &PolicyDecls) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let section = |out: &mut String, name: &str, rows: &[String]| {
        let _ = writeln!(out, "{name} {{");
        for r in rows {
            let _ = writeln!(out, "  {r}");
        }
        let _ = writeln!(out, "}}");
    };

    let sort_row = |name: &str, s: &SortSection| {
        format!(
            "{name} {} ({})",
            if s.scalar { "sv" } else { "open" },
            s.consts.join(" ")
        )
    };
    section(
        &mut out,
        "sorts",
        &[
            sort_row("user", &decls.user),
            sort_row("role", &decls.role),
            sort_row("permission", &decls.permission),
        ],
    );

    if !decls.hierarchy.is_empty() {
        let rows: Vec<String> =
            decls.hierarchy.iter().map(|(a, b)| format!("({a} {b})")).collect();
        section(&mut out, "hierarchy", &rows);
    }
    if let Some(pa) = &decls.pa {
        let rows: Vec<String> = pa.iter().map(|(p, r)| format!("({p} {r})")).collect();
        section(&mut out, "pa", &rows);
    }
    match &decls.init {
        InitDecl::Facts(facts) => {
            let rows: Vec<String> = facts.iter().map(|(u, r)| format!("({u} {r})")).collect();
            section(&mut out, "init", &rows);
        }
        InitDecl::Formula(f) => section(&mut out, "init", std::slice::from_ref(f)),
    }
    if !decls.smer.is_empty() {
        let rows: Vec<String> = decls.smer.iter().map(|(a, b)| format!("({a} {b})")).collect();
        section(&mut out, "smer", &rows);
    }
    if !decls.constraints.is_empty() {
        section(&mut out, "constraints", &decls.constraints.clone());
    }
    if !decls.schemas.is_empty() {
        let rows: Vec<String> = decls
            .schemas
            .iter()
            .map(|s| {
                let mut row = format!("({} ({})", s.name, s.params.join(" "));
                if let Some(c) = &s.contains {
                    row.push_str(&format!(" contains {c}"));
                }
                row.push(')');
                row
            })
            .collect();
        section(&mut out, "schemas", &rows);
    }

    let role_text = |r: &SchemaOrRole| match r {
        SchemaOrRole::Role(name) => name.clone(),
        SchemaOrRole::Schema { name, params } => format!("({} {})", name, params.join(" ")),
    };
    if !decls.can_assign.is_empty() {
        let rows: Vec<String> = decls
            .can_assign
            .iter()
            .map(|a| {
                let admin = a.admin.as_ref().map(&role_text).unwrap_or_else(|| "*".into());
                let pre: Vec<String> = a
                    .precond
                    .iter()
                    .map(|e| match (&e.role, e.positive, e.explicit) {
                        (SchemaOrRole::Role(r), true, true) => format!("={r}"),
                        (SchemaOrRole::Role(r), true, false) => r.clone(),
                        (SchemaOrRole::Role(r), false, _) => format!("!{r}"),
                        (s @ SchemaOrRole::Schema { .. }, true, _) => role_text(s),
                        (s @ SchemaOrRole::Schema { .. }, false, _) => {
                            format!("(! {})", role_text(s))
                        }
                    })
                    .collect();
                let mut row = format!("({admin} ({}) {}", pre.join(" "), role_text(&a.target));
                if !a.trusted_excluded.is_empty() {
                    row.push_str(&format!(" deny ({})", a.trusted_excluded.join(" ")));
                }
                if let Some(l) = &a.label {
                    row.push_str(&format!(" label {l}"));
                }
                row.push(')');
                row
            })
            .collect();
        section(&mut out, "can_assign", &rows);
    }
    if !decls.can_revoke.is_empty() {
        let rows: Vec<String> = decls
            .can_revoke
            .iter()
            .map(|r| {
                let admin = r.admin.as_ref().map(&role_text).unwrap_or_else(|| "*".into());
                let mut row = format!("({admin} {}", role_text(&r.target));
                if let Some(l) = &r.label {
                    row.push_str(&format!(" label {l}"));
                }
                row.push(')');
                row
            })
            .collect();
        section(&mut out, "can_revoke", &rows);
    }
    if let Some(goal) = &decls.goal {
        let mut rows = Vec::new();
        if let Some(u) = &goal.user {
            rows.push(format!("(user {u})"));
        }
        for p in &goal.pairs {
            let cmp = match p.cmp {
                GoalCmp::Eq => "eq",
                GoalCmp::Senior => "ge",
            };
            match &p.permission {
                Some(q) => rows.push(format!("({cmp} {} perm {q})", p.role)),
                None => rows.push(format!("({cmp} {})", p.role)),
            }
        }
        section(&mut out, "goal", &rows);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rolereach_core::policy::{compile_policy, parse::parse_policy};

    #[test]
    fn fixed_seed_is_byte_identical() {
        let params = GenParams { seed: 42, roles: 8, goal_size: 1, ..GenParams::default() };
        let a = decls_to_text(&gen_random(&params));
        let b = decls_to_text(&gen_random(&params));
        assert_eq!(a, b);
    }

    #[test]
    fn generated_instances_parse_and_compile() {
        for seed in 0..30u64 {
            let params = GenParams {
                seed,
                roles: 6,
                users: 2,
                goal_size: 1 + (seed % 3) as u32,
                chain: seed % 2 == 0,
                with_permission: seed % 5 == 0,
                ..GenParams::default()
            };
            let decls = gen_random(&params);
            let text = decls_to_text(&decls);
            let parsed = parse_policy(&text).expect("generated text parses");
            assert_eq!(parsed, decls, "round trip through the text form");
            compile_policy(&decls).expect("generated instance compiles");
        }
    }

    #[test]
    fn init_respects_mutual_exclusions() {
        for seed in 0..50u64 {
            let params = GenParams { seed, smer: 3, ..GenParams::default() };
            let decls = gen_random(&params);
            if let InitDecl::Facts(facts) = &decls.init {
                for (a, b) in &decls.smer {
                    for u in &decls.user.consts {
                        let has = |r: &String| facts.iter().any(|(fu, fr)| fu == u && fr == r);
                        assert!(!(has(a) && has(b)), "seed {seed}: init violates exclusion");
                    }
                }
            }
        }
    }
}
