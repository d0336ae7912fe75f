//! Independent explicit-state semantics at fixed finite scale: concrete
//! policy instances, transition stepping over bitset states, and forward
//! breadth-first reachability. This module is the ground truth the symbolic
//! engine is validated against; it exists to validate, not to compete.

pub mod eval;

use crate::fol::config::Configuration;
use crate::fol::{ConstId, SharedSignature, Term, PERMISSION, ROLE, USER};
use crate::policy::{CompiledPolicy, InitDecl, SchemaOrRole, TransitionRule};
use std::collections::{BTreeSet, HashMap, VecDeque};
use thiserror::Error;

#[derive(Error, Debug, PartialEq, Eq)]
pub enum OracleError {
    #[error("sort `{0}` must carry a scalar-value theory for concrete analysis")]
    OpenSort(String),
    #[error("initial state must be given as facts, not a formula")]
    InitNotConcrete,
    #[error("parametric roles are outside the concrete oracle's scope")]
    Parametric,
    #[error("raw universal constraints are outside the concrete oracle's scope")]
    UnsupportedConstraint,
    #[error("state space larger than the cap of {0} states")]
    StateSpaceCap(usize),
    #[error("instance too large: {0} user-role bits")]
    TooLarge(usize),
}

/// A user-role assignment as a bitset: bit (u * n_roles + r).
pub type UaState = u64;

#[derive(Clone, Debug)]
pub struct ConcretePrecond {
    pub role: usize,
    pub positive: bool,
    pub implicit: bool,
}

#[derive(Clone, Debug)]
pub enum ConcreteRule {
    Assign {
        admin: Option<usize>,
        admin_implicit: bool,
        pre: Vec<ConcretePrecond>,
        target: usize,
        excluded_admins: BTreeSet<usize>,
        label: String,
    },
    Revoke {
        admin: Option<usize>,
        admin_implicit: bool,
        target: usize,
        label: String,
    },
}

impl ConcreteRule {
    pub fn label(&self) -> &str {
        match self {
            ConcreteRule::Assign { label, .. } | ConcreteRule::Revoke { label, .. } => label,
        }
    }
}

/// A concrete instance: finite element lists, the hierarchy closure, the
/// permission assignment, concrete actions and the single initial state.
#[derive(Clone, Debug)]
pub struct ConcreteInstance {
    pub sig: SharedSignature,
    pub users: Vec<ConstId>,
    pub roles: Vec<ConstId>,
    pub perms: Vec<ConstId>,
    /// closure[senior][junior]; reflexive.
    pub closure: Vec<Vec<bool>>,
    pub pa: BTreeSet<(usize, usize)>,
    pub rules: Vec<ConcreteRule>,
    pub init_ua: UaState,
    pub smer: Vec<(usize, usize)>,
}

pub const DEFAULT_STATE_CAP: usize = 1 << 20;

impl ConcreteInstance {
    pub fn from_policy(compiled: &CompiledPolicy) -> Result<ConcreteInstance, OracleError> {
        let decls = &compiled.decls;
        let sig = compiled.policy.sig.clone();
        if !decls.user.scalar {
            return Err(OracleError::OpenSort("User".into()));
        }
        if !decls.role.scalar {
            return Err(OracleError::OpenSort("Role".into()));
        }
        if !decls.schemas.is_empty() {
            return Err(OracleError::Parametric);
        }
        if !decls.constraints.is_empty() {
            return Err(OracleError::UnsupportedConstraint);
        }

        let users: Vec<ConstId> = decls.user.consts.iter().map(|n| sig.const_id(n).unwrap()).collect();
        let roles: Vec<ConstId> = decls.role.consts.iter().map(|n| sig.const_id(n).unwrap()).collect();
        let perms: Vec<ConstId> =
            decls.permission.consts.iter().map(|n| sig.const_id(n).unwrap()).collect();
        if users.len() * roles.len() > 64 {
            return Err(OracleError::TooLarge(users.len() * roles.len()));
        }

        let user_idx = |name: &str| decls.user.consts.iter().position(|c| c == name);
        let role_idx = |name: &str| decls.role.consts.iter().position(|c| c == name);
        let perm_idx = |name: &str| decls.permission.consts.iter().position(|c| c == name);

        let n = roles.len();
        let mut closure = vec![vec![false; n]; n];
        for (i, row) in closure.iter_mut().enumerate() {
            row[i] = true;
        }
        for (s, j) in &decls.hierarchy {
            closure[role_idx(s).unwrap()][role_idx(j).unwrap()] = true;
        }
        for k in 0..n {
            for i in 0..n {
                if closure[i][k] {
                    let row_k: Vec<bool> = closure[k].clone();
                    for (j, &via) in row_k.iter().enumerate() {
                        if via {
                            closure[i][j] = true;
                        }
                    }
                }
            }
        }

        let pa: BTreeSet<(usize, usize)> = decls
            .pa
            .as_deref()
            .unwrap_or(&[])
            .iter()
            .map(|(p, r)| (perm_idx(p).unwrap(), role_idx(r).unwrap()))
            .collect();

        let init_ua = match &decls.init {
            InitDecl::Facts(facts) => {
                let mut s: UaState = 0;
                for (u, r) in facts {
                    s |= 1 << (user_idx(u).unwrap() * n + role_idx(r).unwrap());
                }
                s
            }
            InitDecl::Formula(_) => return Err(OracleError::InitNotConcrete),
        };

        let concrete_role = |expr: &SchemaOrRole| -> Result<usize, OracleError> {
            match expr {
                SchemaOrRole::Role(name) => Ok(role_idx(name).unwrap()),
                SchemaOrRole::Schema { .. } => Err(OracleError::Parametric),
            }
        };

        let hierarchical = !decls.hierarchy.is_empty();
        let mut rules = Vec::new();
        for (i, a) in decls.can_assign.iter().enumerate() {
            let admin = a.admin.as_ref().map(&concrete_role).transpose()?;
            let pre: Result<Vec<ConcretePrecond>, OracleError> = a
                .precond
                .iter()
                .map(|e| {
                    Ok(ConcretePrecond {
                        role: concrete_role(&e.role)?,
                        positive: e.positive,
                        implicit: e.positive && !e.explicit && hierarchical,
                    })
                })
                .collect();
            rules.push(ConcreteRule::Assign {
                admin,
                admin_implicit: hierarchical,
                pre: pre?,
                target: concrete_role(&a.target)?,
                excluded_admins: a
                    .trusted_excluded
                    .iter()
                    .map(|u| user_idx(u).unwrap())
                    .collect(),
                label: a.label.clone().unwrap_or_else(|| format!("assign#{i}")),
            });
        }
        for (i, r) in decls.can_revoke.iter().enumerate() {
            rules.push(ConcreteRule::Revoke {
                admin: r.admin.as_ref().map(&concrete_role).transpose()?,
                admin_implicit: hierarchical,
                target: concrete_role(&r.target)?,
                label: r.label.clone().unwrap_or_else(|| format!("revoke#{i}")),
            });
        }

        let smer: Vec<(usize, usize)> = decls
            .smer
            .iter()
            .map(|(a, b)| (role_idx(a).unwrap(), role_idx(b).unwrap()))
            .collect();

        Ok(ConcreteInstance {
            sig,
            users,
            roles,
            perms,
            closure,
            pa,
            rules,
            init_ua,
            smer,
        })
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_roles(&self) -> usize {
        self.roles.len()
    }

    fn has(&self, s: UaState, user: usize, role: usize) -> bool {
        s >> (user * self.n_roles() + role) & 1 == 1
    }

    /// Implicit membership: some held role at least as senior as `role`.
    fn member_implicit(&self, s: UaState, user: usize, role: usize) -> bool {
        (0..self.n_roles()).any(|r| self.has(s, user, r) && self.closure[r][role])
    }

    fn satisfies_admin(
        &self,
        s: UaState,
        admin: Option<usize>,
        implicit: bool,
        excluded: &BTreeSet<usize>,
    ) -> bool {
        match admin {
            None => true,
            Some(role) => (0..self.n_users()).any(|u| {
                !excluded.contains(&u)
                    && if implicit { self.member_implicit(s, u, role) } else { self.has(s, u, role) }
            }),
        }
    }

    pub fn violates_constraints(&self, s: UaState) -> bool {
        self.smer.iter().any(|(a, b)| {
            (0..self.n_users()).any(|u| self.has(s, u, *a) && self.has(s, u, *b))
        })
    }

    /// All successor states of `s` under one rule, over every enabling
    /// valuation of administrator and subject. Constraint-violating
    /// successors are pruned when `prune` is set.
    pub fn step(&self, rule: &ConcreteRule, s: UaState, prune: bool) -> Vec<UaState> {
        let mut out = Vec::new();
        match rule {
            ConcreteRule::Assign { admin, admin_implicit, pre, target, excluded_admins, .. } => {
                if !self.satisfies_admin(s, *admin, *admin_implicit, excluded_admins) {
                    return out;
                }
                for subject in 0..self.n_users() {
                    let ok = pre.iter().all(|p| {
                        let m = if p.implicit {
                            self.member_implicit(s, subject, p.role)
                        } else {
                            self.has(s, subject, p.role)
                        };
                        m == p.positive
                    });
                    if ok {
                        let next = s | 1 << (subject * self.n_roles() + target);
                        if !(prune && self.violates_constraints(next)) {
                            out.push(next);
                        }
                    }
                }
            }
            ConcreteRule::Revoke { admin, admin_implicit, target, .. } => {
                if !self.satisfies_admin(s, *admin, *admin_implicit, &BTreeSet::new()) {
                    return out;
                }
                for subject in 0..self.n_users() {
                    let next = s & !(1 << (subject * self.n_roles() + target));
                    if !(prune && self.violates_constraints(next)) {
                        out.push(next);
                    }
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// View a bitset state as a finite structure for formula evaluation.
    pub fn to_configuration(&self, s: UaState) -> Configuration {
        let sig = self.sig.clone();
        let mut domain = vec![0usize; sig.sorts.len()];
        domain[USER.0 as usize] = self.n_users();
        domain[ROLE.0 as usize] = self.n_roles();
        domain[PERMISSION.0 as usize] = self.perms.len();

        let mut const_interp = vec![0usize; sig.consts.len()];
        for (i, c) in self.users.iter().enumerate() {
            const_interp[c.0 as usize] = i;
        }
        for (i, c) in self.roles.iter().enumerate() {
            const_interp[c.0 as usize] = i;
        }
        for (i, c) in self.perms.iter().enumerate() {
            const_interp[c.0 as usize] = i;
        }

        let mut preds = vec![BTreeSet::new(); sig.preds.len()];
        for u in 0..self.n_users() {
            for r in 0..self.n_roles() {
                if self.has(s, u, r) {
                    preds[sig.ua().0 as usize].insert(vec![u, r]);
                }
            }
        }
        for (p, r) in &self.pa {
            preds[sig.pa().0 as usize].insert(vec![*p, *r]);
        }
        for (senior, row) in self.closure.iter().enumerate() {
            for (junior, &holds) in row.iter().enumerate() {
                if holds {
                    preds[sig.senior().0 as usize].insert(vec![senior, junior]);
                }
            }
        }
        Configuration::from_parts(sig, domain, const_interp, preds)
    }

    /// Breadth-first search over the reachable user-role assignments.
    /// States violating the constraints are not enqueued; the initial state
    /// is admitted only when it satisfies them.
    pub fn forward_reach(
        &self,
        goal: &dyn Fn(&ConcreteInstance, UaState) -> bool,
        cap: usize,
    ) -> Result<ForwardResult, OracleError> {
        if self.violates_constraints(self.init_ua) {
            return Ok(ForwardResult::Unreachable { explored: 0 });
        }
        let mut parent: HashMap<UaState, (UaState, usize)> = HashMap::new();
        let mut queue: VecDeque<UaState> = VecDeque::new();
        let mut seen: BTreeSet<UaState> = BTreeSet::new();
        queue.push_back(self.init_ua);
        seen.insert(self.init_ua);

        while let Some(s) = queue.pop_front() {
            if goal(self, s) {
                return Ok(ForwardResult::Reachable { run: self.rebuild_run(&parent, s) });
            }
            for (ri, rule) in self.rules.iter().enumerate() {
                for next in self.step(rule, s, true) {
                    if seen.insert(next) {
                        if seen.len() > cap {
                            return Err(OracleError::StateSpaceCap(cap));
                        }
                        parent.insert(next, (s, ri));
                        queue.push_back(next);
                    }
                }
            }
        }
        Ok(ForwardResult::Unreachable { explored: seen.len() })
    }

    /// Every constraint-respecting state reachable from the initial one.
    pub fn reachable_states(&self, cap: usize) -> Result<BTreeSet<UaState>, OracleError> {
        let mut seen: BTreeSet<UaState> = BTreeSet::new();
        if self.violates_constraints(self.init_ua) {
            return Ok(seen);
        }
        let mut queue: VecDeque<UaState> = VecDeque::new();
        queue.push_back(self.init_ua);
        seen.insert(self.init_ua);
        while let Some(s) = queue.pop_front() {
            for rule in &self.rules {
                for next in self.step(rule, s, true) {
                    if seen.insert(next) {
                        if seen.len() > cap {
                            return Err(OracleError::StateSpaceCap(cap));
                        }
                        queue.push_back(next);
                    }
                }
            }
        }
        Ok(seen)
    }

    fn rebuild_run(
        &self,
        parent: &HashMap<UaState, (UaState, usize)>,
        last: UaState,
    ) -> Vec<(Option<String>, UaState)> {
        let mut rev = vec![];
        let mut cur = last;
        while let Some((prev, ri)) = parent.get(&cur) {
            rev.push((Some(self.rules[*ri].label().to_string()), cur));
            cur = *prev;
        }
        rev.push((None, cur));
        rev.reverse();
        rev
    }

    /// Goal check that evaluates the compiled symbolic goal on the state.
    pub fn goal_checker<'a>(
        goal: &'a crate::fol::ExistsFormula,
    ) -> impl Fn(&ConcreteInstance, UaState) -> bool + 'a {
        move |inst, s| {
            let cfg = inst.to_configuration(s);
            eval::eval_exists(&cfg, goal).unwrap_or(false)
        }
    }
}

#[derive(Debug)]
pub enum ForwardResult {
    Reachable { run: Vec<(Option<String>, UaState)> },
    Unreachable { explored: usize },
}

/// Forward application of a symbolic transition rule on a configuration:
/// all successors over the guard's satisfying valuations. Used to replay
/// extracted traces independently of the bitset machinery.
pub fn successors_via_rule(cfg: &Configuration, rule: &TransitionRule) -> Vec<Configuration> {
    let guard = &rule.guard;
    let nvars = guard.vars.len();
    let mut out: Vec<Configuration> = Vec::new();
    let mut seen: BTreeSet<Vec<Vec<usize>>> = BTreeSet::new();

    let mut binding = vec![0usize; nvars];
    let sizes: Vec<usize> = guard.vars.iter().map(|s| cfg.domain[s.0 as usize]).collect();
    if sizes.contains(&0) {
        return out;
    }
    loop {
        let enabled = guard
            .lits
            .iter()
            .all(|lit| eval::eval_nnf(cfg, &binding, &crate::fol::Nnf::Lit(lit.clone())).unwrap_or(false));
        if enabled {
            let subject = binding[rule.subject.0 as usize];
            let target = match rule.target_role {
                Term::Const(c) => cfg.elem_of_const(c),
                Term::Var(v) => binding[v.0 as usize],
            };
            let mut next = cfg.clone();
            let ua = cfg.sig.ua().0 as usize;
            match rule.kind {
                crate::policy::RuleKind::Assign => {
                    next.preds[ua].insert(vec![subject, target]);
                }
                crate::policy::RuleKind::Revoke => {
                    next.preds[ua].remove(&vec![subject, target]);
                }
            }
            let key: Vec<Vec<usize>> = next.preds[ua].iter().cloned().collect();
            if seen.insert(key) {
                out.push(next);
            }
        }
        if nvars == 0 {
            break;
        }
        let mut i = 0;
        loop {
            if i == nvars {
                return out;
            }
            binding[i] += 1;
            if binding[i] < sizes[i] {
                break;
            }
            binding[i] = 0;
            i += 1;
        }
    }
    out
}
