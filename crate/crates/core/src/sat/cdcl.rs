//! Conflict-driven clause learning with two watched literals, first-UIP
//! learning, VSIDS-style activities, phase saving and Luby restarts.
//! Decisions are made deterministically so identical inputs give identical
//! runs and statistics.

use super::{Cnf, Lit, SatOutcome};

#[derive(Debug, Default, Clone)]
pub struct CdclStats {
    pub decisions: u64,
    pub conflicts: u64,
    pub propagations: u64,
    pub learned: u64,
    pub restarts: u64,
}

struct Clause {
    lits: Vec<Lit>,
}

pub struct Cdcl {
    clauses: Vec<Clause>,
    watches: Vec<Vec<usize>>, // per literal code: clause indices watching it
    assign: Vec<i8>,          // 0 unset, 1 true, -1 false
    level: Vec<u32>,
    reason: Vec<Option<usize>>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    queue_head: usize,
    activity: Vec<f64>,
    act_inc: f64,
    phase: Vec<bool>,
    pub stats: CdclStats,
    max_conflicts: u64,
}

pub fn solve(cnf: &Cnf, max_conflicts: u64) -> (SatOutcome, CdclStats) {
    let mut s = Cdcl::new(cnf, max_conflicts);
    let out = s.run();
    (out, s.stats)
}

impl Cdcl {
    fn new(cnf: &Cnf, max_conflicts: u64) -> Cdcl {
        let n = cnf.num_vars as usize;
        let mut s = Cdcl {
            clauses: Vec::with_capacity(cnf.clauses.len()),
            watches: vec![Vec::new(); 2 * n],
            assign: vec![0; n],
            level: vec![0; n],
            reason: vec![None; n],
            trail: Vec::new(),
            trail_lim: Vec::new(),
            queue_head: 0,
            activity: vec![0.0; n],
            act_inc: 1.0,
            phase: vec![false; n],
            stats: CdclStats::default(),
            max_conflicts,
        };
        for c in &cnf.clauses {
            // Duplicate literals would break the two-watch invariant, and
            // tautological clauses constrain nothing.
            let mut lits = c.clone();
            lits.sort_unstable();
            lits.dedup();
            if lits.windows(2).any(|w| w[0].var() == w[1].var()) {
                continue;
            }
            s.clauses.push(Clause { lits });
        }
        s
    }

    fn value(&self, l: Lit) -> i8 {
        let v = self.assign[l.var() as usize];
        if l.positive() {
            v
        } else {
            -v
        }
    }

    fn enqueue(&mut self, l: Lit, reason: Option<usize>) {
        let v = l.var() as usize;
        self.assign[v] = if l.positive() { 1 } else { -1 };
        self.level[v] = self.trail_lim.len() as u32;
        self.reason[v] = reason;
        self.phase[v] = l.positive();
        self.trail.push(l);
    }

    fn run(&mut self) -> SatOutcome {
        // Watch setup; unit and empty clauses handled up front.
        for ci in 0..self.clauses.len() {
            match self.clauses[ci].lits.len() {
                0 => return SatOutcome::Unsat,
                1 => {
                    let l = self.clauses[ci].lits[0];
                    match self.value(l) {
                        -1 => return SatOutcome::Unsat,
                        0 => self.enqueue(l, Some(ci)),
                        _ => {}
                    }
                }
                _ => {
                    let (a, b) = (self.clauses[ci].lits[0], self.clauses[ci].lits[1]);
                    self.watches[a.negated().0 as usize].push(ci);
                    self.watches[b.negated().0 as usize].push(ci);
                }
            }
        }
        if self.propagate().is_some() {
            return SatOutcome::Unsat;
        }

        let mut luby = Luby::new();
        let mut restart_budget = 64u64 * luby.next();
        loop {
            if let Some(conflict) = self.propagate() {
                self.stats.conflicts += 1;
                if self.stats.conflicts > self.max_conflicts {
                    return SatOutcome::ConflictBudget;
                }
                if self.trail_lim.is_empty() {
                    return SatOutcome::Unsat;
                }
                let (learnt, back_level) = self.analyze(conflict);
                self.backtrack(back_level);
                self.learn(learnt);
                self.decay_activity();
                if restart_budget > 0 {
                    restart_budget -= 1;
                } else {
                    self.stats.restarts += 1;
                    restart_budget = 64 * luby.next();
                    self.backtrack(0);
                }
            } else {
                match self.pick_branch() {
                    None => {
                        let model = self.assign.iter().map(|&a| a == 1).collect();
                        return SatOutcome::Sat(model);
                    }
                    Some(var) => {
                        self.stats.decisions += 1;
                        self.trail_lim.push(self.trail.len());
                        let lit = Lit::new(var, self.phase[var as usize]);
                        self.enqueue(lit, None);
                    }
                }
            }
        }
    }

    fn propagate(&mut self) -> Option<usize> {
        while self.queue_head < self.trail.len() {
            let l = self.trail[self.queue_head];
            self.queue_head += 1;
            self.stats.propagations += 1;
            let mut i = 0;
            let watch_key = l.0 as usize;
            'clauses: while i < self.watches[watch_key].len() {
                let ci = self.watches[watch_key][i];
                // The falsified literal must sit in slot 1.
                let falsified = l.negated();
                if self.clauses[ci].lits[0] == falsified {
                    self.clauses[ci].lits.swap(0, 1);
                }
                let first = self.clauses[ci].lits[0];
                if self.value(first) == 1 {
                    i += 1;
                    continue;
                }
                for k in 2..self.clauses[ci].lits.len() {
                    if self.value(self.clauses[ci].lits[k]) != -1 {
                        self.clauses[ci].lits.swap(1, k);
                        let new_watch = self.clauses[ci].lits[1];
                        self.watches[watch_key].swap_remove(i);
                        self.watches[new_watch.negated().0 as usize].push(ci);
                        continue 'clauses;
                    }
                }
                // No replacement: unit or conflicting.
                if self.value(first) == -1 {
                    self.queue_head = self.trail.len();
                    return Some(ci);
                }
                self.enqueue(first, Some(ci));
                i += 1;
            }
        }
        None
    }

    fn analyze(&mut self, conflict: usize) -> (Vec<Lit>, u32) {
        let current_level = self.trail_lim.len() as u32;
        let mut learnt: Vec<Lit> = vec![Lit(0)]; // slot for the asserting literal
        let mut seen = vec![false; self.assign.len()];
        let mut counter = 0usize;
        let mut index = self.trail.len();
        let mut resolved: Option<Lit> = None;
        let mut ci = conflict;

        loop {
            let clause_lits = self.clauses[ci].lits.clone();
            for q in clause_lits {
                // The implied literal of a reason clause is the one being resolved on.
                if Some(q) == resolved {
                    continue;
                }
                let v = q.var() as usize;
                if !seen[v] && self.level[v] > 0 {
                    seen[v] = true;
                    self.bump_activity(v);
                    if self.level[v] == current_level {
                        counter += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            // Walk the trail backwards to the next marked literal.
            loop {
                index -= 1;
                if seen[self.trail[index].var() as usize] {
                    break;
                }
            }
            let p = self.trail[index];
            seen[p.var() as usize] = false;
            counter -= 1;
            if counter == 0 {
                learnt[0] = p.negated();
                break;
            }
            ci = self.reason[p.var() as usize].expect("non-decision literal has a reason");
            resolved = Some(p);
        }

        let back_level = if learnt.len() == 1 {
            0
        } else {
            let mut max = 0;
            let mut max_i = 1;
            for (i, l) in learnt.iter().enumerate().skip(1) {
                if self.level[l.var() as usize] > max {
                    max = self.level[l.var() as usize];
                    max_i = i;
                }
            }
            learnt.swap(1, max_i);
            max
        };
        (learnt, back_level)
    }

    fn backtrack(&mut self, level: u32) {
        while self.trail_lim.len() as u32 > level {
            let lim = self.trail_lim.pop().unwrap();
            while self.trail.len() > lim {
                let l = self.trail.pop().unwrap();
                let v = l.var() as usize;
                self.assign[v] = 0;
                self.reason[v] = None;
            }
        }
        self.queue_head = self.trail.len();
    }

    fn learn(&mut self, learnt: Vec<Lit>) {
        self.stats.learned += 1;
        let asserting = learnt[0];
        if learnt.len() == 1 {
            self.enqueue(asserting, None);
            return;
        }
        let ci = self.clauses.len();
        self.watches[learnt[0].negated().0 as usize].push(ci);
        self.watches[learnt[1].negated().0 as usize].push(ci);
        self.clauses.push(Clause { lits: learnt });
        self.enqueue(asserting, Some(ci));
    }

    fn pick_branch(&self) -> Option<u32> {
        let mut best: Option<u32> = None;
        let mut best_act = -1.0f64;
        for v in 0..self.assign.len() {
            if self.assign[v] == 0 && self.activity[v] > best_act {
                best_act = self.activity[v];
                best = Some(v as u32);
            }
        }
        best
    }

    fn bump_activity(&mut self, v: usize) {
        self.activity[v] += self.act_inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.act_inc *= 1e-100;
        }
    }

    fn decay_activity(&mut self) {
        self.act_inc /= 0.95;
    }
}

struct Luby {
    u: u64,
    v: u64,
}

impl Luby {
    fn new() -> Luby {
        Luby { u: 1, v: 1 }
    }

    fn next(&mut self) -> u64 {
        let out = self.v;
        if (self.u & self.u.wrapping_neg()) == self.v {
            self.u += 1;
            self.v = 1;
        } else {
            self.v *= 2;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sat::dpll;

    fn lit(i: i64) -> Lit {
        Lit::new(i.unsigned_abs() as u32 - 1, i > 0)
    }

    #[test]
    fn trivial_sat() {
        let cnf = Cnf { num_vars: 2, clauses: vec![vec![lit(1), lit(2)], vec![lit(-1)]] };
        match solve(&cnf, 1_000).0 {
            SatOutcome::Sat(m) => {
                assert!(!m[0]);
                assert!(m[1]);
            }
            other => panic!("expected sat, got {other:?}"),
        }
    }

    #[test]
    fn trivial_unsat() {
        let cnf = Cnf {
            num_vars: 1,
            clauses: vec![vec![lit(1)], vec![lit(-1)]],
        };
        assert_eq!(solve(&cnf, 1_000).0, SatOutcome::Unsat);
    }

    #[test]
    fn pigeonhole_3_into_2_unsat() {
        // p(i,j): pigeon i in hole j; vars indexed i*2+j.
        let mut clauses = Vec::new();
        for i in 0..3u32 {
            clauses.push(vec![Lit::new(i * 2, true), Lit::new(i * 2 + 1, true)]);
        }
        for j in 0..2u32 {
            for a in 0..3u32 {
                for b in a + 1..3 {
                    clauses.push(vec![Lit::new(a * 2 + j, false), Lit::new(b * 2 + j, false)]);
                }
            }
        }
        let cnf = Cnf { num_vars: 6, clauses };
        assert_eq!(solve(&cnf, 100_000).0, SatOutcome::Unsat);
    }

    #[test]
    fn agrees_with_dpll_on_random_3sat() {
        // Deterministic xorshift generator; mixed sat/unsat instances.
        let mut state = 0x2545F4914F6CDD1Du64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for round in 0..200 {
            let nvars = 4 + (next() % 6) as u32;
            let nclauses = 6 + (next() % 30) as usize;
            let mut clauses = Vec::new();
            for _ in 0..nclauses {
                let mut c = Vec::new();
                for _ in 0..3 {
                    let v = (next() % nvars as u64) as u32;
                    c.push(Lit::new(v, next() & 1 == 0));
                }
                clauses.push(c);
            }
            let cnf = Cnf { num_vars: nvars, clauses };
            let (got, _) = solve(&cnf, 1_000_000);
            let want = dpll::solve(&cnf);
            match (&got, &want) {
                (SatOutcome::Sat(model), SatOutcome::Sat(_)) => {
                    for clause in &cnf.clauses {
                        assert!(
                            clause.iter().any(|l| model[l.var() as usize] == l.positive()),
                            "round {round}: model violates clause"
                        );
                    }
                }
                (SatOutcome::Unsat, SatOutcome::Unsat) => {}
                other => panic!("round {round}: disagreement {other:?}"),
            }
        }
    }
}
