//! Minimal recursive DPLL with unit propagation. Slow and simple; kept as
//! the correctness reference for the CDCL core.

use super::{Cnf, Lit, SatOutcome};

pub fn solve(cnf: &Cnf) -> SatOutcome {
    let mut assign: Vec<i8> = vec![0; cnf.num_vars as usize];
    if go(cnf, &mut assign) {
        SatOutcome::Sat(assign.iter().map(|&a| a == 1).collect())
    } else {
        SatOutcome::Unsat
    }
}

fn value(assign: &[i8], l: Lit) -> i8 {
    let v = assign[l.var() as usize];
    if l.positive() {
        v
    } else {
        -v
    }
}

fn go(cnf: &Cnf, assign: &mut Vec<i8>) -> bool {
    // Unit propagation to fixpoint.
    let mut trail: Vec<u32> = Vec::new();
    loop {
        let mut changed = false;
        for clause in &cnf.clauses {
            let mut unassigned: Option<Lit> = None;
            let mut n_unassigned = 0;
            let mut satisfied = false;
            for &l in clause {
                match value(assign, l) {
                    1 => {
                        satisfied = true;
                        break;
                    }
                    0 => {
                        n_unassigned += 1;
                        unassigned = Some(l);
                    }
                    _ => {}
                }
            }
            if satisfied {
                continue;
            }
            match n_unassigned {
                0 => {
                    for v in trail {
                        assign[v as usize] = 0;
                    }
                    return false;
                }
                1 => {
                    let l = unassigned.unwrap();
                    assign[l.var() as usize] = if l.positive() { 1 } else { -1 };
                    trail.push(l.var());
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed {
            break;
        }
    }

    let branch = (0..cnf.num_vars).find(|&v| assign[v as usize] == 0);
    let done = match branch {
        None => true,
        Some(v) => {
            assign[v as usize] = 1;
            if go(cnf, assign) {
                true
            } else {
                assign[v as usize] = -1;
                if go(cnf, assign) {
                    true
                } else {
                    assign[v as usize] = 0;
                    false
                }
            }
        }
    };
    if !done {
        for v in trail {
            assign[v as usize] = 0;
        }
    }
    done
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_cnf_is_sat() {
        let cnf = Cnf { num_vars: 0, clauses: vec![] };
        assert!(matches!(solve(&cnf), SatOutcome::Sat(_)));
    }

    #[test]
    fn empty_clause_is_unsat() {
        let cnf = Cnf { num_vars: 1, clauses: vec![vec![]] };
        assert_eq!(solve(&cnf), SatOutcome::Unsat);
    }
}
