//! Propositional layer: CNF representation, Tseitin transformation of
//! ground formulae, a CDCL solver with two watched literals per clause and
//! a plain DPLL solver kept around as a correctness reference.

pub mod cdcl;
pub mod dpll;

/// A propositional literal: variable index shifted left, sign in bit 0.
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Lit(pub u32);

impl Lit {
    pub fn new(var: u32, positive: bool) -> Lit {
        Lit(var << 1 | u32::from(!positive))
    }

    pub fn var(self) -> u32 {
        self.0 >> 1
    }

    pub fn positive(self) -> bool {
        self.0 & 1 == 0
    }

    pub fn negated(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

#[derive(Default, Debug, Clone)]
pub struct Cnf {
    pub num_vars: u32,
    pub clauses: Vec<Vec<Lit>>,
}

impl Cnf {
    pub fn new_var(&mut self) -> u32 {
        self.num_vars += 1;
        self.num_vars - 1
    }

    pub fn add_clause(&mut self, lits: Vec<Lit>) {
        self.clauses.push(lits);
    }
}

/// Ground boolean structure over propositional atoms, in negation normal
/// form with constants folded.
#[derive(Clone, Debug, PartialEq)]
pub enum BoolExpr {
    Const(bool),
    Lit(Lit),
    And(Vec<BoolExpr>),
    Or(Vec<BoolExpr>),
}

impl BoolExpr {
    pub fn and(xs: Vec<BoolExpr>) -> BoolExpr {
        let mut flat = Vec::new();
        for x in xs {
            match x {
                BoolExpr::Const(true) => {}
                BoolExpr::Const(false) => return BoolExpr::Const(false),
                BoolExpr::And(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        if flat.is_empty() {
            BoolExpr::Const(true)
        } else if flat.len() == 1 {
            flat.pop().unwrap()
        } else {
            BoolExpr::And(flat)
        }
    }

    pub fn or(xs: Vec<BoolExpr>) -> BoolExpr {
        let mut flat = Vec::new();
        for x in xs {
            match x {
                BoolExpr::Const(false) => {}
                BoolExpr::Const(true) => return BoolExpr::Const(true),
                BoolExpr::Or(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        if flat.is_empty() {
            BoolExpr::Const(false)
        } else if flat.len() == 1 {
            flat.pop().unwrap()
        } else {
            BoolExpr::Or(flat)
        }
    }
}

/// Tseitin-encode `expr` and assert it; fresh definition variables are
/// appended to `cnf`.
pub fn assert_expr(cnf: &mut Cnf, expr: &BoolExpr) {
    match tseitin(cnf, expr) {
        TseitinOut::Const(true) => {}
        TseitinOut::Const(false) => cnf.add_clause(vec![]),
        TseitinOut::Lit(l) => cnf.add_clause(vec![l]),
    }
}

enum TseitinOut {
    Const(bool),
    Lit(Lit),
}

fn tseitin(cnf: &mut Cnf, expr: &BoolExpr) -> TseitinOut {
    match expr {
        BoolExpr::Const(b) => TseitinOut::Const(*b),
        BoolExpr::Lit(l) => TseitinOut::Lit(*l),
        BoolExpr::And(xs) => {
            let mut lits = Vec::with_capacity(xs.len());
            for x in xs {
                match tseitin(cnf, x) {
                    TseitinOut::Const(false) => return TseitinOut::Const(false),
                    TseitinOut::Const(true) => {}
                    TseitinOut::Lit(l) => lits.push(l),
                }
            }
            if lits.is_empty() {
                return TseitinOut::Const(true);
            }
            if lits.len() == 1 {
                return TseitinOut::Lit(lits[0]);
            }
            let d = Lit::new(cnf.new_var(), true);
            for l in &lits {
                cnf.add_clause(vec![d.negated(), *l]);
            }
            let mut big: Vec<Lit> = lits.iter().map(|l| l.negated()).collect();
            big.push(d);
            cnf.add_clause(big);
            TseitinOut::Lit(d)
        }
        BoolExpr::Or(xs) => {
            let mut lits = Vec::with_capacity(xs.len());
            for x in xs {
                match tseitin(cnf, x) {
                    TseitinOut::Const(true) => return TseitinOut::Const(true),
                    TseitinOut::Const(false) => {}
                    TseitinOut::Lit(l) => lits.push(l),
                }
            }
            if lits.is_empty() {
                return TseitinOut::Const(false);
            }
            if lits.len() == 1 {
                return TseitinOut::Lit(lits[0]);
            }
            let d = Lit::new(cnf.new_var(), true);
            for l in &lits {
                cnf.add_clause(vec![d, l.negated()]);
            }
            let mut big: Vec<Lit> = lits.clone();
            big.push(d.negated());
            cnf.add_clause(big);
            TseitinOut::Lit(d)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SatOutcome {
    Sat(Vec<bool>),
    Unsat,
    ConflictBudget,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(i: u32) -> BoolExpr {
        BoolExpr::Lit(Lit::new(i, true))
    }

    fn nv(i: u32) -> BoolExpr {
        BoolExpr::Lit(Lit::new(i, false))
    }

    #[test]
    fn tseitin_equisatisfiability_small() {
        // (x0 | x1) & (!x0 | x1) & !x1 is unsat.
        let mut cnf = Cnf { num_vars: 2, clauses: vec![] };
        let e = BoolExpr::and(vec![
            BoolExpr::or(vec![v(0), v(1)]),
            BoolExpr::or(vec![nv(0), v(1)]),
            nv(1),
        ]);
        assert_expr(&mut cnf, &e);
        assert_eq!(dpll::solve(&cnf), SatOutcome::Unsat);
    }

    #[test]
    fn constant_folding() {
        assert_eq!(BoolExpr::and(vec![BoolExpr::Const(true)]), BoolExpr::Const(true));
        assert_eq!(BoolExpr::or(vec![]), BoolExpr::Const(false));
        assert_eq!(
            BoolExpr::and(vec![BoolExpr::Const(false), v(3)]),
            BoolExpr::Const(false)
        );
    }
}
