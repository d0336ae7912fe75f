//! Decision procedure for the satisfiability of exists-forall sentences
//! modulo a universal theory, with finite-model extraction. Decidability
//! comes from finite grounding: the Herbrand universe of a function-free
//! sentence is just its constants.

pub mod ground;
pub mod smtlib;

use crate::fol::config::Configuration;
use crate::fol::{
    negate_exists, ConstId, ExistsFormula, ForallFormula, SharedSignature, SortId, UniversalTheory,
};
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

pub use ground::{GExpr, GroundBuilder};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum SolverError {
    #[error("resource budget exceeded (conflicts={conflicts}, ground size={clauses})")]
    Timeout { conflicts: u64, clauses: usize },
    #[error("signature error: {0}")]
    Signature(String),
}

#[derive(Clone, Debug)]
pub struct Budget {
    pub max_conflicts: u64,
    pub max_clauses: usize,
    pub max_instantiations: usize,
    /// Correctness-reference mode: decide with plain DPLL instead of CDCL.
    pub use_dpll: bool,
}

impl Default for Budget {
    fn default() -> Budget {
        Budget {
            max_conflicts: 2_000_000,
            max_clauses: 8_000_000,
            max_instantiations: 2_000_000,
            use_dpll: false,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SolverStats {
    pub ground_clauses: usize,
    pub ground_atoms: usize,
    pub decisions: u64,
    pub conflicts: u64,
    pub wall_ms: u128,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Sat,
    Unsat,
}

#[derive(Debug)]
pub struct SatResult {
    pub verdict: Verdict,
    /// Present exactly when the verdict is sat.
    pub model: Option<Configuration>,
    pub stats: SolverStats,
}

/// An exists-forall satisfiability problem modulo a universal theory: the
/// conjunction of existential formulae and universal sentences.
#[derive(Clone, Debug)]
pub struct BsrProblem {
    pub sig: SharedSignature,
    pub sv: BTreeMap<SortId, Vec<ConstId>>,
    pub exists: Vec<ExistsFormula>,
    pub forall: Vec<ForallFormula>,
}

impl BsrProblem {
    pub fn new(sig: SharedSignature) -> BsrProblem {
        BsrProblem { sig, sv: BTreeMap::new(), exists: Vec::new(), forall: Vec::new() }
    }

    pub fn with_theory(sig: SharedSignature, theory: &UniversalTheory) -> BsrProblem {
        let mut p = BsrProblem::new(sig);
        p.sv = theory.sv.clone();
        p.forall.extend(theory.axioms.iter().cloned());
        p
    }

    pub fn exists(mut self, f: &ExistsFormula) -> BsrProblem {
        self.exists.push(f.clone());
        self
    }

    pub fn forall(mut self, f: &ForallFormula) -> BsrProblem {
        self.forall.push(f.clone());
        self
    }
}

/// Skolemize, ground over the constant universe, encode equality, decide.
/// On sat the model is read back as a finite configuration by quotienting
/// the universe by the equality valuation.
pub fn check_sat(p: &BsrProblem, budget: &Budget) -> Result<SatResult, SolverError> {
    let mut b = GroundBuilder::new(&p.sig, &p.sv);
    for f in &p.exists {
        b.assert_exists(f);
    }
    for f in &p.forall {
        b.assert_forall(f);
    }
    let out = b.solve(budget)?;
    Ok(match out.model {
        Some(model) => {
            #[cfg(debug_assertions)]
            {
                for f in &p.exists {
                    debug_assert!(
                        crate::oracle::eval::eval_exists(&model, f).unwrap_or(false),
                        "model fails an existential part"
                    );
                }
                for f in &p.forall {
                    debug_assert!(
                        crate::oracle::eval::eval_forall(&model, f).unwrap_or(false),
                        "model fails a universal part"
                    );
                }
            }
            SatResult { verdict: Verdict::Sat, model: Some(model), stats: out.stats }
        }
        None => SatResult { verdict: Verdict::Unsat, model: None, stats: out.stats },
    })
}

/// Validity of `f => g` modulo the theory and extra universal sentences,
/// decided by refutation: `f /\ extra /\ not g` must be unsatisfiable.
pub fn entails(
    sig: &SharedSignature,
    theory: &UniversalTheory,
    f: &ExistsFormula,
    g: &ExistsFormula,
    extra: &[ForallFormula],
    budget: &Budget,
) -> Result<bool, SolverError> {
    let mut p = BsrProblem::with_theory(sig.clone(), theory).exists(f);
    for e in extra {
        p = p.forall(e);
    }
    p = p.forall(&negate_exists(g));
    Ok(check_sat(&p, budget)?.verdict == Verdict::Unsat)
}
