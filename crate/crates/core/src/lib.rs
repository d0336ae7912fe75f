//! Symbolic analysis of administrative role-based access control policies
//! with finitely many but unboundedly many users and roles.
//!
//! States are user-role assignment relations; sets of states are existential
//! formulae over a function-free many-sorted signature; administrative
//! actions are guarded updates of the assignment relation. Reachability is
//! decided by backward pre-image iteration, with every satisfiability
//! question discharged by an internal exists-forall decision procedure over
//! a finite grounding. An explicit-state oracle provides the independent
//! semantics the symbolic engine is validated against.

pub mod analyses;
pub mod fol;
pub mod oracle;
pub mod policy;
pub mod preimage;
pub mod reach;
pub mod sat;
pub mod solver;

pub use fol::{Cube, ExistsFormula, ForallFormula, Signature, UniversalTheory};
pub use policy::{CompiledPolicy, PolicyDecls, SymbolicPolicy, TransitionRule};
pub use reach::{backward_reach, bounded_reach, ReachConfig, ReachResult, ReachVerdict};
pub use solver::{check_sat, entails, BsrProblem, Budget, SatResult, SolverError, Verdict};
