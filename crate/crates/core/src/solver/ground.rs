//! Grounding of exists-forall sentences modulo a universal theory.
//!
//! Existential prefixes are Skolemized to fresh constants, universals are
//! instantiated over the finite constant universe, and equality is encoded
//! per sort: scalar-value sorts anchor every constant to one of the values,
//! open sorts get an explicit equality grid with transitivity and lazy
//! predicate congruence. The resulting ground formula goes through Tseitin
//! to the CDCL core.

use crate::fol::config::Configuration;
use crate::fol::{
    Atom, ConstId, Cube, ExistsFormula, ForallFormula, Literal, Nnf, PredId, SharedSignature,
    Signature, SortId, Term,
};
use crate::sat::{self, cdcl, dpll, BoolExpr, Cnf, Lit, SatOutcome};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::Instant;

use super::{Budget, SolverError, SolverStats};

/// Ground formula fragment whose universal parts are still symbolic; they
/// are instantiated once the constant universe is final.
#[derive(Clone, Debug)]
pub enum GExpr {
    /// Ground literal: every term is a constant.
    Lit(Literal),
    Forall(ForallFormula),
    And(Vec<GExpr>),
    Or(Vec<GExpr>),
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
enum GroundAtom {
    Pred(PredId, Vec<ConstId>),
    /// Normalized: first component is the smaller constant id.
    Eq(ConstId, ConstId),
}

pub struct GroundBuilder {
    /// Extended signature: the original constants plus Skolem witnesses.
    sig: Signature,
    original: SharedSignature,
    sv: BTreeMap<SortId, Vec<ConstId>>,
    asserted: Vec<GExpr>,
    skolem_count: u32,
}

impl GroundBuilder {
    pub fn new(sig: &SharedSignature, sv: &BTreeMap<SortId, Vec<ConstId>>) -> GroundBuilder {
        GroundBuilder {
            sig: (**sig).clone(),
            original: sig.clone(),
            sv: sv.clone(),
            asserted: Vec::new(),
            skolem_count: 0,
        }
    }

    pub fn signature(&self) -> &Signature {
        &self.sig
    }

    /// Add a predicate to the extended signature (distinct state copies for
    /// bounded unfolding).
    pub fn add_pred(&mut self, name: &str, args: Vec<SortId>) -> PredId {
        self.sig.add_pred(name, args).expect("fresh predicate name")
    }

    pub fn fresh_const(&mut self, sort: SortId) -> ConstId {
        let name = format!("!k{}", self.skolem_count);
        self.skolem_count += 1;
        self.sig.add_const(&name, sort).expect("fresh skolem name")
    }

    /// Skolemize a cube: fresh constants for its variables, ground literals out.
    pub fn skolemize_cube(&mut self, cube: &Cube) -> (Vec<ConstId>, Vec<Literal>) {
        let consts: Vec<ConstId> = cube.vars.iter().map(|s| self.fresh_const(*s)).collect();
        let lits = cube
            .lits
            .iter()
            .map(|l| {
                l.map_terms(&mut |t| match t {
                    Term::Var(v) => Term::Const(consts[v.0 as usize]),
                    c => c,
                })
            })
            .collect();
        (consts, lits)
    }

    pub fn assert_gexpr(&mut self, e: GExpr) {
        self.asserted.push(e);
    }

    pub fn assert_exists(&mut self, f: &ExistsFormula) {
        let e = self.exists_to_gexpr(f);
        self.asserted.push(e);
    }

    pub fn exists_to_gexpr(&mut self, f: &ExistsFormula) -> GExpr {
        let mut cubes = Vec::new();
        for cube in &f.cubes {
            let (_, lits) = self.skolemize_cube(cube);
            cubes.push(GExpr::And(lits.into_iter().map(GExpr::Lit).collect()));
        }
        GExpr::Or(cubes)
    }

    pub fn assert_forall(&mut self, f: &ForallFormula) {
        self.asserted.push(GExpr::Forall(f.clone()));
    }

    pub fn solve(self, budget: &Budget) -> Result<GroundOutcome, SolverError> {
        let start = Instant::now();
        let mut ctx = EncodeCtx::new(self.sig, self.original, self.sv);
        ctx.finalize_universe();

        let mut exprs: Vec<BoolExpr> = Vec::new();
        for g in &self.asserted {
            exprs.push(ctx.encode_gexpr(g, budget)?);
        }
        ctx.encode_sv_anchoring(&mut exprs);
        ctx.encode_open_equality(&mut exprs);
        ctx.encode_congruence(&mut exprs);

        let mut cnf = Cnf { num_vars: ctx.atoms.len() as u32, clauses: Vec::new() };
        for e in &exprs {
            sat::assert_expr(&mut cnf, e);
            if cnf.clauses.len() > budget.max_clauses {
                return Err(SolverError::Timeout {
                    conflicts: 0,
                    clauses: cnf.clauses.len(),
                });
            }
        }

        let ground_clauses = cnf.clauses.len();
        let ground_atoms = ctx.atoms.len();
        let (outcome, cstats) = if budget.use_dpll {
            (dpll::solve(&cnf), cdcl::CdclStats::default())
        } else {
            cdcl::solve(&cnf, budget.max_conflicts)
        };

        let stats = SolverStats {
            ground_clauses,
            ground_atoms,
            decisions: cstats.decisions,
            conflicts: cstats.conflicts,
            wall_ms: start.elapsed().as_millis(),
        };

        match outcome {
            SatOutcome::ConflictBudget => Err(SolverError::Timeout {
                conflicts: stats.conflicts,
                clauses: ground_clauses,
            }),
            SatOutcome::Unsat => Ok(GroundOutcome { model: None, stats }),
            SatOutcome::Sat(valuation) => {
                let model = ctx.read_model(&valuation);
                Ok(GroundOutcome { model: Some(model), stats })
            }
        }
    }
}

pub struct GroundOutcome {
    pub model: Option<Configuration>,
    pub stats: SolverStats,
}

struct EncodeCtx {
    sig: Signature,
    original: SharedSignature,
    sv: BTreeMap<SortId, Vec<ConstId>>,
    /// Universe constants per sort (declared + skolems + witnesses).
    universe: Vec<Vec<ConstId>>,
    /// Instantiation domain per sort: values for SV sorts, universe otherwise.
    inst_domain: Vec<Vec<ConstId>>,
    atom_ids: HashMap<GroundAtom, u32>,
    atoms: Vec<GroundAtom>,
}

impl EncodeCtx {
    fn new(sig: Signature, original: SharedSignature, sv: BTreeMap<SortId, Vec<ConstId>>) -> EncodeCtx {
        EncodeCtx {
            sig,
            original,
            sv,
            universe: Vec::new(),
            inst_domain: Vec::new(),
            atom_ids: HashMap::new(),
            atoms: Vec::new(),
        }
    }

    fn finalize_universe(&mut self) {
        let nsorts = self.sig.sorts.len();
        let mut universe: Vec<Vec<ConstId>> = vec![Vec::new(); nsorts];
        for i in 0..self.sig.consts.len() {
            let c = ConstId(i as u32);
            universe[self.sig.const_sort(c).0 as usize].push(c);
        }
        for (s, u) in universe.iter_mut().enumerate() {
            if u.is_empty() {
                let name = format!("!w{s}");
                let c = self.sig.add_const(&name, SortId(s as u32)).expect("fresh witness");
                u.push(c);
            }
        }
        self.inst_domain = (0..nsorts)
            .map(|s| match self.sv.get(&SortId(s as u32)) {
                Some(values) => values.clone(),
                None => universe[s].clone(),
            })
            .collect();
        self.universe = universe;
    }

    fn is_value(&self, c: ConstId) -> Option<usize> {
        let sort = self.sig.const_sort(c);
        self.sv.get(&sort).and_then(|vs| vs.iter().position(|v| *v == c))
    }

    fn intern(&mut self, atom: GroundAtom) -> Lit {
        let next = self.atoms.len() as u32;
        let id = *self.atom_ids.entry(atom.clone()).or_insert_with(|| {
            self.atoms.push(atom);
            next
        });
        Lit::new(id, true)
    }

    fn eq_atom(&mut self, a: ConstId, b: ConstId) -> BoolExpr {
        if a == b {
            return BoolExpr::Const(true);
        }
        match (self.is_value(a), self.is_value(b)) {
            (Some(i), Some(j)) => BoolExpr::Const(i == j),
            _ => {
                let sort = self.sig.const_sort(a);
                if self.sv.contains_key(&sort) {
                    // Anchored expansion: a and b are equal iff they share a value.
                    let values = self.sv[&sort].clone();
                    let mut disjuncts = Vec::new();
                    for v in values {
                        let av = self.anchor(a, v);
                        let bv = self.anchor(b, v);
                        disjuncts.push(BoolExpr::and(vec![av, bv]));
                    }
                    BoolExpr::or(disjuncts)
                } else {
                    let (x, y) = if a.0 <= b.0 { (a, b) } else { (b, a) };
                    BoolExpr::Lit(self.intern(GroundAtom::Eq(x, y)))
                }
            }
        }
    }

    /// `c ~ v`: constant c denotes value v.
    fn anchor(&mut self, c: ConstId, v: ConstId) -> BoolExpr {
        if c == v {
            return BoolExpr::Const(true);
        }
        if self.is_value(c).is_some() {
            return BoolExpr::Const(false);
        }
        let (x, y) = if c.0 <= v.0 { (c, v) } else { (v, c) };
        BoolExpr::Lit(self.intern(GroundAtom::Eq(x, y)))
    }

    /// Encode a ground predicate atom, rewriting scalar-sorted arguments to
    /// value representatives.
    fn pred_atom(&mut self, pred: PredId, args: &[ConstId]) -> BoolExpr {
        // Positions needing expansion: SV-sorted constants that are not values.
        let mut expansions: Vec<(usize, Vec<ConstId>)> = Vec::new();
        for (i, &c) in args.iter().enumerate() {
            let sort = self.sig.const_sort(c);
            if let Some(values) = self.sv.get(&sort) {
                if self.is_value(c).is_none() {
                    expansions.push((i, values.clone()));
                }
            }
        }
        if expansions.is_empty() {
            return BoolExpr::Lit(self.intern(GroundAtom::Pred(pred, args.to_vec())));
        }
        let mut disjuncts = Vec::new();
        let mut choice = vec![0usize; expansions.len()];
        loop {
            let mut resolved = args.to_vec();
            let mut conj = Vec::new();
            for (j, (pos, values)) in expansions.iter().enumerate() {
                let v = values[choice[j]];
                conj.push(self.anchor(args[*pos], v));
                resolved[*pos] = v;
            }
            conj.push(self.pred_atom(pred, &resolved));
            disjuncts.push(BoolExpr::and(conj));

            let mut j = 0;
            loop {
                if j == expansions.len() {
                    return BoolExpr::or(disjuncts);
                }
                choice[j] += 1;
                if choice[j] < expansions[j].1.len() {
                    break;
                }
                choice[j] = 0;
                j += 1;
            }
        }
    }

    fn encode_ground_literal(&mut self, lit: &Literal) -> BoolExpr {
        let body = match &lit.atom {
            Atom::Eq(Term::Const(a), Term::Const(b)) => self.eq_atom(*a, *b),
            Atom::Pred { pred, args } => {
                let cs: Vec<ConstId> = args
                    .iter()
                    .map(|t| match t {
                        Term::Const(c) => *c,
                        Term::Var(_) => panic!("ground literal contains a variable"),
                    })
                    .collect();
                self.pred_atom(*pred, &cs)
            }
            _ => panic!("ground literal contains a variable"),
        };
        if lit.positive {
            body
        } else {
            negate(body)
        }
    }

    fn encode_forall(&mut self, f: &ForallFormula, budget: &Budget) -> Result<BoolExpr, SolverError> {
        // Miniscope conjunctions: each conjunct is instantiated over the
        // variables it actually uses, which keeps the negations of wide
        // disjunctions of cubes tractable.
        if let Nnf::And(conjuncts) = &f.matrix {
            let parts = conjuncts
                .iter()
                .map(|m| {
                    let sub = ForallFormula { vars: f.vars.clone(), matrix: m.clone() };
                    self.encode_forall(&sub, budget)
                })
                .collect::<Result<Vec<_>, _>>()?;
            return Ok(BoolExpr::and(parts));
        }

        let mut used = vec![false; f.vars.len()];
        mark_used(&f.matrix, &mut used);
        let used_vars: Vec<usize> = (0..f.vars.len()).filter(|v| used[*v]).collect();
        if used_vars.is_empty() {
            return Ok(self.encode_nnf_proj(&f.matrix, &[], &[]));
        }

        let domains: Vec<Vec<ConstId>> = used_vars
            .iter()
            .map(|&v| self.inst_domain[f.vars[v].0 as usize].clone())
            .collect();
        let total: usize = domains.iter().map(|d| d.len().max(1)).product();
        if total > budget.max_instantiations {
            return Err(SolverError::Timeout { conflicts: 0, clauses: total });
        }
        let mut out = Vec::with_capacity(total);
        let mut binding: Vec<ConstId> = domains.iter().map(|d| d[0]).collect();
        let mut idx = vec![0usize; domains.len()];
        loop {
            out.push(self.encode_nnf_proj(&f.matrix, &used_vars, &binding));
            let mut i = 0;
            loop {
                if i == domains.len() {
                    return Ok(BoolExpr::and(out));
                }
                idx[i] += 1;
                if idx[i] < domains[i].len() {
                    binding[i] = domains[i][idx[i]];
                    break;
                }
                idx[i] = 0;
                binding[i] = domains[i][0];
                i += 1;
            }
        }
    }

    /// Encode a matrix under a projected binding: `used_vars[i]` is bound to
    /// `binding[i]`; other variables must not occur.
    fn encode_nnf_proj(&mut self, m: &Nnf, used_vars: &[usize], binding: &[ConstId]) -> BoolExpr {
        match m {
            Nnf::Lit(l) => {
                let ground = l.map_terms(&mut |t| match t {
                    Term::Var(v) => {
                        let pos = used_vars
                            .iter()
                            .position(|&u| u == v.0 as usize)
                            .expect("unused variable in matrix");
                        Term::Const(binding[pos])
                    }
                    c => c,
                });
                self.encode_ground_literal(&ground)
            }
            Nnf::And(xs) => {
                BoolExpr::and(xs.iter().map(|x| self.encode_nnf_proj(x, used_vars, binding)).collect())
            }
            Nnf::Or(xs) => {
                BoolExpr::or(xs.iter().map(|x| self.encode_nnf_proj(x, used_vars, binding)).collect())
            }
        }
    }

    fn encode_gexpr(&mut self, g: &GExpr, budget: &Budget) -> Result<BoolExpr, SolverError> {
        Ok(match g {
            GExpr::Lit(l) => self.encode_ground_literal(l),
            GExpr::Forall(f) => self.encode_forall(f, budget)?,
            GExpr::And(xs) => BoolExpr::and(
                xs.iter().map(|x| self.encode_gexpr(x, budget)).collect::<Result<Vec<_>, _>>()?,
            ),
            GExpr::Or(xs) => BoolExpr::or(
                xs.iter().map(|x| self.encode_gexpr(x, budget)).collect::<Result<Vec<_>, _>>()?,
            ),
        })
    }

    /// Every non-value constant of a scalar sort denotes exactly one value.
    fn encode_sv_anchoring(&mut self, out: &mut Vec<BoolExpr>) {
        let sv = self.sv.clone();
        for (sort, values) in &sv {
            for c in self.universe[sort.0 as usize].clone() {
                if self.is_value(c).is_some() {
                    continue;
                }
                let anchors: Vec<BoolExpr> = values.iter().map(|v| self.anchor(c, *v)).collect();
                out.push(BoolExpr::or(anchors.clone()));
                for i in 0..anchors.len() {
                    for j in i + 1..anchors.len() {
                        out.push(BoolExpr::or(vec![
                            negate(anchors[i].clone()),
                            negate(anchors[j].clone()),
                        ]));
                    }
                }
            }
        }
    }

    /// Equality grid for open sorts: symmetric by normalization, reflexive by
    /// folding, transitive by explicit clauses over the universe.
    fn encode_open_equality(&mut self, out: &mut Vec<BoolExpr>) {
        for s in 0..self.sig.sorts.len() {
            if self.sv.contains_key(&SortId(s as u32)) {
                continue;
            }
            let consts = self.universe[s].clone();
            let n = consts.len();
            for i in 0..n {
                for j in i + 1..n {
                    for k in j + 1..n {
                        let ij = self.eq_atom(consts[i], consts[j]);
                        let ik = self.eq_atom(consts[i], consts[k]);
                        let jk = self.eq_atom(consts[j], consts[k]);
                        out.push(BoolExpr::or(vec![negate(ij.clone()), negate(jk.clone()), ik.clone()]));
                        out.push(BoolExpr::or(vec![negate(ij.clone()), negate(ik.clone()), jk.clone()]));
                        out.push(BoolExpr::or(vec![negate(ik), negate(jk), ij]));
                    }
                }
            }
        }
    }

    /// Predicate congruence, lazily over the atoms that actually occur:
    /// pointwise-equal argument tuples force the same truth value.
    fn encode_congruence(&mut self, out: &mut Vec<BoolExpr>) {
        let mut by_pred: BTreeMap<PredId, Vec<Vec<ConstId>>> = BTreeMap::new();
        for atom in self.atoms.clone() {
            if let GroundAtom::Pred(p, args) = atom {
                by_pred.entry(p).or_default().push(args);
            }
        }
        for (pred, tuples) in by_pred {
            for i in 0..tuples.len() {
                for j in i + 1..tuples.len() {
                    let mut antecedent = Vec::new();
                    let mut feasible = true;
                    for (a, b) in tuples[i].iter().zip(&tuples[j]) {
                        if a == b {
                            continue;
                        }
                        match (self.is_value(*a), self.is_value(*b)) {
                            (Some(x), Some(y)) if x != y => {
                                feasible = false;
                                break;
                            }
                            _ => antecedent.push(self.eq_atom(*a, *b)),
                        }
                    }
                    if !feasible {
                        continue;
                    }
                    let pa = BoolExpr::Lit(self.intern(GroundAtom::Pred(pred, tuples[i].clone())));
                    let pb = BoolExpr::Lit(self.intern(GroundAtom::Pred(pred, tuples[j].clone())));
                    let neg_ante: Vec<BoolExpr> = antecedent.iter().cloned().map(negate).collect();
                    let mut c1 = neg_ante.clone();
                    c1.push(negate(pa.clone()));
                    c1.push(pb.clone());
                    out.push(BoolExpr::or(c1));
                    let mut c2 = neg_ante;
                    c2.push(pa);
                    c2.push(negate(pb));
                    out.push(BoolExpr::or(c2));
                }
            }
        }
    }

    /// Quotient the universe by the equality valuation and read predicate
    /// extensions off the atom valuation.
    fn read_model(&self, valuation: &[bool]) -> Configuration {
        let truth = |atom: &GroundAtom| -> bool {
            self.atom_ids.get(atom).is_some_and(|id| valuation[*id as usize])
        };
        let eq_true = |a: ConstId, b: ConstId| -> bool {
            if a == b {
                return true;
            }
            let (x, y) = if a.0 <= b.0 { (a, b) } else { (b, a) };
            truth(&GroundAtom::Eq(x, y))
        };

        let nsorts = self.sig.sorts.len();
        // class_of[const index] = element index within its sort.
        let mut class_of: HashMap<ConstId, usize> = HashMap::new();
        let mut domain = vec![0usize; nsorts];

        #[allow(clippy::needless_range_loop)]
        for s in 0..nsorts {
            let sort = SortId(s as u32);
            if let Some(values) = self.sv.get(&sort) {
                for (i, v) in values.iter().enumerate() {
                    class_of.insert(*v, i);
                }
                for &c in &self.universe[s] {
                    if self.is_value(c).is_some() {
                        continue;
                    }
                    let v = values
                        .iter()
                        .position(|v| eq_true(c, *v))
                        .expect("anchoring forces a value");
                    class_of.insert(c, v);
                }
                domain[s] = values.len();
            } else {
                let consts = &self.universe[s];
                let mut reps: Vec<ConstId> = Vec::new();
                for &c in consts {
                    let found = reps.iter().position(|r| eq_true(c, *r));
                    match found {
                        Some(i) => {
                            class_of.insert(c, i);
                        }
                        None => {
                            class_of.insert(c, reps.len());
                            reps.push(c);
                        }
                    }
                }
                domain[s] = reps.len();
            }
        }

        let const_interp: Vec<usize> = (0..self.original.consts.len())
            .map(|i| class_of[&ConstId(i as u32)])
            .collect();

        let mut preds: Vec<BTreeSet<Vec<usize>>> = vec![BTreeSet::new(); self.original.preds.len()];
        for (atom, id) in &self.atom_ids {
            if let GroundAtom::Pred(p, args) = atom {
                if p.0 as usize >= self.original.preds.len() {
                    continue; // state copies from bounded unfolding
                }
                if valuation[*id as usize] {
                    preds[p.0 as usize].insert(args.iter().map(|c| class_of[c]).collect());
                }
            }
        }

        Configuration::from_parts(self.original.clone(), domain, const_interp, preds)
    }
}

fn mark_used(m: &Nnf, used: &mut [bool]) {
    match m {
        Nnf::Lit(l) => {
            for t in l.atom.terms() {
                if let Term::Var(v) = t {
                    used[v.0 as usize] = true;
                }
            }
        }
        Nnf::And(xs) | Nnf::Or(xs) => {
            for x in xs {
                mark_used(x, used);
            }
        }
    }
}

fn negate(e: BoolExpr) -> BoolExpr {
    match e {
        BoolExpr::Const(b) => BoolExpr::Const(!b),
        BoolExpr::Lit(l) => BoolExpr::Lit(l.negated()),
        BoolExpr::And(xs) => BoolExpr::or(xs.into_iter().map(negate).collect()),
        BoolExpr::Or(xs) => BoolExpr::and(xs.into_iter().map(negate).collect()),
    }
}
