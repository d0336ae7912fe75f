//! Standard Tarskian evaluation of formulae on finite structures by
//! quantifier enumeration. This is the semantic ground truth everything
//! else is checked against.

use crate::fol::config::Configuration;
use crate::fol::{Atom, Cube, ExistsFormula, ForallFormula, Literal, Nnf, Term};
use thiserror::Error;

#[derive(Error, Debug, PartialEq, Eq)]
pub enum EvalError {
    #[error("constant `{0}` is not interpreted in the structure")]
    UninterpretedConstant(String),
}

fn const_elem(cfg: &Configuration, c: crate::fol::ConstId) -> Result<usize, EvalError> {
    cfg.const_interp
        .get(c.0 as usize)
        .copied()
        .ok_or_else(|| EvalError::UninterpretedConstant(format!("#{}", c.0)))
}

fn term_elem(cfg: &Configuration, binding: &[usize], t: &Term) -> Result<usize, EvalError> {
    match t {
        Term::Var(v) => Ok(binding[v.0 as usize]),
        Term::Const(c) => const_elem(cfg, *c),
    }
}

fn eval_literal(cfg: &Configuration, binding: &[usize], lit: &Literal) -> Result<bool, EvalError> {
    let holds = match &lit.atom {
        Atom::Pred { pred, args } => {
            let tuple: Result<Vec<usize>, EvalError> =
                args.iter().map(|t| term_elem(cfg, binding, t)).collect();
            cfg.preds[pred.0 as usize].contains(&tuple?)
        }
        Atom::Eq(a, b) => term_elem(cfg, binding, a)? == term_elem(cfg, binding, b)?,
    };
    Ok(holds == lit.positive)
}

pub fn eval_nnf(cfg: &Configuration, binding: &[usize], m: &Nnf) -> Result<bool, EvalError> {
    match m {
        Nnf::Lit(l) => eval_literal(cfg, binding, l),
        Nnf::And(xs) => {
            for x in xs {
                if !eval_nnf(cfg, binding, x)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Nnf::Or(xs) => {
            for x in xs {
                if eval_nnf(cfg, binding, x)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
    }
}

/// Existential satisfaction of a cube, with equality propagation before the
/// residual variables are enumerated.
pub fn eval_cube(cfg: &Configuration, cube: &Cube) -> Result<bool, EvalError> {
    let n = cube.vars.len();

    // Union-find over bound variables, with an optional pinned element per class.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut pinned: Vec<Option<usize>> = vec![None; n];

    let mut residual: Vec<&Literal> = Vec::new();
    for lit in &cube.lits {
        if let (true, Atom::Eq(a, b)) = (lit.positive, &lit.atom) {
            match (a, b) {
                (Term::Var(x), Term::Var(y)) => {
                    let rx = find(&mut parent, x.0 as usize);
                    let ry = find(&mut parent, y.0 as usize);
                    if rx != ry {
                        match (pinned[rx], pinned[ry]) {
                            (Some(ex), Some(ey)) if ex != ey => return Ok(false),
                            (px, py) => {
                                parent[ry] = rx;
                                pinned[rx] = px.or(py);
                            }
                        }
                    }
                    continue;
                }
                (Term::Var(x), Term::Const(c)) | (Term::Const(c), Term::Var(x)) => {
                    let e = const_elem(cfg, *c)?;
                    let rx = find(&mut parent, x.0 as usize);
                    match pinned[rx] {
                        Some(old) if old != e => return Ok(false),
                        _ => pinned[rx] = Some(e),
                    }
                    continue;
                }
                (Term::Const(c1), Term::Const(c2)) => {
                    if const_elem(cfg, *c1)? != const_elem(cfg, *c2)? {
                        return Ok(false);
                    }
                    continue;
                }
            }
        }
        residual.push(lit);
    }

    // Roots that still need a value, in a deterministic order.
    let mut free_roots: Vec<usize> = Vec::new();
    for v in 0..n {
        let r = find(&mut parent, v);
        if pinned[r].is_none() && !free_roots.contains(&r) {
            free_roots.push(r);
        }
    }

    // Literal becomes checkable once every variable it uses is assigned;
    // index literals by the latest free root they depend on.
    let root_of: Vec<usize> = (0..n).map(|v| find(&mut parent, v)).collect();
    let stage_of = |lit: &Literal| -> usize {
        let mut stage = 0; // 0 = checkable immediately
        for t in lit.atom.terms() {
            if let Term::Var(v) = t {
                let r = root_of[v.0 as usize];
                if let Some(pos) = free_roots.iter().position(|fr| *fr == r) {
                    stage = stage.max(pos + 1);
                }
            }
        }
        stage
    };
    let mut staged: Vec<Vec<&Literal>> = vec![Vec::new(); free_roots.len() + 1];
    for lit in residual {
        staged[stage_of(lit)].push(lit);
    }

    let mut binding: Vec<usize> = vec![usize::MAX; n];
    let assign_class = |binding: &mut [usize], root_of: &[usize], root: usize, e: usize| {
        for v in 0..n {
            if root_of[v] == root {
                binding[v] = e;
            }
        }
    };
    for v in 0..n {
        if let Some(e) = pinned[root_of[v]] {
            binding[v] = e;
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn search(
        cfg: &Configuration,
        free_roots: &[usize],
        staged: &[Vec<&Literal>],
        root_of: &[usize],
        binding: &mut [usize],
        depth: usize,
        cube: &Cube,
        assign_class: &impl Fn(&mut [usize], &[usize], usize, usize),
    ) -> Result<bool, EvalError> {
        for lit in &staged[depth] {
            if !eval_literal(cfg, binding, lit)? {
                return Ok(false);
            }
        }
        if depth == free_roots.len() {
            return Ok(true);
        }
        let root = free_roots[depth];
        let sort = cube.vars[root];
        for e in 0..cfg.domain[sort.0 as usize] {
            assign_class(binding, root_of, root, e);
            if search(cfg, free_roots, staged, root_of, binding, depth + 1, cube, assign_class)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    search(cfg, &free_roots, &staged, &root_of, &mut binding, 0, cube, &assign_class)
}

pub fn eval_exists(cfg: &Configuration, f: &ExistsFormula) -> Result<bool, EvalError> {
    for cube in &f.cubes {
        if eval_cube(cfg, cube)? {
            return Ok(true);
        }
    }
    Ok(false)
}

pub fn eval_forall(cfg: &Configuration, f: &ForallFormula) -> Result<bool, EvalError> {
    let n = f.vars.len();
    // A universal over an empty domain holds vacuously.
    if f.vars.iter().any(|s| cfg.domain[s.0 as usize] == 0) {
        return Ok(true);
    }
    let mut binding = vec![0usize; n];
    if n == 0 {
        return eval_nnf(cfg, &binding, &f.matrix);
    }
    loop {
        if !eval_nnf(cfg, &binding, &f.matrix)? {
            return Ok(false);
        }
        let mut i = 0;
        loop {
            if i == n {
                return Ok(true);
            }
            binding[i] += 1;
            if binding[i] < cfg.domain[f.vars[i].0 as usize] {
                break;
            }
            binding[i] = 0;
            i += 1;
        }
    }
}
