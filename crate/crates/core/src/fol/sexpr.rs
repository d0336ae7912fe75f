//! Stable, human-readable s-expression rendering of formulae, plus the
//! matching parser. Used by golden tests, CLI debug dumps and the raw-init
//! form of the policy language. The grammar is documented in docs/dsl.md.

use super::{Atom, Cube, ExistsFormula, ForallFormula, Literal, Nnf, Signature, SortId, Term, VarId};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Error, Debug, PartialEq, Eq)]
pub enum SexprError {
    #[error("unbalanced parentheses")]
    Unbalanced,
    #[error("unexpected token `{0}`")]
    Unexpected(String),
    #[error("unknown sort `{0}`")]
    UnknownSort(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("arity mismatch for `{0}`")]
    Arity(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sexpr {
    Sym(String),
    List(Vec<Sexpr>),
}

pub fn tokenize(input: &str) -> Vec<String> {
    let mut toks = Vec::new();
    let mut cur = String::new();
    let mut chars = input.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            ';' => {
                while let Some(&n) = chars.peek() {
                    chars.next();
                    if n == '\n' {
                        break;
                    }
                }
            }
            '(' | ')' => {
                if !cur.is_empty() {
                    toks.push(std::mem::take(&mut cur));
                }
                toks.push(c.to_string());
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    toks.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        toks.push(cur);
    }
    toks
}

pub fn parse_sexpr(input: &str) -> Result<Sexpr, SexprError> {
    let toks = tokenize(input);
    let (s, rest) = parse_one(&toks)?;
    if !rest.is_empty() {
        return Err(SexprError::Unexpected(rest[0].clone()));
    }
    Ok(s)
}

pub fn parse_many(input: &str) -> Result<Vec<Sexpr>, SexprError> {
    let toks = tokenize(input);
    let mut rest: &[String] = &toks;
    let mut out = Vec::new();
    while !rest.is_empty() {
        let (s, r) = parse_one(rest)?;
        out.push(s);
        rest = r;
    }
    Ok(out)
}

fn parse_one(toks: &[String]) -> Result<(Sexpr, &[String]), SexprError> {
    match toks.first() {
        None => Err(SexprError::Unbalanced),
        Some(t) if t == "(" => {
            let mut rest = &toks[1..];
            let mut items = Vec::new();
            loop {
                match rest.first() {
                    None => return Err(SexprError::Unbalanced),
                    Some(t) if t == ")" => return Ok((Sexpr::List(items), &rest[1..])),
                    _ => {
                        let (s, r) = parse_one(rest)?;
                        items.push(s);
                        rest = r;
                    }
                }
            }
        }
        Some(t) if t == ")" => Err(SexprError::Unexpected(")".into())),
        Some(t) => Ok((Sexpr::Sym(t.clone()), &toks[1..])),
    }
}

impl Sexpr {
    pub fn sym(&self) -> Option<&str> {
        match self {
            Sexpr::Sym(s) => Some(s),
            Sexpr::List(_) => None,
        }
    }

    pub fn list(&self) -> Option<&[Sexpr]> {
        match self {
            Sexpr::List(xs) => Some(xs),
            Sexpr::Sym(_) => None,
        }
    }
}

fn term_str(sig: &Signature, names: &dyn Fn(VarId) -> String, t: &Term) -> String {
    match t {
        Term::Var(v) => names(*v),
        Term::Const(c) => sig.const_name(*c).to_string(),
    }
}

fn literal_str(sig: &Signature, names: &dyn Fn(VarId) -> String, lit: &Literal) -> String {
    let body = match &lit.atom {
        Atom::Pred { pred, args } => {
            let mut s = format!("({}", sig.pred_name(*pred));
            for a in args {
                let _ = write!(s, " {}", term_str(sig, names, a));
            }
            s.push(')');
            s
        }
        Atom::Eq(a, b) => format!("(= {} {})", term_str(sig, names, a), term_str(sig, names, b)),
    };
    if lit.positive {
        body
    } else {
        format!("(not {body})")
    }
}

pub fn cube_to_sexpr(sig: &Signature, cube: &Cube) -> String {
    let names = |v: VarId| cube.var_name(sig, v);
    let mut s = String::from("(exists (");
    for (i, sort) in cube.vars.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "({} {})", names(VarId(i as u32)), sig.sorts[sort.0 as usize].name);
    }
    s.push_str(") (and");
    for lit in &cube.lits {
        let _ = write!(s, " {}", literal_str(sig, &names, lit));
    }
    s.push_str("))");
    s
}

pub fn exists_to_sexpr(sig: &Signature, f: &ExistsFormula) -> String {
    let mut s = String::from("(or");
    for cube in &f.cubes {
        let _ = write!(s, " {}", cube_to_sexpr(sig, cube));
    }
    s.push(')');
    s
}

fn nnf_str(sig: &Signature, names: &dyn Fn(VarId) -> String, m: &Nnf) -> String {
    match m {
        Nnf::Lit(l) => literal_str(sig, names, l),
        Nnf::And(xs) => {
            let mut s = String::from("(and");
            for x in xs {
                let _ = write!(s, " {}", nnf_str(sig, names, x));
            }
            s.push(')');
            s
        }
        Nnf::Or(xs) => {
            let mut s = String::from("(or");
            for x in xs {
                let _ = write!(s, " {}", nnf_str(sig, names, x));
            }
            s.push(')');
            s
        }
    }
}

pub fn forall_to_sexpr(sig: &Signature, f: &ForallFormula) -> String {
    let names = |v: VarId| f.var_name(sig, v);
    let mut s = String::from("(forall (");
    for (i, sort) in f.vars.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "({} {})", names(VarId(i as u32)), sig.sorts[sort.0 as usize].name);
    }
    s.push_str(") ");
    s.push_str(&nnf_str(sig, &names, &f.matrix));
    s.push(')');
    s
}

fn parse_binders(sig: &Signature, s: &Sexpr) -> Result<(Vec<SortId>, BTreeMap<String, VarId>), SexprError> {
    let list = s.list().ok_or_else(|| SexprError::Unexpected("binder list".into()))?;
    let mut sorts = Vec::new();
    let mut names = BTreeMap::new();
    for b in list {
        let pair = b.list().ok_or_else(|| SexprError::Unexpected("binder".into()))?;
        if pair.len() != 2 {
            return Err(SexprError::Arity("binder".into()));
        }
        let name = pair[0].sym().ok_or_else(|| SexprError::Unexpected("binder name".into()))?;
        let sort_name = pair[1].sym().ok_or_else(|| SexprError::Unexpected("binder sort".into()))?;
        let sort = sig.sort_id(sort_name).ok_or_else(|| SexprError::UnknownSort(sort_name.into()))?;
        names.insert(name.to_string(), VarId(sorts.len() as u32));
        sorts.push(sort);
    }
    Ok((sorts, names))
}

fn parse_term(sig: &Signature, vars: &BTreeMap<String, VarId>, s: &Sexpr) -> Result<Term, SexprError> {
    let name = s.sym().ok_or_else(|| SexprError::Unexpected("term".into()))?;
    if let Some(v) = vars.get(name) {
        return Ok(Term::Var(*v));
    }
    if let Some(c) = sig.const_id(name) {
        return Ok(Term::Const(c));
    }
    Err(SexprError::UnknownSymbol(name.into()))
}

fn parse_atom(sig: &Signature, vars: &BTreeMap<String, VarId>, s: &Sexpr) -> Result<Atom, SexprError> {
    let list = s.list().ok_or_else(|| SexprError::Unexpected("atom".into()))?;
    let head = list
        .first()
        .and_then(|h| h.sym())
        .ok_or_else(|| SexprError::Unexpected("atom head".into()))?;
    if head == "=" {
        if list.len() != 3 {
            return Err(SexprError::Arity("=".into()));
        }
        return Ok(Atom::Eq(parse_term(sig, vars, &list[1])?, parse_term(sig, vars, &list[2])?));
    }
    let pred = sig.pred_id(head).ok_or_else(|| SexprError::UnknownSymbol(head.into()))?;
    let args: Result<Vec<Term>, SexprError> =
        list[1..].iter().map(|a| parse_term(sig, vars, a)).collect();
    let args = args?;
    if args.len() != sig.pred_args(pred).len() {
        return Err(SexprError::Arity(head.into()));
    }
    Ok(Atom::Pred { pred, args })
}

fn parse_nnf(sig: &Signature, vars: &BTreeMap<String, VarId>, s: &Sexpr) -> Result<Nnf, SexprError> {
    if let Some(list) = s.list() {
        if let Some(head) = list.first().and_then(|h| h.sym()) {
            match head {
                "and" => {
                    let xs: Result<Vec<Nnf>, _> =
                        list[1..].iter().map(|x| parse_nnf(sig, vars, x)).collect();
                    return Ok(Nnf::And(xs?));
                }
                "or" => {
                    let xs: Result<Vec<Nnf>, _> =
                        list[1..].iter().map(|x| parse_nnf(sig, vars, x)).collect();
                    return Ok(Nnf::Or(xs?));
                }
                "not" => {
                    if list.len() != 2 {
                        return Err(SexprError::Arity("not".into()));
                    }
                    return Ok(parse_nnf(sig, vars, &list[1])?.negated());
                }
                "implies" => {
                    if list.len() != 3 {
                        return Err(SexprError::Arity("implies".into()));
                    }
                    let a = parse_nnf(sig, vars, &list[1])?;
                    let b = parse_nnf(sig, vars, &list[2])?;
                    return Ok(Nnf::Or(vec![a.negated(), b]));
                }
                "iff" => {
                    if list.len() != 3 {
                        return Err(SexprError::Arity("iff".into()));
                    }
                    let a = parse_nnf(sig, vars, &list[1])?;
                    let b = parse_nnf(sig, vars, &list[2])?;
                    return Ok(Nnf::And(vec![
                        Nnf::Or(vec![a.negated(), b.clone()]),
                        Nnf::Or(vec![b.negated(), a]),
                    ]));
                }
                _ => {}
            }
        }
    }
    Ok(Nnf::Lit(Literal::pos(parse_atom(sig, vars, s)?)))
}

pub fn parse_forall(sig: &Signature, s: &Sexpr) -> Result<ForallFormula, SexprError> {
    let list = s.list().ok_or_else(|| SexprError::Unexpected("forall".into()))?;
    if list.len() != 3 || list[0].sym() != Some("forall") {
        return Err(SexprError::Unexpected("forall".into()));
    }
    let (sorts, names) = parse_binders(sig, &list[1])?;
    let matrix = parse_nnf(sig, &names, &list[2])?;
    Ok(ForallFormula { vars: sorts, matrix })
}

pub fn parse_cube(sig: &Signature, s: &Sexpr) -> Result<Cube, SexprError> {
    let list = s.list().ok_or_else(|| SexprError::Unexpected("exists".into()))?;
    if list.len() != 3 || list[0].sym() != Some("exists") {
        return Err(SexprError::Unexpected("exists".into()));
    }
    let (sorts, names) = parse_binders(sig, &list[1])?;
    let body = list[2].list().ok_or_else(|| SexprError::Unexpected("cube body".into()))?;
    if body.first().and_then(|h| h.sym()) != Some("and") {
        return Err(SexprError::Unexpected("cube body".into()));
    }
    let mut lits = Vec::new();
    for item in &body[1..] {
        if let Some(inner) = item.list() {
            if inner.first().and_then(|h| h.sym()) == Some("not") {
                if inner.len() != 2 {
                    return Err(SexprError::Arity("not".into()));
                }
                lits.push(Literal::neg(parse_atom(sig, &names, &inner[1])?));
                continue;
            }
        }
        lits.push(Literal::pos(parse_atom(sig, &names, item)?));
    }
    Ok(Cube { vars: sorts, lits })
}

pub fn parse_exists(sig: &Signature, s: &Sexpr) -> Result<ExistsFormula, SexprError> {
    let list = s.list().ok_or_else(|| SexprError::Unexpected("or".into()))?;
    if list.first().and_then(|h| h.sym()) == Some("or") {
        let cubes: Result<Vec<Cube>, _> = list[1..].iter().map(|c| parse_cube(sig, c)).collect();
        return Ok(ExistsFormula { cubes: cubes? });
    }
    // A bare cube is accepted as a one-disjunct formula.
    Ok(ExistsFormula::single(parse_cube(sig, s)?))
}
