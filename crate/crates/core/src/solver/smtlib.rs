//! SMT-LIB 2 export of satisfiability problems (logic UF with free sorts)
//! and an optional shell-out to an external solver for differential runs.

use super::BsrProblem;
use crate::fol::{Atom, Literal, Nnf, Signature, SortId, Term, VarId};
use std::fmt::Write as _;
use std::io::Write as _;
use std::process::Command;

fn sort_ref(sig: &Signature, s: SortId) -> String {
    sig.sorts[s.0 as usize].name.clone()
}

fn term_ref(sig: &Signature, names: &dyn Fn(VarId) -> String, t: &Term) -> String {
    match t {
        Term::Var(v) => names(*v),
        Term::Const(c) => mangle(sig.const_name(*c)),
    }
}

/// SMT-LIB symbols cannot start with '!'; quote our skolem-style names.
fn mangle(name: &str) -> String {
    if name.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
    {
        name.to_string()
    } else {
        format!("|{name}|")
    }
}

fn literal_ref(sig: &Signature, names: &dyn Fn(VarId) -> String, l: &Literal) -> String {
    let body = match &l.atom {
        Atom::Pred { pred, args } => {
            if args.is_empty() {
                mangle(sig.pred_name(*pred))
            } else {
                let mut s = format!("({}", mangle(sig.pred_name(*pred)));
                for a in args {
                    let _ = write!(s, " {}", term_ref(sig, names, a));
                }
                s.push(')');
                s
            }
        }
        Atom::Eq(a, b) => format!("(= {} {})", term_ref(sig, names, a), term_ref(sig, names, b)),
    };
    if l.positive {
        body
    } else {
        format!("(not {body})")
    }
}

fn nnf_ref(sig: &Signature, names: &dyn Fn(VarId) -> String, m: &Nnf) -> String {
    match m {
        Nnf::Lit(l) => literal_ref(sig, names, l),
        Nnf::And(xs) => match xs.len() {
            0 => "true".into(),
            1 => nnf_ref(sig, names, &xs[0]),
            _ => {
                let mut s = String::from("(and");
                for x in xs {
                    let _ = write!(s, " {}", nnf_ref(sig, names, x));
                }
                s.push(')');
                s
            }
        },
        Nnf::Or(xs) => match xs.len() {
            0 => "false".into(),
            1 => nnf_ref(sig, names, &xs[0]),
            _ => {
                let mut s = String::from("(or");
                for x in xs {
                    let _ = write!(s, " {}", nnf_ref(sig, names, x));
                }
                s.push(')');
                s
            }
        },
    }
}

/// A complete SMT-LIB 2 script whose check-sat answer matches `check_sat`.
pub fn export_smtlib(p: &BsrProblem) -> String {
    let sig = &p.sig;
    let mut out = String::new();
    out.push_str("(set-logic UF)\n");
    for s in &sig.sorts {
        let _ = writeln!(out, "(declare-sort {} 0)", s.name);
    }
    for c in &sig.consts {
        let _ = writeln!(out, "(declare-fun {} () {})", mangle(&c.name), sort_ref(sig, c.sort));
    }
    for pr in &sig.preds {
        let args: Vec<String> = pr.args.iter().map(|s| sort_ref(sig, *s)).collect();
        let _ = writeln!(out, "(declare-fun {} ({}) Bool)", mangle(&pr.name), args.join(" "));
    }

    for (sort, values) in &p.sv {
        if values.len() > 1 {
            let names: Vec<String> =
                values.iter().map(|v| mangle(sig.const_name(*v))).collect();
            let _ = writeln!(out, "(assert (distinct {}))", names.join(" "));
        }
        let closure: Vec<String> = values
            .iter()
            .map(|v| format!("(= x {})", mangle(sig.const_name(*v))))
            .collect();
        let body = if closure.len() == 1 { closure[0].clone() } else { format!("(or {})", closure.join(" ")) };
        let _ = writeln!(
            out,
            "(assert (forall ((x {})) {}))",
            sort_ref(sig, *sort),
            body
        );
    }

    for f in &p.forall {
        if f.vars.is_empty() {
            let names = |_: VarId| unreachable!("closed formula");
            let _ = writeln!(out, "(assert {})", nnf_ref(sig, &names, &f.matrix));
            continue;
        }
        let names = {
            let f = f.clone();
            let sig2 = sig.clone();
            move |v: VarId| f.var_name(&sig2, v)
        };
        let binders: Vec<String> = (0..f.vars.len())
            .map(|i| format!("({} {})", names(VarId(i as u32)), sort_ref(sig, f.vars[i])))
            .collect();
        let _ = writeln!(
            out,
            "(assert (forall ({}) {}))",
            binders.join(" "),
            nnf_ref(sig, &names, &f.matrix)
        );
    }

    for f in &p.exists {
        let disjuncts: Vec<String> = f
            .cubes
            .iter()
            .map(|cube| {
                let names = {
                    let cube = cube.clone();
                    let sig2 = sig.clone();
                    move |v: VarId| cube.var_name(&sig2, v)
                };
                let lits: Vec<String> =
                    cube.lits.iter().map(|l| literal_ref(sig, &names, l)).collect();
                let body = match lits.len() {
                    0 => "true".to_string(),
                    1 => lits[0].clone(),
                    _ => format!("(and {})", lits.join(" ")),
                };
                if cube.vars.is_empty() {
                    body
                } else {
                    let binders: Vec<String> = (0..cube.vars.len())
                        .map(|i| format!("({} {})", names(VarId(i as u32)), sort_ref(sig, cube.vars[i])))
                        .collect();
                    format!("(exists ({}) {})", binders.join(" "), body)
                }
            })
            .collect();
        let body = match disjuncts.len() {
            0 => "false".to_string(),
            1 => disjuncts[0].clone(),
            _ => format!("(or {})", disjuncts.join(" ")),
        };
        let _ = writeln!(out, "(assert {body})");
    }

    out.push_str("(check-sat)\n");
    out
}

/// Run an external SMT solver on the exported script. Returns the reported
/// verdict, or None when the solver is missing or answers unknown.
pub fn external_check(p: &BsrProblem, solver_path: &str) -> Option<super::Verdict> {
    let script = export_smtlib(p);
    let dir = std::env::temp_dir();
    let file = dir.join(format!(
        "rolereach-{}-{}.smt2",
        std::process::id(),
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_nanos())
            .unwrap_or(0)
    ));
    {
        let mut f = std::fs::File::create(&file).ok()?;
        f.write_all(script.as_bytes()).ok()?;
    }
    let output = Command::new(solver_path).arg(&file).output();
    let _ = std::fs::remove_file(&file);
    let output = output.ok()?;
    let stdout = String::from_utf8_lossy(&output.stdout);
    for line in stdout.lines() {
        match line.trim() {
            "sat" => return Some(super::Verdict::Sat),
            "unsat" => return Some(super::Verdict::Unsat),
            "unknown" => return None,
            _ => {}
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fol::{Cube, ExistsFormula, Signature};
    use std::sync::Arc;

    #[test]
    fn export_contains_declarations_and_check_sat() {
        let sig = Arc::new(Signature::arbac());
        let p = BsrProblem::new(sig).exists(&ExistsFormula::single(Cube::top()));
        let script = export_smtlib(&p);
        assert!(script.contains("(set-logic UF)"));
        assert!(script.contains("(declare-sort User 0)"));
        assert!(script.contains("(declare-fun ua (User Role) Bool)"));
        assert!(script.ends_with("(check-sat)\n"));
    }

    #[test]
    fn false_exports_as_assert_false() {
        let sig = Arc::new(Signature::arbac());
        let p = BsrProblem::new(sig).exists(&ExistsFormula::bottom());
        let script = export_smtlib(&p);
        assert!(script.contains("(assert false)"));
    }
}
