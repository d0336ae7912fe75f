//! Line-oriented policy language with s-expression payloads. Also accepts a
//! JSON mirror of the declaration set for machine generation. The grammar is
//! documented in docs/dsl.md.

use super::{
    CanAssignDecl, CanRevokeDecl, GoalCmp, GoalDecl, GoalPair, InitDecl, PolicyDecls,
    RoleExprDecl, RoleSchemaDecl, SchemaOrRole, SortSection,
};
use crate::fol::sexpr::{parse_many, Sexpr, SexprError};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum ParseError {
    #[error("line {0}: {1}")]
    At(usize, String),
    #[error("unterminated section `{0}`")]
    Unterminated(String),
    #[error("unknown section `{0}`")]
    UnknownSection(String),
    #[error("sexpr error in section `{0}`: {1}")]
    Sexpr(String, SexprError),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Parse the text form. Sections may appear in any order; later sections of
/// the same name extend earlier ones.
pub fn parse_policy(input: &str) -> Result<PolicyDecls, ParseError> {
    let mut decls = PolicyDecls::default();
    let mut lines = input.lines().enumerate().peekable();

    while let Some((lineno, raw)) = lines.next() {
        let line = strip_comment(raw).trim().to_string();
        if line.is_empty() {
            continue;
        }
        // One-line form `section { items }` or the block form ending in `}`.
        if let Some(brace) = line.find('{') {
            let header = line[..brace].trim().to_string();
            let after = &line[brace + 1..];
            if let Some(inline_body) = after.trim_end().strip_suffix('}') {
                apply_section(&mut decls, &header, inline_body, lineno + 1)?;
                continue;
            }
            let mut body = String::from(after);
            body.push('\n');
            let mut closed = false;
            for (_, raw) in lines.by_ref() {
                let l = strip_comment(raw);
                if l.trim() == "}" {
                    closed = true;
                    break;
                }
                body.push_str(l);
                body.push('\n');
            }
            if !closed {
                return Err(ParseError::Unterminated(header));
            }
            apply_section(&mut decls, &header, &body, lineno + 1)?;
        } else {
            return Err(ParseError::At(lineno + 1, format!("expected `section {{`, got `{line}`")));
        }
    }
    Ok(decls)
}

/// The JSON mirror: a direct serde encoding of the declaration set.
pub fn parse_policy_json(input: &str) -> Result<PolicyDecls, ParseError> {
    Ok(serde_json::from_str(input)?)
}

pub fn policy_to_json(decls: &PolicyDecls) -> String {
    serde_json::to_string_pretty(decls).expect("declarations serialize")
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn sexprs(section: &str, body: &str) -> Result<Vec<Sexpr>, ParseError> {
    parse_many(body).map_err(|e| ParseError::Sexpr(section.into(), e))
}

fn apply_section(
    decls: &mut PolicyDecls,
    header: &str,
    body: &str,
    lineno: usize,
) -> Result<(), ParseError> {
    let items = sexprs(header, body)?;
    let err = |msg: &str| ParseError::At(lineno, msg.to_string());
    match header {
        "sorts" => {
            // Stream of: <sort-name> <sv|open> ( consts... )
            let mut it = items.into_iter();
            while let Some(first) = it.next() {
                let sort = first.sym().ok_or_else(|| err("expected sort name"))?.to_string();
                let kind = it
                    .next()
                    .and_then(|s| s.sym().map(str::to_string))
                    .ok_or_else(|| err("expected `sv` or `open`"))?;
                let list = it.next().ok_or_else(|| err("expected constant list"))?;
                let consts: Vec<String> = list
                    .list()
                    .ok_or_else(|| err("expected constant list"))?
                    .iter()
                    .map(|s| s.sym().map(str::to_string))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| err("constants must be symbols"))?;
                let section = SortSection { scalar: kind == "sv", consts };
                match sort.as_str() {
                    "user" => decls.user = section,
                    "role" => decls.role = section,
                    "permission" => decls.permission = section,
                    other => return Err(err(&format!("unknown sort `{other}`"))),
                }
            }
        }
        "hierarchy" => {
            for item in items {
                decls.hierarchy.push(pair(&item).map_err(|m| err(&m))?);
            }
        }
        "pa" => {
            let mut pairs = decls.pa.take().unwrap_or_default();
            for item in items {
                pairs.push(pair(&item).map_err(|m| err(&m))?);
            }
            decls.pa = Some(pairs);
        }
        "init" => {
            // Either ua facts or one raw universal formula.
            if items.first().and_then(|s| s.list()).and_then(|l| l.first()).and_then(|h| h.sym())
                == Some("forall")
            {
                let text = render(&items[0]);
                decls.init = InitDecl::Formula(text);
            } else {
                let mut facts = match &decls.init {
                    InitDecl::Facts(f) => f.clone(),
                    InitDecl::Formula(_) => Vec::new(),
                };
                for item in items {
                    facts.push(pair(&item).map_err(|m| err(&m))?);
                }
                decls.init = InitDecl::Facts(facts);
            }
        }
        "smer" => {
            for item in items {
                decls.smer.push(pair(&item).map_err(|m| err(&m))?);
            }
        }
        "constraints" => {
            for item in items {
                decls.constraints.push(render(&item));
            }
        }
        "schemas" => {
            for item in items {
                decls.schemas.push(parse_schema(&item).map_err(|m| err(&m))?);
            }
        }
        "can_assign" => {
            for item in items {
                decls.can_assign.push(parse_can_assign(&item).map_err(|m| err(&m))?);
            }
        }
        "can_revoke" => {
            for item in items {
                decls.can_revoke.push(parse_can_revoke(&item).map_err(|m| err(&m))?);
            }
        }
        "goal" => {
            let mut goal = decls.goal.take().unwrap_or(GoalDecl { user: None, pairs: vec![] });
            for item in items {
                let list = item.list().ok_or_else(|| err("goal items are lists"))?;
                match list.first().and_then(|h| h.sym()) {
                    Some("user") => {
                        goal.user = Some(
                            list.get(1)
                                .and_then(|s| s.sym())
                                .ok_or_else(|| err("expected user name"))?
                                .to_string(),
                        );
                    }
                    Some(cmp @ ("eq" | "ge")) => {
                        let role = list
                            .get(1)
                            .and_then(|s| s.sym())
                            .ok_or_else(|| err("expected role name"))?
                            .to_string();
                        let mut permission = None;
                        if let Some(k) = list.get(2).and_then(|s| s.sym()) {
                            if k != "perm" {
                                return Err(err("expected `perm`"));
                            }
                            permission = Some(
                                list.get(3)
                                    .and_then(|s| s.sym())
                                    .ok_or_else(|| err("expected permission name"))?
                                    .to_string(),
                            );
                        }
                        goal.pairs.push(GoalPair {
                            role,
                            cmp: if cmp == "eq" { GoalCmp::Eq } else { GoalCmp::Senior },
                            permission,
                        });
                    }
                    _ => return Err(err("goal items are (user U), (eq R ...) or (ge R ...)")),
                }
            }
            decls.goal = Some(goal);
        }
        other => return Err(ParseError::UnknownSection(other.into())),
    }
    Ok(())
}

fn pair(item: &Sexpr) -> Result<(String, String), String> {
    let list = item.list().ok_or("expected a pair")?;
    if list.len() != 2 {
        return Err("expected a pair".into());
    }
    Ok((
        list[0].sym().ok_or("expected a symbol")?.to_string(),
        list[1].sym().ok_or("expected a symbol")?.to_string(),
    ))
}

fn render(s: &Sexpr) -> String {
    match s {
        Sexpr::Sym(x) => x.clone(),
        Sexpr::List(xs) => {
            let inner: Vec<String> = xs.iter().map(render).collect();
            format!("({})", inner.join(" "))
        }
    }
}

fn parse_schema_or_role(s: &Sexpr) -> Result<SchemaOrRole, String> {
    match s {
        Sexpr::Sym(name) => Ok(SchemaOrRole::Role(name.clone())),
        Sexpr::List(xs) => {
            let name = xs.first().and_then(|h| h.sym()).ok_or("expected schema name")?;
            let params: Option<Vec<String>> =
                xs[1..].iter().map(|p| p.sym().map(str::to_string)).collect();
            Ok(SchemaOrRole::Schema {
                name: name.to_string(),
                params: params.ok_or("schema parameters must be symbols")?,
            })
        }
    }
}

/// Role expression inside a precondition list: `R` (implicit member),
/// `=R` (explicit member), `!R` (explicit non-member), or a schema instance,
/// optionally wrapped as (! (S p...)) for negation.
fn parse_role_expr(s: &Sexpr) -> Result<RoleExprDecl, String> {
    match s {
        Sexpr::Sym(tok) => {
            if let Some(name) = tok.strip_prefix('!') {
                Ok(RoleExprDecl { role: SchemaOrRole::Role(name.into()), positive: false, explicit: true })
            } else if let Some(name) = tok.strip_prefix('=') {
                Ok(RoleExprDecl { role: SchemaOrRole::Role(name.into()), positive: true, explicit: true })
            } else {
                Ok(RoleExprDecl { role: SchemaOrRole::Role(tok.clone()), positive: true, explicit: false })
            }
        }
        Sexpr::List(xs) if xs.first().and_then(|h| h.sym()) == Some("!") => {
            let inner = xs.get(1).ok_or("expected negated expression")?;
            let role = parse_schema_or_role(inner)?;
            Ok(RoleExprDecl { role, positive: false, explicit: true })
        }
        list => Ok(RoleExprDecl { role: parse_schema_or_role(list)?, positive: true, explicit: true }),
    }
}

/// (admin (pre...) target [deny (users...)] [label name])
/// with `*` as the administrator-less marker.
fn parse_can_assign(item: &Sexpr) -> Result<CanAssignDecl, String> {
    let list = item.list().ok_or("expected an action")?;
    if list.len() < 3 {
        return Err("expected (admin (preconditions) target ...)".into());
    }
    let admin = match &list[0] {
        Sexpr::Sym(s) if s == "*" => None,
        other => Some(parse_schema_or_role(other)?),
    };
    let precond: Result<Vec<RoleExprDecl>, String> = list[1]
        .list()
        .ok_or("expected a precondition list")?
        .iter()
        .map(parse_role_expr)
        .collect();
    let target = parse_schema_or_role(&list[2])?;
    let mut trusted_excluded = Vec::new();
    let mut label = None;
    let mut rest = &list[3..];
    while !rest.is_empty() {
        match rest[0].sym() {
            Some("deny") => {
                let users = rest.get(1).and_then(|s| s.list()).ok_or("expected (users...) after deny")?;
                for u in users {
                    trusted_excluded.push(u.sym().ok_or("user names are symbols")?.to_string());
                }
                rest = &rest[2..];
            }
            Some("label") => {
                label = Some(rest.get(1).and_then(|s| s.sym()).ok_or("expected label")?.to_string());
                rest = &rest[2..];
            }
            _ => return Err("expected `deny` or `label`".into()),
        }
    }
    Ok(CanAssignDecl { admin, precond: precond?, target, trusted_excluded, label })
}

fn parse_can_revoke(item: &Sexpr) -> Result<CanRevokeDecl, String> {
    let list = item.list().ok_or("expected an action")?;
    if list.len() < 2 {
        return Err("expected (admin target ...)".into());
    }
    let admin = match &list[0] {
        Sexpr::Sym(s) if s == "*" => None,
        other => Some(parse_schema_or_role(other)?),
    };
    let target = parse_schema_or_role(&list[1])?;
    let mut label = None;
    if let Some(k) = list.get(2).and_then(|s| s.sym()) {
        if k == "label" {
            label = list.get(3).and_then(|s| s.sym()).map(str::to_string);
        }
    }
    Ok(CanRevokeDecl { admin, target, label })
}

/// (Name (param-sorts...) [contains Other])
fn parse_schema(item: &Sexpr) -> Result<RoleSchemaDecl, String> {
    let list = item.list().ok_or("expected a schema")?;
    let name = list.first().and_then(|h| h.sym()).ok_or("expected schema name")?.to_string();
    let params: Option<Vec<String>> = list
        .get(1)
        .and_then(|s| s.list())
        .ok_or("expected parameter sort list")?
        .iter()
        .map(|p| p.sym().map(str::to_string))
        .collect();
    let mut contains = None;
    if list.get(2).and_then(|s| s.sym()) == Some("contains") {
        contains = list.get(3).and_then(|s| s.sym()).map(str::to_string);
    }
    Ok(RoleSchemaDecl { name, params: params.ok_or("parameter sorts must be symbols")?, contains })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_policy_parses() {
        let text = "
sorts {
  user sv (u0)
  role sv (r1 r2)
  permission open ()
}
init {
  (u0 r1)
}
can_assign {
  (* (=r1) r2)
}
goal {
  (user u0)
  (eq r2)
}
";
        let decls = parse_policy(text).unwrap();
        assert!(decls.user.scalar);
        assert!(!decls.permission.scalar);
        assert_eq!(decls.can_assign.len(), 1);
        assert_eq!(decls.can_assign[0].admin, None);
        assert!(decls.can_assign[0].precond[0].explicit);
        let goal = decls.goal.unwrap();
        assert_eq!(goal.user.as_deref(), Some("u0"));
        assert_eq!(goal.pairs.len(), 1);
    }

    #[test]
    fn negative_precondition_token() {
        let expr = parse_role_expr(&Sexpr::Sym("!r4".into())).unwrap();
        assert!(!expr.positive);
        assert!(expr.explicit);
    }

    #[test]
    fn json_mirror_round_trips() {
        let text = "
sorts {
  user sv (a b)
  role sv (x y)
  permission open ()
}
smer { (x y) }
can_revoke { (x y) }
";
        let decls = parse_policy(text).unwrap();
        let json = policy_to_json(&decls);
        let back = parse_policy_json(&json).unwrap();
        assert_eq!(decls, back);
    }

    #[test]
    fn raw_init_formula() {
        let text = "
sorts {
  user open (e0)
  role open (f0)
  permission open ()
}
init {
  (forall ((u User) (r Role)) (iff (ua u r) (and (not (= u e0)) (not (= r f0)))))
}
";
        let decls = parse_policy(text).unwrap();
        match decls.init {
            InitDecl::Formula(ref f) => assert!(f.starts_with("(forall")),
            other => panic!("expected a formula, got {other:?}"),
        }
    }

    #[test]
    fn unknown_section_is_an_error() {
        assert!(parse_policy("bogus {\n}\n").is_err());
    }
}
