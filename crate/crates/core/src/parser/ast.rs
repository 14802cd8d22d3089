//! Lifted domain and problem descriptions read from s-expressions.

use super::sexpr::SExpr;
use super::{ParseError, SourceSpan};

#[derive(Clone, Debug, PartialEq)]
pub enum Term {
    Var(String),
    Const(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Literal {
    pub predicate: String,
    pub args: Vec<Term>,
    pub positive: bool,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EffectAst {
    pub condition: Vec<Literal>,
    pub outcomes: Vec<(f64, Vec<Literal>)>,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<(String, String)>,
    pub precondition: Vec<Literal>,
    pub effects: Vec<EffectAst>,
    pub observe: Vec<Literal>,
    pub cost: f64,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredicateDecl {
    pub name: String,
    pub param_types: Vec<String>,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DomainAst {
    pub name: String,
    /// (type, parent type)
    pub types: Vec<(String, String)>,
    pub constants: Vec<(String, String)>,
    pub predicates: Vec<PredicateDecl>,
    pub actions: Vec<ActionSchema>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FragmentAst {
    pub probability: f64,
    pub literals: Vec<Literal>,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemAst {
    pub name: String,
    pub domain: String,
    pub objects: Vec<(String, String)>,
    pub init: Vec<Literal>,
    pub belief_groups: Vec<(Vec<FragmentAst>, SourceSpan)>,
    pub goal: Vec<Literal>,
    pub goal_span: SourceSpan,
}

fn err(span: &SourceSpan, msg: impl Into<String>) -> ParseError {
    ParseError::new(span.clone(), msg)
}

fn list<'a>(e: &'a SExpr, what: &str) -> Result<&'a [SExpr], ParseError> {
    e.as_list()
        .ok_or_else(|| err(e.span(), format!("expected a list for {what}")))
}

fn atom<'a>(e: &'a SExpr, what: &str) -> Result<&'a str, ParseError> {
    e.as_atom()
        .ok_or_else(|| err(e.span(), format!("expected a name for {what}")))
}

fn name(e: &SExpr, what: &str) -> Result<String, ParseError> {
    let a = atom(e, what)?;
    if a.starts_with(':') || a.starts_with('?') || a.is_empty() {
        return Err(err(e.span(), format!("invalid {what} `{a}`")));
    }
    Ok(a.to_ascii_lowercase())
}

fn number(e: &SExpr) -> Result<f64, ParseError> {
    let a = atom(e, "number")?;
    match a.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(err(e.span(), format!("invalid number `{a}`"))),
    }
}

/// `a b - t c` style lists; untyped names get `object`.
fn typed_list(items: &[SExpr], vars: bool) -> Result<Vec<(String, String)>, ParseError> {
    let mut out = Vec::new();
    let mut pending: Vec<String> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let a = atom(&items[i], "typed list entry")?;
        if a == "-" {
            let ty = items
                .get(i + 1)
                .ok_or_else(|| err(items[i].span(), "missing type after `-`"))?;
            let ty = name(ty, "type")?;
            if pending.is_empty() {
                return Err(err(items[i].span(), "type without names"));
            }
            out.extend(pending.drain(..).map(|n| (n, ty.clone())));
            i += 2;
            continue;
        }
        if vars != a.starts_with('?') {
            let what = if vars { "variable" } else { "name" };
            return Err(err(items[i].span(), format!("expected a {what}, got `{a}`")));
        }
        if vars {
            pending.push(a.to_ascii_lowercase());
        } else {
            pending.push(name(&items[i], "name")?);
        }
        i += 1;
    }
    out.extend(pending.into_iter().map(|n| (n, "object".to_string())));
    Ok(out)
}

fn literal(e: &SExpr) -> Result<Literal, ParseError> {
    let items = list(e, "literal")?;
    if items.is_empty() {
        return Err(err(e.span(), "empty literal"));
    }
    let head = atom(&items[0], "predicate")?.to_ascii_lowercase();
    if head == "not" {
        if items.len() != 2 {
            return Err(err(e.span(), "`not` takes exactly one atom"));
        }
        let mut inner = literal(&items[1])?;
        if !inner.positive {
            return Err(err(e.span(), "nested negation"));
        }
        inner.positive = false;
        inner.span = e.span().clone();
        return Ok(inner);
    }
    if matches!(
        head.as_str(),
        "and" | "or" | "when" | "probabilistic" | "oneof" | "forall" | "exists"
    ) {
        return Err(err(e.span(), format!("expected a literal, found `{head}`")));
    }
    let predicate = name(&items[0], "predicate")?;
    let args = items[1..]
        .iter()
        .map(|t| {
            let a = atom(t, "term")?;
            if let Some(v) = a.strip_prefix('?') {
                if v.is_empty() {
                    return Err(err(t.span(), "empty variable name"));
                }
                Ok(Term::Var(a.to_ascii_lowercase()))
            } else {
                Ok(Term::Const(name(t, "object")?))
            }
        })
        .collect::<Result<_, _>>()?;
    Ok(Literal {
        predicate,
        args,
        positive: true,
        span: e.span().clone(),
    })
}

/// `()`, a literal, `(and lit*)` or a bare list of literals.
fn literal_conjunction(e: &SExpr) -> Result<Vec<Literal>, ParseError> {
    let items = list(e, "formula")?;
    if items.is_empty() {
        return Ok(Vec::new());
    }
    match e.head().as_deref() {
        Some("and") => items[1..].iter().map(literal).collect(),
        Some(_) => Ok(vec![literal(e)?]),
        None => items.iter().map(literal).collect(),
    }
}

fn probabilistic(e: &SExpr) -> Result<Vec<(f64, Vec<Literal>)>, ParseError> {
    let items = list(e, "probabilistic effect")?;
    let rest = &items[1..];
    if rest.is_empty() || rest.len() % 2 != 0 {
        return Err(err(
            e.span(),
            "`probabilistic` expects pairs of probability and effect",
        ));
    }
    rest.chunks(2)
        .map(|pair| {
            let p = number(&pair[0])?;
            if !(p > 0.0 && p <= 1.0) {
                return Err(err(pair[0].span(), format!("probability {p} not in (0,1]")));
            }
            Ok((p, literal_conjunction(&pair[1])?))
        })
        .collect()
}

/// Body of a `when` or a top-level effect item list.
fn effect_items(
    items: &[SExpr],
    condition: &[Literal],
    span: &SourceSpan,
    out: &mut Vec<EffectAst>,
) -> Result<(), ParseError> {
    let mut plain = Vec::new();
    let mut rest = Vec::new();
    for item in items {
        match item.head().as_deref() {
            Some("probabilistic") => rest.push(EffectAst {
                condition: condition.to_vec(),
                outcomes: probabilistic(item)?,
                span: item.span().clone(),
            }),
            Some("when") => {
                if !condition.is_empty() {
                    return Err(err(item.span(), "nested `when`"));
                }
                let parts = list(item, "when")?;
                if parts.len() != 3 {
                    return Err(err(item.span(), "`when` takes a condition and an effect"));
                }
                let cond = literal_conjunction(&parts[1])?;
                if cond.is_empty() {
                    return Err(err(parts[1].span(), "empty `when` condition"));
                }
                let body = list(&parts[2], "effect")?;
                let body_items: Vec<SExpr> = match parts[2].head().as_deref() {
                    Some("and") => body[1..].to_vec(),
                    _ if body.is_empty() => Vec::new(),
                    _ => vec![parts[2].clone()],
                };
                effect_items(&body_items, &cond, item.span(), &mut rest)?;
            }
            Some("and") => return Err(err(item.span(), "nested `and` in effect")),
            _ => plain.push(literal(item)?),
        }
    }
    if !plain.is_empty() {
        out.push(EffectAst {
            condition: condition.to_vec(),
            outcomes: vec![(1.0, plain)],
            span: span.clone(),
        });
    }
    out.extend(rest);
    Ok(())
}

fn effect(e: &SExpr) -> Result<Vec<EffectAst>, ParseError> {
    let items = list(e, "effect")?;
    let mut out = Vec::new();
    if items.is_empty() {
        return Ok(out);
    }
    let top: Vec<SExpr> = match e.head().as_deref() {
        Some("and") => items[1..].to_vec(),
        _ => vec![e.clone()],
    };
    effect_items(&top, &[], e.span(), &mut out)?;
    Ok(out)
}

fn action(e: &SExpr) -> Result<ActionSchema, ParseError> {
    let items = list(e, "action")?;
    let act_name = name(
        items
            .get(1)
            .ok_or_else(|| err(e.span(), "action without a name"))?,
        "action name",
    )?;
    let mut schema = ActionSchema {
        name: act_name,
        params: Vec::new(),
        precondition: Vec::new(),
        effects: Vec::new(),
        observe: Vec::new(),
        cost: 1.0,
        span: e.span().clone(),
    };
    let mut i = 2;
    while i < items.len() {
        let key = atom(&items[i], "action keyword")?.to_ascii_lowercase();
        let value = items
            .get(i + 1)
            .ok_or_else(|| err(items[i].span(), format!("missing value for {key}")))?;
        match key.as_str() {
            ":parameters" => schema.params = typed_list(list(value, "parameters")?, true)?,
            ":precondition" => schema.precondition = literal_conjunction(value)?,
            ":effect" => schema.effects = effect(value)?,
            ":observe" => schema.observe = literal_conjunction(value)?,
            ":cost" => {
                let c = number(value)?;
                if c <= 0.0 {
                    return Err(err(value.span(), "action cost must be positive"));
                }
                schema.cost = c;
            }
            _ => return Err(err(items[i].span(), format!("unknown action keyword `{key}`"))),
        }
        i += 2;
    }
    Ok(schema)
}

fn define_header<'a>(e: &'a SExpr, kind: &str) -> Result<(&'a [SExpr], String), ParseError> {
    let items = list(e, "definition")?;
    if e.head().as_deref() != Some("define") || items.len() < 2 {
        return Err(err(e.span(), "expected `(define ...)`"));
    }
    let header = list(&items[1], "definition header")?;
    if header.len() != 2 || items[1].head().as_deref() != Some(kind) {
        return Err(err(items[1].span(), format!("expected `({kind} <name>)`")));
    }
    Ok((&items[2..], name(&header[1], kind)?))
}

pub fn domain(e: &SExpr) -> Result<DomainAst, ParseError> {
    let (sections, dname) = define_header(e, "domain")?;
    let mut d = DomainAst {
        name: dname,
        types: Vec::new(),
        constants: Vec::new(),
        predicates: Vec::new(),
        actions: Vec::new(),
    };
    for sec in sections {
        let items = list(sec, "domain section")?;
        match sec.head().as_deref() {
            Some(":requirements") => {}
            Some(":types") => d.types.extend(typed_list(&items[1..], false)?),
            Some(":constants") => d.constants.extend(typed_list(&items[1..], false)?),
            Some(":predicates") => {
                for p in &items[1..] {
                    let parts = list(p, "predicate declaration")?;
                    if parts.is_empty() {
                        return Err(err(p.span(), "empty predicate declaration"));
                    }
                    d.predicates.push(PredicateDecl {
                        name: name(&parts[0], "predicate")?,
                        param_types: typed_list(&parts[1..], true)?
                            .into_iter()
                            .map(|(_, t)| t)
                            .collect(),
                        span: p.span().clone(),
                    });
                }
            }
            Some(":action") => d.actions.push(action(sec)?),
            _ => return Err(err(sec.span(), "unknown domain section")),
        }
    }
    Ok(d)
}

pub fn problem(e: &SExpr) -> Result<ProblemAst, ParseError> {
    let (sections, pname) = define_header(e, "problem")?;
    let mut p = ProblemAst {
        name: pname,
        domain: String::new(),
        objects: Vec::new(),
        init: Vec::new(),
        belief_groups: Vec::new(),
        goal: Vec::new(),
        goal_span: e.span().clone(),
    };
    let mut has_goal = false;
    for sec in sections {
        let items = list(sec, "problem section")?;
        match sec.head().as_deref() {
            Some(":domain") if items.len() == 2 => p.domain = name(&items[1], "domain")?,
            Some(":requirements") => {}
            Some(":objects") => p.objects.extend(typed_list(&items[1..], false)?),
            Some(":init") => {
                for l in &items[1..] {
                    p.init.push(literal(l)?);
                }
            }
            Some(":init-belief") => {
                for g in &items[1..] {
                    if g.head().as_deref() != Some("oneof-weighted") {
                        return Err(err(g.span(), "expected `(oneof-weighted ...)`"));
                    }
                    let parts = list(g, "oneof-weighted")?;
                    let rest = &parts[1..];
                    if rest.is_empty() || rest.len() % 2 != 0 {
                        return Err(err(
                            g.span(),
                            "`oneof-weighted` expects pairs of probability and fragment",
                        ));
                    }
                    let frags = rest
                        .chunks(2)
                        .map(|pair| {
                            let prob = number(&pair[0])?;
                            if !(prob > 0.0 && prob <= 1.0) {
                                return Err(err(
                                    pair[0].span(),
                                    format!("probability {prob} not in (0,1]"),
                                ));
                            }
                            Ok(FragmentAst {
                                probability: prob,
                                literals: literal_conjunction(&pair[1])?,
                                span: pair[1].span().clone(),
                            })
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    p.belief_groups.push((frags, g.span().clone()));
                }
            }
            Some(":goal") if items.len() == 2 => {
                p.goal = literal_conjunction(&items[1])?;
                p.goal_span = items[1].span().clone();
                has_goal = true;
            }
            _ => return Err(err(sec.span(), "unknown or malformed problem section")),
        }
    }
    if !has_goal {
        return Err(err(e.span(), "problem has no :goal"));
    }
    Ok(p)
}
