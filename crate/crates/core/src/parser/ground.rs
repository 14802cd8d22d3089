//! Grounding of lifted schemas into a [`Problem`].
//!
//! Atoms whose value no grounded action can change and that are not part of
//! the initial belief are fixed: they are evaluated once here and removed
//! from states, preconditions, conditions and observations.

use std::collections::{BTreeSet, HashMap, HashSet};

use super::ast::{ActionSchema, DomainAst, EffectAst, Literal, ProblemAst, Term};
use super::{ParseError, SourceSpan};
use crate::model::{
    ground_split_conditionals, Action, ActionId, ConditionalEffect, Fact, FactId, InitialFragment,
    Predicate, ProbabilisticOutcome, Problem,
};

type Atom = (u32, Vec<u32>);
type GLit = (Atom, bool);

struct GEffect {
    condition: Vec<GLit>,
    outcomes: Vec<(f64, Vec<GLit>)>,
}

struct GAction {
    name: String,
    pre: Vec<GLit>,
    effects: Vec<GEffect>,
    observe: Vec<GLit>,
    cost: f64,
    span: SourceSpan,
}

struct Ctx<'a> {
    domain: &'a DomainAst,
    parents: HashMap<String, String>,
    objects: Vec<(String, String)>,
    object_index: HashMap<String, u32>,
    predicate_index: HashMap<String, u32>,
}

fn err(span: &SourceSpan, msg: impl Into<String>) -> ParseError {
    ParseError::new(span.clone(), msg)
}

impl<'a> Ctx<'a> {
    fn new(domain: &'a DomainAst, problem: &ProblemAst) -> Result<Self, ParseError> {
        let mut parents = HashMap::new();
        for (t, p) in &domain.types {
            parents.insert(t.clone(), p.clone());
        }
        let mut objects = Vec::new();
        let mut object_index = HashMap::new();
        for (name, ty) in domain.constants.iter().chain(&problem.objects) {
            if ty != "object" && !parents.contains_key(ty) {
                return Err(err(&problem.goal_span, format!("unknown type `{ty}`")));
            }
            if object_index.contains_key(name) {
                continue;
            }
            object_index.insert(name.clone(), objects.len() as u32);
            objects.push((name.clone(), ty.clone()));
        }
        let mut predicate_index = HashMap::new();
        for (i, p) in domain.predicates.iter().enumerate() {
            if predicate_index.insert(p.name.clone(), i as u32).is_some() {
                return Err(err(&p.span, format!("duplicate predicate `{}`", p.name)));
            }
        }
        Ok(Ctx {
            domain,
            parents,
            objects,
            object_index,
            predicate_index,
        })
    }

    fn is_subtype(&self, ty: &str, target: &str) -> bool {
        let mut cur = ty.to_string();
        for _ in 0..=self.parents.len() {
            if cur == target || target == "object" {
                return true;
            }
            match self.parents.get(&cur) {
                Some(p) => cur = p.clone(),
                None => return false,
            }
        }
        false
    }

    fn objects_of(&self, ty: &str) -> Vec<u32> {
        self.objects
            .iter()
            .enumerate()
            .filter(|(_, (_, t))| self.is_subtype(t, ty))
            .map(|(i, _)| i as u32)
            .collect()
    }

    fn check_predicate(&self, lit: &Literal) -> Result<u32, ParseError> {
        let idx = *self.predicate_index.get(&lit.predicate).ok_or_else(|| {
            err(&lit.span, format!("unknown predicate `{}`", lit.predicate))
        })?;
        let arity = self.domain.predicates[idx as usize].param_types.len();
        if arity != lit.args.len() {
            return Err(err(
                &lit.span,
                format!(
                    "predicate `{}` expects {arity} arguments, got {}",
                    lit.predicate,
                    lit.args.len()
                ),
            ));
        }
        Ok(idx)
    }

    /// Grounds a literal under a (possibly partial) binding.
    fn ground(
        &self,
        lit: &Literal,
        vars: &HashMap<String, usize>,
        binding: &[u32],
    ) -> Result<Option<GLit>, ParseError> {
        let pred = self.check_predicate(lit)?;
        let mut args = Vec::with_capacity(lit.args.len());
        for t in &lit.args {
            match t {
                Term::Const(c) => args.push(*self.object_index.get(c).ok_or_else(|| {
                    err(&lit.span, format!("unknown object `{c}`"))
                })?),
                Term::Var(v) => {
                    let i = *vars
                        .get(v)
                        .ok_or_else(|| err(&lit.span, format!("unbound variable `{v}`")))?;
                    match binding.get(i) {
                        Some(&o) => args.push(o),
                        None => return Ok(None),
                    }
                }
            }
        }
        Ok(Some(((pred, args), lit.positive)))
    }

    fn ground_all(
        &self,
        lits: &[Literal],
        vars: &HashMap<String, usize>,
        binding: &[u32],
    ) -> Result<Vec<GLit>, ParseError> {
        let mut out = Vec::with_capacity(lits.len());
        for l in lits {
            let g = self.ground(l, vars, binding)?.expect("fully bound");
            if !out.contains(&g) {
                out.push(g);
            }
        }
        Ok(out)
    }

    fn atom_name(&self, atom: &Atom) -> String {
        let mut s = format!("({}", self.domain.predicates[atom.0 as usize].name);
        for &o in &atom.1 {
            s.push(' ');
            s.push_str(&self.objects[o as usize].0);
        }
        s.push(')');
        s
    }
}

fn check_outcome_sums(schema: &ActionSchema) -> Result<(), ParseError> {
    for e in &schema.effects {
        let sum: f64 = e.outcomes.iter().map(|(p, _)| p).sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(err(&e.span, format!("outcomes sum to {sum}")));
        }
    }
    Ok(())
}

/// Lifted predicates that no schema mentions in an effect.
fn static_predicates(ctx: &Ctx) -> HashSet<u32> {
    let mut dynamic = HashSet::new();
    for a in &ctx.domain.actions {
        for e in &a.effects {
            for (_, lits) in &e.outcomes {
                for l in lits {
                    if let Some(&i) = ctx.predicate_index.get(&l.predicate) {
                        dynamic.insert(i);
                    }
                }
            }
        }
    }
    (0..ctx.domain.predicates.len() as u32)
        .filter(|i| !dynamic.contains(i))
        .collect()
}

fn ground_schema(
    ctx: &Ctx,
    schema: &ActionSchema,
    known: &dyn Fn(&Atom) -> Option<bool>,
    out: &mut Vec<GAction>,
) -> Result<(), ParseError> {
    let vars: HashMap<String, usize> = schema
        .params
        .iter()
        .enumerate()
        .map(|(i, (v, _))| (v.clone(), i))
        .collect();
    let domains: Vec<Vec<u32>> = schema.params.iter().map(|(_, t)| ctx.objects_of(t)).collect();
    // validate every literal once, independent of bindings
    for l in schema
        .precondition
        .iter()
        .chain(&schema.observe)
        .chain(schema.effects.iter().flat_map(|e| {
            e.condition
                .iter()
                .chain(e.outcomes.iter().flat_map(|(_, ls)| ls.iter()))
        }))
    {
        ctx.check_predicate(l)?;
        for t in &l.args {
            match t {
                Term::Var(v) if !vars.contains_key(v) => {
                    return Err(err(&l.span, format!("unbound variable `{v}`")))
                }
                Term::Const(c) if !ctx.object_index.contains_key(c) => {
                    return Err(err(&l.span, format!("unknown object `{c}`")))
                }
                _ => {}
            }
        }
    }
    let mut binding = Vec::with_capacity(domains.len());
    enumerate(ctx, schema, &vars, &domains, known, &mut binding, out)
}

fn enumerate(
    ctx: &Ctx,
    schema: &ActionSchema,
    vars: &HashMap<String, usize>,
    domains: &[Vec<u32>],
    known: &dyn Fn(&Atom) -> Option<bool>,
    binding: &mut Vec<u32>,
    out: &mut Vec<GAction>,
) -> Result<(), ParseError> {
    // prune on statically known preconditions as soon as they are bound
    for l in &schema.precondition {
        if let Some((atom, pos)) = ctx.ground(l, vars, binding)? {
            if let Some(v) = known(&atom) {
                if v != pos {
                    return Ok(());
                }
            }
        }
    }
    if binding.len() < domains.len() {
        for &o in &domains[binding.len()] {
            binding.push(o);
            enumerate(ctx, schema, vars, domains, known, binding, out)?;
            binding.pop();
        }
        return Ok(());
    }
    let name = if binding.is_empty() {
        schema.name.clone()
    } else {
        let mut n = schema.name.clone();
        for &o in binding.iter() {
            n.push('_');
            n.push_str(&ctx.objects[o as usize].0);
        }
        n
    };
    let effects = schema
        .effects
        .iter()
        .map(|e: &EffectAst| {
            Ok(GEffect {
                condition: ctx.ground_all(&e.condition, vars, binding)?,
                outcomes: e
                    .outcomes
                    .iter()
                    .map(|(p, ls)| Ok((*p, ctx.ground_all(ls, vars, binding)?)))
                    .collect::<Result<_, ParseError>>()?,
            })
        })
        .collect::<Result<_, ParseError>>()?;
    out.push(GAction {
        name,
        pre: ctx.ground_all(&schema.precondition, vars, binding)?,
        effects,
        observe: ctx.ground_all(&schema.observe, vars, binding)?,
        cost: schema.cost,
        span: schema.span.clone(),
    });
    Ok(())
}

pub fn ground(domain: &DomainAst, problem: &ProblemAst) -> Result<Problem, ParseError> {
    if !problem.domain.is_empty() && problem.domain != domain.name {
        return Err(err(
            &problem.goal_span,
            format!(
                "problem refers to domain `{}`, got `{}`",
                problem.domain, domain.name
            ),
        ));
    }
    let ctx = Ctx::new(domain, problem)?;
    let none: HashMap<String, usize> = HashMap::new();

    let mut init_set: HashSet<Atom> = HashSet::new();
    for l in &problem.init {
        let (atom, pos) = ctx.ground(l, &none, &[])?.expect("ground");
        if pos {
            init_set.insert(atom);
        }
    }

    // initial belief fragments
    let mut groups: Vec<Vec<(f64, Vec<GLit>, SourceSpan)>> = Vec::new();
    let mut belief_atoms: HashSet<Atom> = HashSet::new();
    for (frags, span) in &problem.belief_groups {
        let sum: f64 = frags.iter().map(|f| f.probability).sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(err(span, format!("initial belief weights sum to {sum}")));
        }
        let mut g = Vec::new();
        for f in frags {
            let lits = ctx.ground_all(&f.literals, &none, &[])?;
            for (a, pos) in &lits {
                if lits.contains(&(a.clone(), !pos)) {
                    return Err(err(&f.span, "fragment assigns both values to one atom"));
                }
                belief_atoms.insert(a.clone());
            }
            g.push((f.probability, lits, f.span.clone()));
        }
        groups.push(g);
    }
    for (i, gi) in groups.iter().enumerate() {
        for gj in &groups[i + 1..] {
            for (_, li, _) in gi {
                for (_, lj, span) in gj {
                    if let Some(((a, _), _)) = li
                        .iter()
                        .flat_map(|x| lj.iter().map(move |y| (x, y)))
                        .find(|((a, p), (b, q))| a == b && p != q)
                    {
                        return Err(err(
                            span,
                            format!(
                                "initial fragments overlap: conflicting values for {}",
                                ctx.atom_name(a)
                            ),
                        ));
                    }
                }
            }
        }
    }

    let statics = static_predicates(&ctx);
    let known = |a: &Atom| -> Option<bool> {
        if statics.contains(&a.0) && !belief_atoms.contains(a) {
            Some(init_set.contains(a))
        } else {
            None
        }
    };

    let mut gactions = Vec::new();
    for schema in &domain.actions {
        check_outcome_sums(schema)?;
        ground_schema(&ctx, schema, &known, &mut gactions)?;
    }

    // fixed atoms: nothing changes them and they are not uncertain initially
    let mut changed: HashSet<Atom>;
    loop {
        changed = belief_atoms.clone();
        for a in &gactions {
            for e in &a.effects {
                for (_, ls) in &e.outcomes {
                    changed.extend(ls.iter().map(|(at, _)| at.clone()));
                }
            }
        }
        // statically false, or self-contradictory
        let violated = |lits: &[GLit]| {
            lits.iter().any(|(a, pos)| {
                (!changed.contains(a) && init_set.contains(a) != *pos)
                    || lits.contains(&(a.clone(), !pos))
            })
        };
        let before: usize =
            gactions.len() + gactions.iter().map(|a| a.effects.len()).sum::<usize>();
        gactions.retain(|a| !violated(&a.pre));
        for a in gactions.iter_mut() {
            a.effects.retain(|e| !violated(&e.condition));
        }
        let after: usize =
            gactions.len() + gactions.iter().map(|a| a.effects.len()).sum::<usize>();
        if before == after {
            break;
        }
    }

    let atoms: Vec<Atom> = changed.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let atom_index: HashMap<Atom, u32> = atoms
        .iter()
        .enumerate()
        .map(|(i, a)| (a.clone(), i as u32))
        .collect();
    let fact_of = |(a, pos): &GLit| -> Option<FactId> {
        atom_index
            .get(a)
            .map(|&k| FactId(2 * k + if *pos { 0 } else { 1 }))
    };
    // fixed literals are dropped when they hold; callers have pruned the rest
    let facts_of = |lits: &[GLit]| -> Vec<FactId> {
        let mut v: Vec<FactId> = Vec::new();
        for l in lits {
            if let Some(f) = fact_of(l) {
                if !v.contains(&f) {
                    v.push(f);
                }
            }
        }
        v
    };

    let mut facts = Vec::with_capacity(2 * atoms.len());
    for (k, a) in atoms.iter().enumerate() {
        let name = ctx.atom_name(a);
        let pos = FactId(2 * k as u32);
        facts.push(Fact {
            id: pos,
            name: name.clone(),
            complement: pos.complement(),
        });
        facts.push(Fact {
            id: pos.complement(),
            name: format!("(not {name})"),
            complement: pos,
        });
    }

    let mut actions = Vec::with_capacity(gactions.len());
    for (i, ga) in gactions.iter().enumerate() {
        let mut effects = Vec::with_capacity(ga.effects.len());
        for e in &ga.effects {
            let condition = facts_of(&e.condition);
            let outcomes: Vec<ProbabilisticOutcome> = e
                .outcomes
                .iter()
                .map(|(p, ls)| ProbabilisticOutcome {
                    probability: *p,
                    added: facts_of(ls),
                })
                .collect();
            for o in &outcomes {
                if let Some(f) = o.added.iter().find(|f| o.added.contains(&f.complement())) {
                    let atom = if f.is_atom() { *f } else { f.complement() };
                    return Err(err(
                        &ga.span,
                        format!(
                            "action `{}` adds both {} and its complement",
                            ga.name,
                            facts[atom.index()].name
                        ),
                    ));
                }
            }
            effects.push(ConditionalEffect {
                condition,
                outcomes,
            });
        }
        let observed = facts_of(&ga.observe);
        if observed.len() > 64 {
            return Err(err(
                &ga.span,
                format!("action `{}` observes more than 64 facts", ga.name),
            ));
        }
        actions.push(Action {
            id: ActionId(i as u32),
            name: ga.name.clone(),
            precondition: facts_of(&ga.pre),
            effects,
            observed,
            cost: ga.cost,
        });
    }

    let mut goal = Vec::new();
    for l in &problem.goal {
        let g = ctx.ground(l, &none, &[])?.expect("ground");
        match fact_of(&g) {
            Some(f) => {
                if !goal.contains(&f) {
                    goal.push(f)
                }
            }
            None if init_set.contains(&g.0) == g.1 => {}
            None => return Err(err(&l.span, "goal literal is statically false")),
        }
    }
    if goal.is_empty() {
        return Err(err(&problem.goal_span, "goal is empty or statically true"));
    }

    let mut init_true: Vec<FactId> = init_set
        .iter()
        .filter_map(|a| atom_index.get(a).map(|&k| FactId(2 * k)))
        .collect();
    init_true.sort();
    let initial_groups = groups
        .iter()
        .map(|g| {
            g.iter()
                .map(|(p, lits, _)| InitialFragment {
                    facts: facts_of(lits),
                    probability: *p,
                })
                .collect()
        })
        .collect();
    let fixed: BTreeSet<&Atom> = init_set.iter().filter(|a| !changed.contains(*a)).collect();

    let problem = Problem {
        domain_name: domain.name.clone(),
        name: problem.name.clone(),
        predicates: domain
            .predicates
            .iter()
            .map(|p| Predicate {
                name: p.name.clone(),
                arity: p.param_types.len(),
            })
            .collect(),
        objects: ctx.objects.iter().map(|(n, _)| n.clone()).collect(),
        facts,
        actions,
        goal,
        init_true,
        initial_groups,
        fixed_facts: fixed.into_iter().map(|a| ctx.atom_name(a)).collect(),
        variants: Vec::new(),
    };
    ground_split_conditionals(problem)
        .map_err(|e| ParseError::new(SourceSpan::unknown("problem"), e.to_string()))
}
