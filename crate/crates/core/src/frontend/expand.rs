//! Expansion of role and variable families and of `foreach` clauses.

use indexmap::IndexMap;

use super::surface::*;
use super::FrontendError;
use crate::expr::{eval_const, eval_with, Consts, Expr, Value};

/// Evaluate constant declarations in order.
pub fn const_env(prog: &SurfaceProgram) -> Result<Consts, FrontendError> {
    let mut env = Consts::new();
    for (name, e) in &prog.consts {
        let v = eval_const(e, &env).map_err(|err| FrontendError::Const { name: name.clone(), source: err })?;
        env.insert(name.clone(), v);
    }
    Ok(env)
}

fn eval_index(e: &Expr, env: &Consts, bound: &[(String, i64)]) -> Result<i64, FrontendError> {
    let lookup =
        |n: &str| bound.iter().find(|(b, _)| b == n).map(|(_, v)| Value::Int(*v)).or_else(|| env.get(n).copied());
    match eval_with(e, &lookup) {
        Ok(Value::Int(i)) => Ok(i),
        Ok(v) => Err(FrontendError::NonStaticIndex(format!("index `{e}` evaluates to `{v}`"))),
        Err(_) => Err(FrontendError::NonStaticIndex(format!("index `{e}` is not known statically"))),
    }
}

/// Family sizes of roles and variables, whether still declared as
/// families or already expanded.
pub fn family_sizes(prog: &SurfaceProgram) -> Result<IndexMap<String, usize>, FrontendError> {
    let env = const_env(prog)?;
    let mut sizes: IndexMap<String, usize> = prog.expanded_families.iter().cloned().collect();
    for r in &prog.roles {
        if let Some(e) = &r.size {
            sizes.insert(r.name.clone(), family_size(&r.name, e, &env)?);
        }
    }
    for v in &prog.vars {
        if let Some(idx) = &v.index {
            let n = match var_binder(v, &env) {
                Some(_) => {
                    *sizes.get(&v.owner.name).ok_or_else(|| FrontendError::UnknownFamily(v.owner.name.clone()))?
                }
                None => family_size(&v.name, idx, &env)?,
            };
            sizes.insert(v.name.clone(), n);
        }
    }
    Ok(sizes)
}

fn family_size(name: &str, e: &Expr, env: &Consts) -> Result<usize, FrontendError> {
    match eval_const(e, env) {
        Ok(Value::Int(n)) if n >= 1 => Ok(n as usize),
        _ => Err(FrontendError::BadDeclaration(format!("family `{name}` needs a positive constant size, got `{e}`"))),
    }
}

/// `var x[i] @ p[i]`: the binder `i` when the variable follows its owner's
/// family.
fn var_binder<'a>(v: &'a SurfaceVar, env: &Consts) -> Option<&'a str> {
    match (&v.index, &v.owner.index) {
        (Some(Expr::Var(a)), Some(Expr::Var(b))) if a == b && !env.contains_key(a) => Some(a),
        _ => None,
    }
}

pub fn member_name(family: &str, k: usize) -> String {
    format!("{family}{k}")
}

/// Resolve `family[index]` to a member. Indices that mention a binder wrap
/// around the family (1-based); literal ones must be in range.
fn resolve(
    family: &str,
    index: &Expr,
    sizes: &IndexMap<String, usize>,
    env: &Consts,
    bound: &[(String, i64)],
) -> Result<String, FrontendError> {
    let n = *sizes.get(family).ok_or_else(|| FrontendError::UnknownFamily(family.to_string()))? as i64;
    let v = eval_index(index, env, bound)?;
    let wraps = index.free_vars().iter().any(|x| bound.iter().any(|(b, _)| b == x));
    let k = if wraps {
        (v - 1).rem_euclid(n) + 1
    } else if (1..=n).contains(&v) {
        v
    } else {
        return Err(FrontendError::IndexOutOfFamily { family: family.to_string(), index: v, size: n as usize });
    };
    Ok(member_name(family, k as usize))
}

/// Binders that `e` depends on, other than constants and those in `known`.
fn unresolved<'a>(e: &'a Expr, env: &Consts, known: &[String]) -> Vec<&'a str> {
    e.free_vars().into_iter().filter(|v| !env.contains_key(*v) && !known.iter().any(|k| k == v)).collect()
}

struct Expander<'a> {
    env: &'a Consts,
    sizes: &'a IndexMap<String, usize>,
    /// Resolve `foreach` clauses too.
    foreach: bool,
}

impl Expander<'_> {
    /// Substitute bound indices and resolve indexed references whose index
    /// is known; references under an unexpanded `foreach` binder stay.
    fn expr(&self, e: &Expr, bound: &[(String, i64)], pending: &[String]) -> Result<Expr, FrontendError> {
        Ok(match e {
            Expr::Lit(_) => e.clone(),
            Expr::Var(v) => match bound.iter().find(|(b, _)| b == v) {
                Some((_, k)) => Expr::int(*k),
                None => e.clone(),
            },
            Expr::Indexed(base, idx) => {
                let idx2 = self.expr(idx, bound, pending)?;
                if idx.free_vars().iter().any(|v| pending.iter().any(|p| p == v)) {
                    Expr::Indexed(base.clone(), Box::new(idx2))
                } else {
                    Expr::var(resolve(base, idx, self.sizes, self.env, bound)?)
                }
            }
            Expr::App(op, args) => {
                Expr::App(*op, args.iter().map(|a| self.expr(a, bound, pending)).collect::<Result<_, _>>()?)
            }
        })
    }

    fn role(&self, r: &RoleRef, bound: &[(String, i64)]) -> Result<RoleRef, FrontendError> {
        match &r.index {
            None => Ok(r.clone()),
            Some(idx) => Ok(RoleRef::plain(resolve(&r.name, idx, self.sizes, self.env, bound)?)),
        }
    }

    fn updates(
        &self,
        items: &[UpdateItem],
        bound: &[(String, i64)],
        pending: &[String],
    ) -> Result<Vec<UpdateItem>, FrontendError> {
        let mut out = Vec::new();
        for item in items {
            match item {
                UpdateItem::Assign { target, index, value } => {
                    let value = self.expr(value, bound, pending)?;
                    match index {
                        Some(idx) if idx.free_vars().iter().any(|v| pending.iter().any(|p| p == v)) => {
                            out.push(UpdateItem::Assign {
                                target: target.clone(),
                                index: Some(self.expr(idx, bound, pending)?),
                                value,
                            })
                        }
                        Some(idx) => out.push(UpdateItem::Assign {
                            target: resolve(target, idx, self.sizes, self.env, bound)?,
                            index: None,
                            value,
                        }),
                        None => out.push(UpdateItem::Assign { target: target.clone(), index: None, value }),
                    }
                }
                UpdateItem::Foreach { binder, op, bound: limit, body } if self.foreach => {
                    let lookup_bound = |n: &str| bound.iter().any(|(b, _)| b == n);
                    if limit.free_vars().iter().any(|v| !self.env.contains_key(*v) && !lookup_bound(v)) {
                        return Err(FrontendError::NonStaticIndex(format!(
                            "foreach bound `{limit}` depends on program state"
                        )));
                    }
                    let bound_value = eval_index(limit, self.env, bound)?;
                    let n = self.foreach_range(binder, body)?;
                    for k in 1..=n as i64 {
                        let holds = eval_with(&Expr::bin(*op, Expr::int(k), Expr::int(bound_value)), &|_| None)
                            .ok()
                            .and_then(|v| v.as_bool())
                            .unwrap_or(false);
                        if holds {
                            let mut inner = bound.to_vec();
                            inner.push((binder.clone(), k));
                            out.extend(self.updates(body, &inner, pending)?);
                        }
                    }
                }
                UpdateItem::Foreach { binder, op, bound: limit, body } => {
                    let mut inner = pending.to_vec();
                    inner.push(binder.clone());
                    out.push(UpdateItem::Foreach {
                        binder: binder.clone(),
                        op: *op,
                        bound: self.expr(limit, bound, pending)?,
                        body: self.updates(body, bound, &inner)?,
                    });
                }
            }
        }
        Ok(out)
    }

    /// Size of the family indexed by `binder` in `body`.
    fn foreach_range(&self, binder: &str, body: &[UpdateItem]) -> Result<usize, FrontendError> {
        fn find<'b>(binder: &str, e: &'b Expr) -> Option<&'b str> {
            match e {
                Expr::Indexed(base, idx) if idx.free_vars().contains(&binder) => Some(base),
                Expr::Indexed(_, idx) => find(binder, idx),
                Expr::App(_, args) => args.iter().find_map(|a| find(binder, a)),
                _ => None,
            }
        }
        for item in body {
            let fam = match item {
                UpdateItem::Assign { target, index: Some(idx), .. } if idx.free_vars().contains(&binder) => {
                    Some(target.as_str())
                }
                UpdateItem::Assign { value, .. } => find(binder, value),
                UpdateItem::Foreach { body, .. } => return self.foreach_range(binder, body),
            };
            if let Some(f) = fam {
                return self.sizes.get(f).copied().ok_or_else(|| FrontendError::UnknownFamily(f.to_string()));
            }
        }
        Err(FrontendError::NonStaticIndex(format!("foreach index `{binder}` ranges over no family")))
    }

    fn term(&self, t: &SurfaceTerm, bound: &[(String, i64)]) -> Result<SurfaceTerm, FrontendError> {
        Ok(match t {
            SurfaceTerm::Inact | SurfaceTerm::Call(_) => t.clone(),
            SurfaceTerm::Conditional { guard, at, then_body, else_body } => {
                if let Some(idx) = &at.index {
                    if !unresolved(idx, self.env, &[]).is_empty() {
                        return Err(FrontendError::UnsupportedTemplate(format!(
                            "conditional located at `{}[{idx}]`",
                            at.name
                        )));
                    }
                }
                SurfaceTerm::Conditional {
                    guard: self.expr(guard, bound, &[])?,
                    at: self.role(at, bound)?,
                    then_body: Box::new(self.term(then_body, bound)?),
                    else_body: Box::new(self.term(else_body, bound)?),
                }
            }
            SurfaceTerm::AllSynch { entries, cont } => {
                let mut es = Vec::with_capacity(entries.len());
                for e in entries {
                    if let Some(idx) = &e.role.index {
                        if !unresolved(idx, self.env, &[]).is_empty() {
                            return Err(FrontendError::UnsupportedTemplate(format!(
                                "allsynch entry for `{}[{idx}]`",
                                e.role.name
                            )));
                        }
                    }
                    es.push(SyncEntry {
                        role: self.role(&e.role, bound)?,
                        guard: self.expr(&e.guard, bound, &[])?,
                        weight: self.expr(&e.weight, bound, &[])?,
                        update: self.updates(&e.update, bound, &[])?,
                    });
                }
                SurfaceTerm::AllSynch { entries: es, cont: Box::new(self.term(cont, bound)?) }
            }
            SurfaceTerm::Interaction(i) => self.interaction(i, bound)?,
        })
    }

    fn interaction(&self, i: &SurfaceInteraction, bound: &[(String, i64)]) -> Result<SurfaceTerm, FrontendError> {
        let mut binders: Vec<(String, String)> = Vec::new();
        for r in std::iter::once(&i.initiator).chain(&i.receivers) {
            if let Some(idx) = &r.index {
                for b in unresolved(idx, self.env, &[]) {
                    if !binders.iter().any(|(x, _)| x == b) {
                        binders.push((b.to_string(), r.name.clone()));
                    }
                }
            }
        }
        match binders.len() {
            0 => Ok(SurfaceTerm::Interaction(self.instance(i, bound, None, |b| self.term(&b.cont, bound))?)),
            1 => {
                let (binder, family) = &binders[0];
                let n = *self.sizes.get(family).ok_or_else(|| FrontendError::UnknownFamily(family.clone()))?;
                let cont = &i.branches[0].cont;
                if i.branches.iter().any(|b| b.cont != *cont) {
                    return Err(FrontendError::TemplateBranchesDiverge(binder.clone()));
                }
                let mut acc = self.term(cont, bound)?;
                for k in (1..=n).rev() {
                    let mut inner = bound.to_vec();
                    inner.push((binder.clone(), k as i64));
                    let next = acc.clone();
                    acc = SurfaceTerm::Interaction(self.instance(i, &inner, Some(k), |_| Ok(next.clone()))?);
                }
                Ok(acc)
            }
            _ => Err(FrontendError::UnsupportedTemplate(format!(
                "interaction indexed by several binders ({})",
                binders.iter().map(|(b, _)| b.as_str()).collect::<Vec<_>>().join(", ")
            ))),
        }
    }

    fn instance(
        &self,
        i: &SurfaceInteraction,
        bound: &[(String, i64)],
        copy: Option<usize>,
        cont: impl Fn(&SurfaceBranch) -> Result<SurfaceTerm, FrontendError>,
    ) -> Result<SurfaceInteraction, FrontendError> {
        let suffix = |l: &Option<String>| match (l, copy) {
            (Some(l), Some(k)) => Some(format!("{l}{k}")),
            (l, _) => l.clone(),
        };
        let mut branches = Vec::with_capacity(i.branches.len());
        for b in &i.branches {
            branches.push(SurfaceBranch {
                label: suffix(&b.label),
                weight: self.expr(&b.weight, bound, &[])?,
                update: self.updates(&b.update, bound, &[])?,
                cont: cont(b)?,
            });
        }
        Ok(SurfaceInteraction {
            label: suffix(&i.label),
            initiator: self.role(&i.initiator, bound)?,
            receivers: i.receivers.iter().map(|r| self.role(r, bound)).collect::<Result<_, _>>()?,
            branches,
        })
    }
}

/// Replace role and variable families by their members and replicate each
/// interaction indexed by a binder once per family member, in sequence.
/// Index arithmetic on a binder wraps around the family. `foreach` clauses
/// are left for [`expand_foreach`].
pub fn expand_indices(prog: &SurfaceProgram) -> Result<SurfaceProgram, FrontendError> {
    let env = const_env(prog)?;
    let sizes = family_sizes(prog)?;
    let ex = Expander { env: &env, sizes: &sizes, foreach: false };

    let mut roles = Vec::new();
    for r in &prog.roles {
        match &r.size {
            None => roles.push(r.clone()),
            Some(_) => {
                for k in 1..=sizes[&r.name] {
                    roles.push(RoleDecl { name: member_name(&r.name, k), size: None });
                }
            }
        }
    }

    let mut vars = Vec::new();
    for v in &prog.vars {
        match (&v.index, var_binder(v, &env)) {
            (None, _) => vars.push(SurfaceVar { owner: ex.role(&v.owner, &[])?, ..v.clone() }),
            (Some(_), Some(b)) => {
                for k in 1..=sizes[&v.name] {
                    let bound = [(b.to_string(), k as i64)];
                    vars.push(SurfaceVar {
                        name: member_name(&v.name, k),
                        index: None,
                        owner: ex.role(&v.owner, &bound)?,
                        range: v.range.clone(),
                        init: ex.expr(&v.init, &bound, &[])?,
                    });
                }
            }
            (Some(_), None) => {
                let owner = ex.role(&v.owner, &[])?;
                for k in 1..=sizes[&v.name] {
                    vars.push(SurfaceVar {
                        name: member_name(&v.name, k),
                        index: None,
                        owner: owner.clone(),
                        range: v.range.clone(),
                        init: v.init.clone(),
                    });
                }
            }
        }
    }

    let definitions = prog
        .definitions
        .iter()
        .map(|(n, t)| Ok((n.clone(), ex.term(t, &[])?)))
        .collect::<Result<_, FrontendError>>()?;
    Ok(SurfaceProgram {
        kind: prog.kind,
        consts: prog.consts.clone(),
        roles,
        vars,
        definitions,
        main: prog.main.clone(),
        expanded_families: sizes.into_iter().collect(),
    })
}

/// Replace each `foreach (k op b) u` by the concatenation of `u` at every
/// family index `k` satisfying `k op b`.
pub fn expand_foreach(prog: &SurfaceProgram) -> Result<SurfaceProgram, FrontendError> {
    let env = const_env(prog)?;
    let sizes = family_sizes(prog)?;
    let ex = Expander { env: &env, sizes: &sizes, foreach: true };

    fn walk(ex: &Expander, t: &SurfaceTerm) -> Result<SurfaceTerm, FrontendError> {
        Ok(match t {
            SurfaceTerm::Inact | SurfaceTerm::Call(_) => t.clone(),
            SurfaceTerm::Conditional { guard, at, then_body, else_body } => SurfaceTerm::Conditional {
                guard: guard.clone(),
                at: at.clone(),
                then_body: Box::new(walk(ex, then_body)?),
                else_body: Box::new(walk(ex, else_body)?),
            },
            SurfaceTerm::AllSynch { entries, cont } => SurfaceTerm::AllSynch {
                entries: entries
                    .iter()
                    .map(|e| Ok(SyncEntry { update: ex.updates(&e.update, &[], &[])?, ..e.clone() }))
                    .collect::<Result<_, FrontendError>>()?,
                cont: Box::new(walk(ex, cont)?),
            },
            SurfaceTerm::Interaction(i) => SurfaceTerm::Interaction(SurfaceInteraction {
                branches: i
                    .branches
                    .iter()
                    .map(|b| {
                        Ok(SurfaceBranch {
                            label: b.label.clone(),
                            weight: b.weight.clone(),
                            update: ex.updates(&b.update, &[], &[])?,
                            cont: walk(ex, &b.cont)?,
                        })
                    })
                    .collect::<Result<_, FrontendError>>()?,
                ..i.clone()
            }),
        })
    }

    let definitions =
        prog.definitions.iter().map(|(n, t)| Ok((n.clone(), walk(&ex, t)?))).collect::<Result<_, FrontendError>>()?;
    Ok(SurfaceProgram { definitions, ..prog.clone() })
}
