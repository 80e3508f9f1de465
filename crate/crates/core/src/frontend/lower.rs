//! Surface programs without families, `foreach` or `allsynch` to core
//! choreographies.

use super::expand::const_env;
use super::surface::*;
use super::{desugar_allsynch, expand_foreach, expand_indices, parse, FrontendError};
use crate::chor::{Branch, ChorProgram, ChorTerm, Definitions, Interaction};
use crate::expr::{eval_const, Assign, Consts, Expr, UpdateList, Value};
use crate::state::{RoleId, VarDecl, VarRange};

/// Parse and desugar a source text into a core program. Interactions keep
/// the labels written in the source; see
/// [`auto_annotate`](super::auto_annotate) for the rest.
pub fn compile_source(src: &str) -> Result<ChorProgram, FrontendError> {
    let surface = parse(src)?;
    let expanded = expand_foreach(&expand_indices(&surface)?)?;
    lower(&desugar_allsynch(&expanded))
}

pub fn lower(prog: &SurfaceProgram) -> Result<ChorProgram, FrontendError> {
    let consts = const_env(prog)?;
    let mut roles = Vec::with_capacity(prog.roles.len());
    for r in &prog.roles {
        if r.size.is_some() {
            return Err(FrontendError::Unexpanded(format!("role family `{}`", r.name)));
        }
        roles.push(RoleId::new(&r.name));
    }
    let vars = prog.vars.iter().map(|v| lower_var(v, &consts)).collect::<Result<_, _>>()?;
    let mut definitions = Definitions::new();
    for (name, body) in &prog.definitions {
        if definitions.insert(name.clone(), lower_term(body)?).is_some() {
            return Err(FrontendError::BadDeclaration(format!("definition `{name}` is declared twice")));
        }
    }
    Ok(ChorProgram { kind: prog.kind, consts, roles, vars, definitions, main: prog.main.clone() })
}

fn lower_var(v: &SurfaceVar, consts: &Consts) -> Result<VarDecl, FrontendError> {
    if v.index.is_some() {
        return Err(FrontendError::Unexpanded(format!("variable family `{}`", v.name)));
    }
    let owner = plain_role(&v.owner)?;
    let int = |e: &Expr| match eval_const(e, consts) {
        Ok(Value::Int(i)) => Ok(i),
        _ => Err(FrontendError::BadDeclaration(format!("range of `{}` needs integer constants, got `{e}`", v.name))),
    };
    let range = match &v.range {
        SurfaceRange::Bool => VarRange::Bool,
        SurfaceRange::Int { lo, hi } => VarRange::Int { lo: int(lo)?, hi: int(hi)? },
    };
    let init = eval_const(&v.init, consts).map_err(|_| {
        FrontendError::BadDeclaration(format!("initial value of `{}` must be constant, got `{}`", v.name, v.init))
    })?;
    if !range.contains(init) {
        return Err(FrontendError::BadDeclaration(format!("initial value {init} of `{}` is outside {range}", v.name)));
    }
    Ok(VarDecl { name: v.name.clone(), owner, range, init })
}

fn plain_role(r: &RoleRef) -> Result<RoleId, FrontendError> {
    match &r.index {
        None => Ok(RoleId::new(&r.name)),
        Some(i) => Err(FrontendError::Unexpanded(format!("role reference `{}[{i}]`", r.name))),
    }
}

fn plain_expr(e: &Expr) -> Result<Expr, FrontendError> {
    if e.contains_indexed() {
        return Err(FrontendError::Unexpanded(format!("indexed reference in `{e}`")));
    }
    Ok(e.clone())
}

fn lower_updates(items: &[UpdateItem]) -> Result<UpdateList, FrontendError> {
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        match item {
            UpdateItem::Assign { target, index: None, value } => out.push(Assign::new(target, plain_expr(value)?)),
            UpdateItem::Assign { target, index: Some(i), .. } => {
                return Err(FrontendError::Unexpanded(format!("indexed update `{target}[{i}]'`")))
            }
            UpdateItem::Foreach { binder, .. } => {
                return Err(FrontendError::Unexpanded(format!("foreach over `{binder}`")))
            }
        }
    }
    Ok(UpdateList::new(out))
}

fn lower_term(t: &SurfaceTerm) -> Result<ChorTerm, FrontendError> {
    Ok(match t {
        SurfaceTerm::Inact => ChorTerm::Inact,
        SurfaceTerm::Call(x) => ChorTerm::Call(x.clone()),
        SurfaceTerm::Conditional { guard, at, then_body, else_body } => ChorTerm::Conditional {
            guard: plain_expr(guard)?,
            at: plain_role(at)?,
            then_body: Box::new(lower_term(then_body)?),
            else_body: Box::new(lower_term(else_body)?),
        },
        SurfaceTerm::AllSynch { .. } => return Err(FrontendError::Unexpanded("allsynch block".into())),
        SurfaceTerm::Interaction(i) => ChorTerm::Interaction(Interaction {
            label: i.label.clone(),
            initiator: plain_role(&i.initiator)?,
            receivers: i.receivers.iter().map(plain_role).collect::<Result<_, _>>()?,
            branches: i
                .branches
                .iter()
                .map(|b| {
                    Ok(Branch {
                        label: b.label.clone(),
                        weight: plain_expr(&b.weight)?,
                        update: lower_updates(&b.update)?,
                        cont: lower_term(&b.cont)?,
                    })
                })
                .collect::<Result<_, FrontendError>>()?,
        }),
    })
}
