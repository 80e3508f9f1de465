//! `allsynch` blocks as nested conditionals over one multiparty interaction.

use super::surface::*;
use crate::expr::{Expr, Op, Value};

/// Replace every `allsynch` block. Entries are grouped by role in order of
/// first appearance; each role's alternatives become an if/else chain at
/// that role, tried in source order. Every combination of alternatives is a
/// single-branch interaction initiated by the first role, weighted by the
/// product of the chosen weights and applying all their updates.
/// Combinations with a failing guard end the choreography.
pub fn desugar_allsynch(prog: &SurfaceProgram) -> SurfaceProgram {
    SurfaceProgram {
        definitions: prog.definitions.iter().map(|(n, t)| (n.clone(), desugar_term(t))).collect(),
        ..prog.clone()
    }
}

fn desugar_term(t: &SurfaceTerm) -> SurfaceTerm {
    match t {
        SurfaceTerm::Inact | SurfaceTerm::Call(_) => t.clone(),
        SurfaceTerm::Conditional { guard, at, then_body, else_body } => SurfaceTerm::Conditional {
            guard: guard.clone(),
            at: at.clone(),
            then_body: Box::new(desugar_term(then_body)),
            else_body: Box::new(desugar_term(else_body)),
        },
        SurfaceTerm::Interaction(i) => SurfaceTerm::Interaction(SurfaceInteraction {
            branches: i.branches.iter().map(|b| SurfaceBranch { cont: desugar_term(&b.cont), ..b.clone() }).collect(),
            ..i.clone()
        }),
        SurfaceTerm::AllSynch { entries, cont } => {
            let mut groups: Vec<(&RoleRef, Vec<&SyncEntry>)> = Vec::new();
            for e in entries {
                match groups.iter_mut().find(|(r, _)| **r == e.role) {
                    Some((_, alts)) => alts.push(e),
                    None => groups.push((&e.role, vec![e])),
                }
            }
            let cont = desugar_term(cont);
            choose(&groups, &mut Vec::new(), &cont)
        }
    }
}

fn choose<'a>(
    groups: &[(&RoleRef, Vec<&'a SyncEntry>)],
    chosen: &mut Vec<&'a SyncEntry>,
    cont: &SurfaceTerm,
) -> SurfaceTerm {
    let Some(((role, alts), rest)) = groups.split_first() else {
        return leaf(chosen, cont);
    };
    let mut out = SurfaceTerm::Inact;
    // Build the chain back to front so the first alternative is tried first.
    let mut reachable = alts.len();
    if let Some(k) = alts.iter().position(|a| a.guard.is_true_literal()) {
        reachable = k + 1;
    }
    for alt in alts[..reachable].iter().rev() {
        chosen.push(alt);
        let body = choose(rest, chosen, cont);
        chosen.pop();
        out = if alt.guard.is_true_literal() {
            body
        } else {
            SurfaceTerm::Conditional {
                guard: alt.guard.clone(),
                at: (*role).clone(),
                then_body: Box::new(body),
                else_body: Box::new(out),
            }
        };
    }
    out
}

fn leaf(chosen: &[&SyncEntry], cont: &SurfaceTerm) -> SurfaceTerm {
    SurfaceTerm::Interaction(SurfaceInteraction {
        label: None,
        initiator: chosen[0].role.clone(),
        receivers: chosen[1..].iter().map(|e| e.role.clone()).collect(),
        branches: vec![SurfaceBranch {
            label: None,
            weight: product(chosen.iter().map(|e| &e.weight)),
            update: chosen.iter().flat_map(|e| e.update.iter().cloned()).collect(),
            cont: cont.clone(),
        }],
    })
}

/// Product with literal factors folded and unit factors dropped.
fn product<'a>(factors: impl Iterator<Item = &'a Expr>) -> Expr {
    let (mut int, mut real, mut any_real) = (1i64, 1f64, false);
    let mut symbolic = Vec::new();
    for f in factors {
        match f {
            Expr::Lit(Value::Int(i)) => int = int.saturating_mul(*i),
            Expr::Lit(Value::Real(r)) => {
                real *= r;
                any_real = true;
            }
            e => symbolic.push(e.clone()),
        }
    }
    let lit = if any_real { Expr::real(real * int as f64) } else { Expr::int(int) };
    let is_one = matches!(lit, Expr::Lit(Value::Int(1))) || matches!(lit, Expr::Lit(Value::Real(r)) if r == 1.0);
    let mut acc: Option<Expr> = if is_one { None } else { Some(lit) };
    for s in symbolic {
        acc = Some(match acc {
            None => s,
            Some(a) => Expr::bin(Op::Mul, a, s),
        });
    }
    acc.unwrap_or_else(|| Expr::int(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_expr;

    fn e(s: &str) -> Expr {
        parse_expr(s).unwrap()
    }

    #[test]
    fn product_folds() {
        assert_eq!(product([e("2"), e("1"), e("5")].iter()), e("10"));
        assert_eq!(product([e("1"), e("1")].iter()), e("1"));
        assert_eq!(product([e("0.5"), e("2"), e("r")].iter()), e("r"));
        assert_eq!(product([e("0.5"), e("3"), e("r")].iter()), e("1.5 * r"));
        assert_eq!(product([e("1"), e("r")].iter()), e("r"));
    }
}
