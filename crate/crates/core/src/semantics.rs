//! Operational semantics of choreographies.

use std::collections::HashMap;

use crate::chain::{explore, ChainError, ChainState, MarkovChain};
use crate::chor::{ChorProgram, ChorTerm};
use crate::expr::{eval_weight, eval_with, Consts, EvalError, Expr, Value};
use crate::state::{apply_update, StateValuation};

pub fn eval(expr: &Expr, state: &StateValuation, consts: &Consts) -> Result<Value, EvalError> {
    eval_with(expr, &state.lookup(consts))
}

/// A choreography configuration `(S, C)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChorConfig {
    pub state: StateValuation,
    pub term: ChorTerm,
}

fn guard_holds(guard: &Expr, state: &StateValuation, consts: &Consts) -> Result<bool, EvalError> {
    eval(guard, state, consts)?
        .as_bool()
        .ok_or_else(|| EvalError::TypeMismatch { op: "if", detail: format!("guard `{guard}` is not boolean") })
}

/// One-step successors of `config`, in branch order.
pub fn step(config: &ChorConfig, prog: &ChorProgram) -> Result<Vec<(f64, ChorConfig)>, ChainError> {
    let s = &config.state;
    match &config.term {
        ChorTerm::Inact => Ok(Vec::new()),
        ChorTerm::Call(x) => {
            let body = prog.definitions.get(x).ok_or_else(|| ChainError::UndefinedDefinition(x.clone()))?;
            Ok(vec![(1.0, ChorConfig { state: s.clone(), term: body.clone() })])
        }
        ChorTerm::Conditional { guard, then_body, else_body, .. } => {
            let next = if guard_holds(guard, s, &prog.consts)? { then_body } else { else_body };
            Ok(vec![(1.0, ChorConfig { state: s.clone(), term: (**next).clone() })])
        }
        ChorTerm::Interaction(i) => i
            .branches
            .iter()
            .map(|b| {
                let w = eval_weight(&b.weight, &prog.consts)?;
                let state = apply_update(s, &b.update, &prog.consts)?;
                Ok((w, ChorConfig { state, term: b.cont.clone() }))
            })
            .collect(),
    }
}

/// Structurally distinct subterms of a program, each with its successor
/// terms precomputed so exploration can key states on small integers.
struct TermTable<'p> {
    terms: Vec<&'p ChorTerm>,
    index: HashMap<&'p ChorTerm, usize>,
    tags: Vec<String>,
}

impl<'p> TermTable<'p> {
    fn build(prog: &'p ChorProgram) -> Self {
        let mut table = TermTable { terms: Vec::new(), index: HashMap::new(), tags: Vec::new() };
        for (name, body) in prog.ordered_definitions() {
            let mut k = 0;
            body.walk(&mut |t| {
                let tag = match t {
                    ChorTerm::Call(x) => format!("call {x}"),
                    ChorTerm::Inact => "end".to_string(),
                    ChorTerm::Conditional { .. } if k == 0 => format!("if {name}"),
                    ChorTerm::Conditional { .. } => format!("if {name}#{k}"),
                    _ if k == 0 => name.to_string(),
                    _ => format!("{name}#{k}"),
                };
                k += 1;
                table.add(t, tag);
            });
        }
        table
    }

    fn add(&mut self, t: &'p ChorTerm, tag: String) {
        if !self.index.contains_key(t) {
            self.index.insert(t, self.terms.len());
            self.terms.push(t);
            self.tags.push(tag);
        }
    }

    fn id(&self, t: &ChorTerm) -> usize {
        self.index[t]
    }
}

/// Whether a state tagged `tag` by [`build_chain`] takes an administrative
/// step: a call unfolding or a conditional.
pub fn is_administrative(tag: &str) -> bool {
    tag.starts_with("call ") || tag.starts_with("if ")
}

/// Reachable chain of `prog` from `init` and the body of `main`.
pub fn build_chain(prog: &ChorProgram, init: StateValuation, max_states: usize) -> Result<MarkovChain, ChainError> {
    let root = prog.definitions.get(&prog.main).ok_or_else(|| ChainError::UndefinedDefinition(prog.main.clone()))?;
    let table = TermTable::build(prog);
    let consts = &prog.consts;

    explore(
        prog.kind,
        (init, table.id(root)),
        max_states,
        |(s, t)| ChainState { valuation: s.clone(), tag: table.tags[*t].clone() },
        |(s, t)| {
            let out = match table.terms[*t] {
                ChorTerm::Inact => Vec::new(),
                ChorTerm::Call(x) => {
                    let body = prog.definitions.get(x).ok_or_else(|| ChainError::UndefinedDefinition(x.clone()))?;
                    vec![(1.0, (s.clone(), table.id(body)))]
                }
                ChorTerm::Conditional { guard, then_body, else_body, .. } => {
                    let next = if guard_holds(guard, s, consts)? { then_body } else { else_body };
                    vec![(1.0, (s.clone(), table.id(next)))]
                }
                ChorTerm::Interaction(i) => {
                    let mut out = Vec::with_capacity(i.branches.len());
                    for b in &i.branches {
                        let w = eval_weight(&b.weight, consts)?;
                        if w <= 0.0 {
                            continue;
                        }
                        out.push((w, (apply_update(s, &b.update, consts)?, table.id(&b.cont))));
                    }
                    out
                }
            };
            Ok(out)
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chor::Branch;
    use crate::expr::{Assign, Op, UpdateList};
    use crate::state::{ModelKind, VarDecl};

    fn example_two(kind: ModelKind, l1: f64, l2: f64) -> ChorProgram {
        let upd =
            |x: i64, y: i64| UpdateList::new(vec![Assign::new("x", Expr::int(x)), Assign::new("y", Expr::int(y))]);
        let body = ChorTerm::interaction(
            "p",
            &["q"],
            vec![
                Branch::new(Expr::real(l1), upd(1, 2), ChorTerm::call("C")),
                Branch::new(Expr::real(l2), upd(3, 1), ChorTerm::call("C")),
            ],
        );
        ChorProgram {
            kind,
            consts: Consts::new(),
            roles: vec!["p".into(), "q".into()],
            vars: vec![VarDecl::int("x", "p", 0, 3, 0), VarDecl::int("y", "q", 0, 2, 0)],
            definitions: [("C".to_string(), body)].into_iter().collect(),
            main: "C".into(),
        }
    }

    #[test]
    fn eval_examples() {
        let p = example_two(ModelKind::Ctmc, 2.0, 3.0);
        let s = p.initial_state().unwrap().with("x", Value::Int(2)).unwrap();
        let e = Expr::bin(Op::Add, Expr::var("x"), Expr::int(1));
        assert_eq!(eval(&e, &s, &p.consts), Ok(Value::Int(3)));
        let m = Expr::app(Op::Mod, vec![Expr::int(7), Expr::int(3)]);
        assert_eq!(eval(&m, &s, &p.consts), Ok(Value::Int(1)));
    }

    #[test]
    fn step_rules() {
        let p = example_two(ModelKind::Ctmc, 2.0, 3.0);
        let s = p.initial_state().unwrap();
        let inact = ChorConfig { state: s.clone(), term: ChorTerm::Inact };
        assert!(step(&inact, &p).unwrap().is_empty());

        let call = ChorConfig { state: s.clone(), term: ChorTerm::call("C") };
        let out = step(&call, &p).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].0, 1.0);
        assert_eq!(out[0].1.term, p.definitions["C"]);

        let out = step(&out[0].1, &p).unwrap();
        let summary: Vec<(f64, String)> = out.iter().map(|(w, c)| (*w, c.state.render())).collect();
        assert_eq!(summary, vec![(2.0, "x=1,y=2".to_string()), (3.0, "x=3,y=1".to_string())]);
    }

    #[test]
    fn example_two_chain() {
        let p = example_two(ModelKind::Ctmc, 2.0, 3.0);
        let c = build_chain(&p, p.initial_state().unwrap(), 1000).unwrap();
        // (S0,body) then (S1,C) (S2,C) (S1,body) (S2,body)
        assert_eq!(c.len(), 5);
        let distinct: std::collections::HashSet<String> = c.states.iter().map(|s| s.valuation.render()).collect();
        assert_eq!(distinct.len(), 3);
        for (i, st) in c.states.iter().enumerate() {
            if st.tag == "call C" {
                assert_eq!(c.successors(i).len(), 1);
            } else {
                let mut ws: Vec<f64> = c.successors(i).iter().map(|(_, w)| *w).collect();
                ws.sort_by(f64::total_cmp);
                assert_eq!(ws, vec![2.0, 3.0]);
            }
        }
    }

    #[test]
    fn inact_main_has_single_state() {
        let mut p = example_two(ModelKind::Ctmc, 2.0, 3.0);
        p.definitions.insert("C".into(), ChorTerm::Inact);
        let c = build_chain(&p, p.initial_state().unwrap(), 10).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.transition_count(), 0);
    }

    #[test]
    fn deterministic_numbering() {
        let p = example_two(ModelKind::Dtmc, 0.4, 0.6);
        let a = build_chain(&p, p.initial_state().unwrap(), 100).unwrap();
        let b = build_chain(&p, p.initial_state().unwrap(), 100).unwrap();
        assert_eq!(a, b);
        for i in 0..a.len() {
            assert!((a.out_mass(i) - 1.0).abs() < 1e-9);
        }
    }
}
