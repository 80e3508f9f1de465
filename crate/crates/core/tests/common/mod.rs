//! Shared test helpers: fixtures and a generator of random strongly
//! connected choreographies.

#![allow(dead_code)]

pub mod prism_reparse;

use std::path::PathBuf;

use chorprism::chain::MarkovChain;

use chorprism::chor::{check_well_formed, s_conn, Branch, ChorProgram, ChorTerm, Definitions};
use chorprism::expr::{Assign, Consts, Expr, Op, UpdateList};
use chorprism::frontend::{auto_annotate, AnnotationScheme};
use chorprism::state::{ModelKind, RoleId, VarDecl};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

const ROLES: [&str; 3] = ["p", "q", "r"];

fn var_of(role: &str) -> String {
    format!("v{role}")
}

struct Gen<'a> {
    rng: &'a mut ChaCha8Rng,
    kind: ModelKind,
    roles: Vec<&'static str>,
    defs: Vec<String>,
}

impl Gen<'_> {
    fn update_for(&mut self, role: &str) -> Option<Assign> {
        let v = var_of(role);
        let e = match self.rng.gen_range(0..5) {
            0 => return None,
            1 => Expr::int(self.rng.gen_range(0..=3)),
            2 => Expr::app(Op::Min, vec![Expr::bin(Op::Add, Expr::var(&v), Expr::int(1)), Expr::int(3)]),
            3 => Expr::app(Op::Max, vec![Expr::bin(Op::Sub, Expr::var(&v), Expr::int(1)), Expr::int(0)]),
            _ => {
                // Read another role's variable; it is never assigned before.
                let other = *self.roles.choose(self.rng).unwrap();
                Expr::app(Op::Mod, vec![Expr::bin(Op::Add, Expr::var(var_of(other)), Expr::int(1)), Expr::int(4)])
            }
        };
        Some(Assign::new(v, e))
    }

    fn weights(&mut self, n: usize) -> Vec<f64> {
        match self.kind {
            ModelKind::Ctmc => (0..n).map(|_| *[0.5, 1.0, 2.0, 3.0].choose(self.rng).unwrap()).collect(),
            ModelKind::Dtmc => match n {
                1 => vec![1.0],
                _ => {
                    let a = *[0.25, 0.4, 0.5, 0.7].choose(self.rng).unwrap();
                    vec![a, 1.0 - a]
                }
            },
        }
    }

    fn term(&mut self, depth: usize) -> ChorTerm {
        let leaf = depth == 0 || self.rng.gen_bool(0.15);
        if leaf {
            return if self.rng.gen_bool(0.75) {
                ChorTerm::Call(self.defs.choose(self.rng).unwrap().clone())
            } else {
                ChorTerm::Inact
            };
        }
        if self.rng.gen_bool(0.2) {
            let at = *self.roles.choose(self.rng).unwrap();
            let watched = *self.roles.choose(self.rng).unwrap();
            let guard = Expr::bin(Op::Lt, Expr::var(var_of(watched)), Expr::int(self.rng.gen_range(1..=3)));
            let t = self.term(depth - 1);
            let e = self.term(depth - 1);
            return ChorTerm::conditional(guard, at, t, e);
        }
        let mut roles = self.roles.clone();
        roles.shuffle(self.rng);
        let nrecv = self.rng.gen_range(1..roles.len());
        let initiator = roles[0];
        let receivers: Vec<&str> = roles[1..=nrecv].to_vec();
        let n = self.rng.gen_range(1..=2);
        let ws = self.weights(n);
        let branches = ws
            .into_iter()
            .map(|w| {
                let mut assigns = Vec::new();
                for r in std::iter::once(initiator).chain(receivers.iter().copied()) {
                    if let Some(a) = self.update_for(r) {
                        assigns.push(a);
                    }
                }
                // Reads of other roles' variables must not follow their writes.
                let written: Vec<String> = assigns.iter().map(|a| a.target.clone()).collect();
                let mut ok = Vec::new();
                for a in assigns {
                    let reads_written =
                        a.value.free_vars().iter().any(|v| written.iter().any(|t| t == v && *t != a.target));
                    if !reads_written {
                        ok.push(a);
                    }
                }
                let cont = self.term(depth - 1);
                Branch::new(Expr::real(w), UpdateList::new(ok), cont)
            })
            .collect();
        ChorTerm::interaction(initiator, &receivers, branches)
    }
}

fn reaches_interaction(prog: &ChorProgram) -> bool {
    let mut seen = vec![prog.main.clone()];
    let mut i = 0;
    while i < seen.len() {
        let mut found = false;
        let mut calls = Vec::new();
        prog.definitions[&seen[i]].walk(&mut |t| match t {
            ChorTerm::Interaction(_) => found = true,
            ChorTerm::Call(x) => calls.push(x.clone()),
            _ => {}
        });
        if found {
            return true;
        }
        for c in calls {
            if !seen.contains(&c) {
                seen.push(c);
            }
        }
        i += 1;
    }
    false
}

/// A random annotated, well-formed, strongly connected program with at
/// most three roles, two branches per interaction, two definitions and
/// depth four, over variables in `[0..3]`, whose main definition reaches an
/// interaction.
pub fn random_program(seed: u64, kind: ModelKind) -> ChorProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let nroles = rng.gen_range(2..=3);
        let ndefs = rng.gen_range(1..=2);
        let roles: Vec<&'static str> = ROLES[..nroles].to_vec();
        let defs: Vec<String> = (0..ndefs).map(|i| format!("X{i}")).collect();
        let mut g = Gen { rng: &mut rng, kind, roles: roles.clone(), defs: defs.clone() };
        let mut definitions = Definitions::new();
        for d in &defs {
            let depth = g.rng.gen_range(1..=4);
            definitions.insert(d.clone(), g.term(depth));
        }
        let prog = ChorProgram {
            kind,
            consts: Consts::new(),
            roles: roles.iter().map(|r| RoleId::from(*r)).collect(),
            vars: roles.iter().map(|r| VarDecl::int(&var_of(r), r, 0, 3, 0)).collect(),
            definitions,
            main: "X0".into(),
        };
        if !reaches_interaction(&prog) || check_well_formed(&prog).is_err() {
            continue;
        }
        let connected = prog.definitions.values().all(|b| s_conn(b, &prog.definitions).unwrap_or(false));
        if !connected {
            continue;
        }
        return auto_annotate(&prog, AnnotationScheme::Deterministic);
    }
}

/// Chains equal up to weight rounding: same states in the same order and
/// the same transitions with weights within a relative `tol`.
pub fn chains_match(a: &MarkovChain, b: &MarkovChain, tol: f64) -> Result<(), String> {
    if a.kind != b.kind || a.len() != b.len() || a.initial != b.initial {
        return Err(format!("shape differs: {} vs {} states", a.len(), b.len()));
    }
    for i in 0..a.len() {
        if a.states[i].valuation != b.states[i].valuation {
            return Err(format!("state {i}: {} vs {}", a.states[i].valuation.render(), b.states[i].valuation.render()));
        }
        let (sa, sb) = (a.successors(i), b.successors(i));
        if sa.len() != sb.len() {
            return Err(format!("state {i}: {} vs {} successors", sa.len(), sb.len()));
        }
        for (&(da, wa), &(db, wb)) in sa.iter().zip(sb) {
            if da != db || (wa - wb).abs() > tol * wa.abs().max(wb.abs()).max(1.0) {
                return Err(format!("state {i}: ({da}, {wa}) vs ({db}, {wb})"));
            }
        }
    }
    Ok(())
}
