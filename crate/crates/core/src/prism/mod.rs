//! The PRISM fragment: modules of guarded probabilistic commands composed
//! in alphabetised parallel.

pub mod emit;
mod semantics;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::expr::{Consts, Expr, Op, UpdateList};
use crate::state::{ModelKind, RoleId, StateError, StateValuation, VarDecl, VarLayout};

pub use emit::{emit, extension, EmitConfig, EmitError};
pub use semantics::{
    build_network_chain, build_network_chain_with, mu, step_network, MassAnomaly, NetworkChain, NetworkSystem,
    Scheduler, StepResult,
};

/// A rate or probability, kept alongside the expression it came from so
/// emission can print symbolic weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Weight {
    pub value: f64,
    pub expr: Expr,
}

impl Weight {
    pub fn new(value: f64, expr: Expr) -> Self {
        Weight { value, expr }
    }

    pub fn literal(value: f64) -> Self {
        Weight { value, expr: literal_expr(value) }
    }

    pub fn one() -> Self {
        Weight::literal(1.0)
    }

    pub fn is_one(&self) -> bool {
        self.value == 1.0
    }

    pub fn product(&self, other: &Weight) -> Weight {
        let expr = if self.is_one() && self.expr.free_vars().is_empty() {
            other.expr.clone()
        } else if other.is_one() && other.expr.free_vars().is_empty() {
            self.expr.clone()
        } else {
            Expr::bin(Op::Mul, self.expr.clone(), other.expr.clone())
        };
        Weight { value: self.value * other.value, expr }
    }
}

fn literal_expr(v: f64) -> Expr {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        Expr::int(v as i64)
    } else {
        Expr::real(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrismCommand {
    /// `None` is the silent action.
    pub label: Option<String>,
    pub guard: Expr,
    pub branches: Vec<(Weight, UpdateList)>,
}

impl PrismCommand {
    pub fn is_silent(&self) -> bool {
        self.label.is_none()
    }
}

impl fmt::Display for PrismCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {} -> ", self.label.as_deref().unwrap_or(""), self.guard)?;
        for (i, (w, u)) in self.branches.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{} : {}", w.expr, u)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrismModule {
    pub name: RoleId,
    pub vars: Vec<VarDecl>,
    pub commands: Vec<PrismCommand>,
}

impl PrismModule {
    pub fn labels(&self) -> BTreeSet<String> {
        self.commands.iter().filter_map(|c| c.label.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PrismNetwork {
    Nil,
    Mod(PrismModule),
    Par { sync: BTreeSet<String>, left: Box<PrismNetwork>, right: Box<PrismNetwork> },
}

impl PrismNetwork {
    pub fn par(sync: BTreeSet<String>, left: PrismNetwork, right: PrismNetwork) -> Self {
        PrismNetwork::Par { sync, left: Box::new(left), right: Box::new(right) }
    }

    /// Modules in left-to-right order.
    pub fn modules(&self) -> Vec<&PrismModule> {
        let mut out = Vec::new();
        fn go<'a>(n: &'a PrismNetwork, out: &mut Vec<&'a PrismModule>) {
            match n {
                PrismNetwork::Nil => {}
                PrismNetwork::Mod(m) => out.push(m),
                PrismNetwork::Par { left, right, .. } => {
                    go(left, out);
                    go(right, out);
                }
            }
        }
        go(self, &mut out);
        out
    }

    pub fn module(&self, name: &str) -> Option<&PrismModule> {
        self.modules().into_iter().find(|m| m.name.as_str() == name)
    }

    pub fn vars(&self) -> Vec<VarDecl> {
        self.modules().iter().flat_map(|m| m.vars.iter().cloned()).collect()
    }

    pub fn layout(&self) -> Arc<VarLayout> {
        Arc::new(VarLayout::from_decls(&self.vars()))
    }

    pub fn initial_state(&self) -> Result<StateValuation, StateError> {
        StateValuation::initial(self.layout(), &self.vars())
    }
}

/// Labels occurring on any command of the network.
pub fn alphabet(net: &PrismNetwork) -> BTreeSet<String> {
    net.modules().iter().flat_map(|m| m.labels()).collect()
}

fn conjoin(a: &Expr, b: &Expr) -> Expr {
    if a.is_true_literal() {
        b.clone()
    } else if b.is_true_literal() {
        a.clone()
    } else {
        Expr::and(a.clone(), b.clone())
    }
}

/// Commands derivable from the network: module commands, propagated
/// through `Par` unless their label is synchronised, and synchronised pairs
/// combined by guard conjunction and branch product.
pub fn derive_commands(net: &PrismNetwork) -> Vec<PrismCommand> {
    match net {
        PrismNetwork::Nil => Vec::new(),
        PrismNetwork::Mod(m) => m.commands.clone(),
        PrismNetwork::Par { sync, left, right } => {
            let l = derive_commands(left);
            let r = derive_commands(right);
            let synced = |c: &PrismCommand| c.label.as_ref().is_some_and(|a| sync.contains(a));
            let mut out: Vec<PrismCommand> = l.iter().filter(|c| !synced(c)).cloned().collect();
            out.extend(r.iter().filter(|c| !synced(c)).cloned());
            for a in sync {
                for cl in l.iter().filter(|c| c.label.as_ref() == Some(a)) {
                    for cr in r.iter().filter(|c| c.label.as_ref() == Some(a)) {
                        let mut branches = Vec::with_capacity(cl.branches.len() * cr.branches.len());
                        for (wl, ul) in &cl.branches {
                            for (wr, ur) in &cr.branches {
                                branches.push((wl.product(wr), ul.concat(ur)));
                            }
                        }
                        out.push(PrismCommand {
                            label: Some(a.clone()),
                            guard: conjoin(&cl.guard, &cr.guard),
                            branches,
                        });
                    }
                }
            }
            out
        }
    }
}

/// Left-fold modules into a network, synchronising each new module on the
/// labels it shares with what has been composed so far.
pub fn compose_left_fold(modules: Vec<PrismModule>) -> PrismNetwork {
    let mut it = modules.into_iter();
    let Some(first) = it.next() else {
        return PrismNetwork::Nil;
    };
    let mut acc = PrismNetwork::Mod(first);
    for m in it {
        let next = PrismNetwork::Mod(m);
        let sync = alphabet(&acc).intersection(&alphabet(&next)).cloned().collect();
        acc = PrismNetwork::par(sync, acc, next);
    }
    acc
}

/// A network with the declarations needed to run it.
#[derive(Debug, Clone, PartialEq)]
pub struct PrismModel {
    pub kind: ModelKind,
    pub consts: Consts,
    pub network: PrismNetwork,
}
