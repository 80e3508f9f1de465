//! Choreography terms and programs.

use std::collections::BTreeSet;
use std::sync::Arc;

use indexmap::IndexMap;

use crate::expr::{Consts, Expr, UpdateList};
use crate::state::{ModelKind, RoleId, StateError, StateValuation, VarDecl, VarLayout};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Branch {
    /// Explicit synchronisation label for this branch; derived from the
    /// interaction annotation when absent.
    pub label: Option<String>,
    pub weight: Expr,
    pub update: UpdateList,
    pub cont: ChorTerm,
}

impl Branch {
    pub fn new(weight: Expr, update: UpdateList, cont: ChorTerm) -> Self {
        Branch { label: None, weight, update, cont }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Interaction {
    pub label: Option<String>,
    pub initiator: RoleId,
    pub receivers: Vec<RoleId>,
    pub branches: Vec<Branch>,
}

impl Interaction {
    pub fn participants(&self) -> impl Iterator<Item = &RoleId> {
        std::iter::once(&self.initiator).chain(self.receivers.iter())
    }

    pub fn involves(&self, role: &RoleId) -> bool {
        self.participants().any(|r| r == role)
    }

    /// Concrete label of branch `j` (0-based): the explicit branch label, or
    /// `<annotation>_<j+1>`.
    pub fn branch_label(&self, j: usize) -> Option<String> {
        if let Some(l) = &self.branches[j].label {
            return Some(l.clone());
        }
        self.label.as_ref().map(|a| format!("{a}_{}", j + 1))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ChorTerm {
    Interaction(Interaction),
    Conditional { guard: Expr, at: RoleId, then_body: Box<ChorTerm>, else_body: Box<ChorTerm> },
    Call(String),
    Inact,
}

impl ChorTerm {
    pub fn interaction(initiator: &str, receivers: &[&str], branches: Vec<Branch>) -> Self {
        ChorTerm::Interaction(Interaction {
            label: None,
            initiator: initiator.into(),
            receivers: receivers.iter().map(|r| RoleId::from(*r)).collect(),
            branches,
        })
    }

    pub fn labelled(mut self, label: &str) -> Self {
        if let ChorTerm::Interaction(i) = &mut self {
            i.label = Some(label.to_string());
        }
        self
    }

    pub fn conditional(guard: Expr, at: &str, then_body: ChorTerm, else_body: ChorTerm) -> Self {
        ChorTerm::Conditional { guard, at: at.into(), then_body: Box::new(then_body), else_body: Box::new(else_body) }
    }

    pub fn call(name: &str) -> Self {
        ChorTerm::Call(name.to_string())
    }

    /// Pre-order walk over every subterm, including `self`.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a ChorTerm)) {
        f(self);
        match self {
            ChorTerm::Interaction(i) => i.branches.iter().for_each(|b| b.cont.walk(f)),
            ChorTerm::Conditional { then_body, else_body, .. } => {
                then_body.walk(f);
                else_body.walk(f);
            }
            ChorTerm::Call(_) | ChorTerm::Inact => {}
        }
    }

    pub fn walk_mut(&mut self, f: &mut impl FnMut(&mut ChorTerm)) {
        f(self);
        match self {
            ChorTerm::Interaction(i) => i.branches.iter_mut().for_each(|b| b.cont.walk_mut(f)),
            ChorTerm::Conditional { then_body, else_body, .. } => {
                then_body.walk_mut(f);
                else_body.walk_mut(f);
            }
            ChorTerm::Call(_) | ChorTerm::Inact => {}
        }
    }

    /// Every role mentioned anywhere in the term.
    pub fn roles(&self) -> BTreeSet<RoleId> {
        let mut out = BTreeSet::new();
        self.walk(&mut |t| match t {
            ChorTerm::Interaction(i) => out.extend(i.participants().cloned()),
            ChorTerm::Conditional { at, .. } => {
                out.insert(at.clone());
            }
            _ => {}
        });
        out
    }
}

/// Named choreography definitions, the `X = C` equations.
pub type Definitions = IndexMap<String, ChorTerm>;

#[derive(Debug, Clone, PartialEq)]
pub struct ChorProgram {
    pub kind: ModelKind,
    pub consts: Consts,
    pub roles: Vec<RoleId>,
    pub vars: Vec<VarDecl>,
    pub definitions: Definitions,
    pub main: String,
}

impl ChorProgram {
    pub fn var(&self, name: &str) -> Option<&VarDecl> {
        self.vars.iter().find(|v| v.name == name)
    }

    pub fn owner_of(&self, var: &str) -> Option<&RoleId> {
        self.var(var).map(|v| &v.owner)
    }

    pub fn layout(&self) -> Arc<VarLayout> {
        Arc::new(VarLayout::from_decls(&self.vars))
    }

    pub fn initial_state(&self) -> Result<StateValuation, StateError> {
        StateValuation::initial(self.layout(), &self.vars)
    }

    pub fn var_names(&self) -> Vec<String> {
        self.vars.iter().map(|v| v.name.clone()).collect()
    }

    /// Definitions with `main` first and the rest in declaration order. This
    /// is the order in which counter regions are allocated.
    pub fn ordered_definitions(&self) -> Vec<(&str, &ChorTerm)> {
        let mut out = Vec::with_capacity(self.definitions.len());
        if let Some(body) = self.definitions.get(&self.main) {
            out.push((self.main.as_str(), body));
        }
        for (name, body) in &self.definitions {
            if *name != self.main {
                out.push((name.as_str(), body));
            }
        }
        out
    }

    /// Every interaction in the program, with its definition name, in
    /// pre-order.
    pub fn interactions(&self) -> Vec<(&str, &Interaction)> {
        let mut out = Vec::new();
        for (name, body) in &self.definitions {
            body.walk(&mut |t| {
                if let ChorTerm::Interaction(i) = t {
                    out.push((name.as_str(), i));
                }
            });
        }
        out
    }
}
