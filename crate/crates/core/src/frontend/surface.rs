//! Surface programs: core programs plus role and variable families,
//! `foreach` clauses and `allsynch` blocks.

use crate::expr::{Expr, Op};
use crate::state::ModelKind;

/// `p` or `p[e]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoleRef {
    pub name: String,
    pub index: Option<Expr>,
}

impl RoleRef {
    pub fn plain(name: impl Into<String>) -> Self {
        RoleRef { name: name.into(), index: None }
    }
}

/// `role p;` or the family `role p[N];`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoleDecl {
    pub name: String,
    pub size: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SurfaceRange {
    Int { lo: Expr, hi: Expr },
    Bool,
}

/// `var x @ p : range init e;`. With `index`, either a family following its
/// owner's family (`var x[i] @ p[i]`) or an array of the given size owned
/// by one role (`var x[N] @ p`).
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceVar {
    pub name: String,
    pub index: Option<Expr>,
    pub owner: RoleRef,
    pub range: SurfaceRange,
    pub init: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub enum UpdateItem {
    Assign {
        target: String,
        index: Option<Expr>,
        value: Expr,
    },
    /// `foreach (k op bound) body`, instantiated for every family index `k`
    /// with `k op bound`.
    Foreach {
        binder: String,
        op: Op,
        bound: Expr,
        body: Vec<UpdateItem>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceBranch {
    pub label: Option<String>,
    pub weight: Expr,
    pub update: Vec<UpdateItem>,
    pub cont: SurfaceTerm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceInteraction {
    pub label: Option<String>,
    pub initiator: RoleRef,
    pub receivers: Vec<RoleRef>,
    pub branches: Vec<SurfaceBranch>,
}

/// One alternative of an `allsynch` block.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncEntry {
    pub role: RoleRef,
    pub guard: Expr,
    pub weight: Expr,
    pub update: Vec<UpdateItem>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SurfaceTerm {
    Interaction(SurfaceInteraction),
    Conditional { guard: Expr, at: RoleRef, then_body: Box<SurfaceTerm>, else_body: Box<SurfaceTerm> },
    Call(String),
    Inact,
    AllSynch { entries: Vec<SyncEntry>, cont: Box<SurfaceTerm> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceProgram {
    pub kind: ModelKind,
    pub consts: Vec<(String, Expr)>,
    pub roles: Vec<RoleDecl>,
    pub vars: Vec<SurfaceVar>,
    pub definitions: Vec<(String, SurfaceTerm)>,
    pub main: String,
    /// Sizes of the families removed by index expansion, by family name.
    pub expanded_families: Vec<(String, usize)>,
}
