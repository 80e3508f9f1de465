//! Roles, variable declarations and state valuations.

use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use thiserror::Error;

use crate::expr::{eval_with, Consts, EvalError, UpdateList, Value};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RoleId(pub String);

impl RoleId {
    pub fn new(name: impl Into<String>) -> Self {
        RoleId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RoleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for RoleId {
    fn from(s: &str) -> Self {
        RoleId(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Dtmc,
    Ctmc,
}

impl ModelKind {
    pub fn keyword(self) -> &'static str {
        match self {
            ModelKind::Dtmc => "dtmc",
            ModelKind::Ctmc => "ctmc",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarRange {
    Int { lo: i64, hi: i64 },
    Bool,
}

impl VarRange {
    pub fn contains(&self, v: Value) -> bool {
        match (self, v) {
            (VarRange::Int { lo, hi }, Value::Int(i)) => *lo <= i && i <= *hi,
            (VarRange::Bool, Value::Bool(_)) => true,
            _ => false,
        }
    }
}

impl fmt::Display for VarRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarRange::Int { lo, hi } => write!(f, "[{lo}..{hi}]"),
            VarRange::Bool => write!(f, "bool"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VarDecl {
    pub name: String,
    pub owner: RoleId,
    pub range: VarRange,
    pub init: Value,
}

impl VarDecl {
    pub fn int(name: &str, owner: &str, lo: i64, hi: i64, init: i64) -> Self {
        VarDecl { name: name.into(), owner: owner.into(), range: VarRange::Int { lo, hi }, init: Value::Int(init) }
    }
}

/// Variable order and ranges shared by all valuations of one model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarLayout {
    names: Vec<String>,
    ranges: Vec<VarRange>,
    index: HashMap<String, usize>,
}

impl VarLayout {
    pub fn new<'a>(vars: impl IntoIterator<Item = (&'a str, VarRange)>) -> Self {
        let mut layout = VarLayout { names: Vec::new(), ranges: Vec::new(), index: HashMap::new() };
        for (name, range) in vars {
            layout.index.insert(name.to_string(), layout.names.len());
            layout.names.push(name.to_string());
            layout.ranges.push(range);
        }
        layout
    }

    pub fn from_decls(decls: &[VarDecl]) -> Self {
        VarLayout::new(decls.iter().map(|d| (d.name.as_str(), d.range)))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn range(&self, i: usize) -> VarRange {
        self.ranges[i]
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("{0}")]
    Eval(#[from] EvalError),
    #[error("value {value} is outside the range {range} of `{var}`")]
    RangeViolation { var: String, value: Value, range: VarRange },
    #[error("assignment to undeclared variable `{0}`")]
    UndeclaredTarget(String),
}

/// Total map from the declared variables to their values.
#[derive(Clone)]
pub struct StateValuation {
    layout: Arc<VarLayout>,
    values: Vec<Value>,
}

impl StateValuation {
    /// Build a valuation, checking every value against its range.
    pub fn new(layout: Arc<VarLayout>, values: Vec<Value>) -> Result<Self, StateError> {
        assert_eq!(layout.len(), values.len(), "valuation does not match its layout");
        for (i, v) in values.iter().enumerate() {
            if !layout.range(i).contains(*v) {
                return Err(StateError::RangeViolation {
                    var: layout.names[i].clone(),
                    value: *v,
                    range: layout.range(i),
                });
            }
        }
        Ok(StateValuation { layout, values })
    }

    pub fn initial(layout: Arc<VarLayout>, decls: &[VarDecl]) -> Result<Self, StateError> {
        let mut values = vec![Value::Int(0); layout.len()];
        for d in decls {
            if let Some(i) = layout.index_of(&d.name) {
                values[i] = d.init;
            }
        }
        StateValuation::new(layout, values)
    }

    pub fn layout(&self) -> &Arc<VarLayout> {
        &self.layout
    }

    pub fn values(&self) -> &[Value] {
        &self.values
    }

    pub fn get(&self, name: &str) -> Option<Value> {
        self.layout.index_of(name).map(|i| self.values[i])
    }

    /// Copy with `name` overwritten; the value is range-checked.
    pub fn with(&self, name: &str, value: Value) -> Result<Self, StateError> {
        let i = self.layout.index_of(name).ok_or_else(|| StateError::UndeclaredTarget(name.into()))?;
        let range = self.layout.range(i);
        let value = coerce(value, range);
        if !range.contains(value) {
            return Err(StateError::RangeViolation { var: name.into(), value, range });
        }
        let mut next = self.clone();
        next.values[i] = value;
        Ok(next)
    }

    /// Look up a name as a variable first, then as a constant.
    pub fn lookup<'a>(&'a self, consts: &'a Consts) -> impl Fn(&str) -> Option<Value> + 'a {
        move |n| self.get(n).or_else(|| consts.get(n).copied())
    }

    /// Values of the variables named in `names`, in that order.
    pub fn project(&self, names: &[String]) -> Vec<Value> {
        names.iter().filter_map(|n| self.get(n)).collect()
    }

    pub fn render(&self) -> String {
        self.render_vars(self.layout.names())
    }

    pub fn render_vars(&self, names: &[String]) -> String {
        let parts: Vec<String> = names.iter().filter_map(|n| self.get(n).map(|v| format!("{n}={v}"))).collect();
        parts.join(",")
    }
}

// Integral reals produced by constant arithmetic can be stored in integer variables.
fn coerce(value: Value, range: VarRange) -> Value {
    match (value, range) {
        (Value::Real(r), VarRange::Int { .. }) if r.fract() == 0.0 && r.abs() < 9.0e15 => Value::Int(r as i64),
        _ => value,
    }
}

impl PartialEq for StateValuation {
    fn eq(&self, other: &Self) -> bool {
        self.values == other.values
    }
}

impl Eq for StateValuation {}

impl Hash for StateValuation {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.values.hash(state)
    }
}

impl fmt::Debug for StateValuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.render())
    }
}

/// Apply `u` left to right: each assignment sees the state produced by the
/// assignments before it.
pub fn apply_update(state: &StateValuation, u: &UpdateList, consts: &Consts) -> Result<StateValuation, StateError> {
    let mut s = state.clone();
    for a in u.iter() {
        let v = eval_with(&a.value, &s.lookup(consts))?;
        s = s.with(&a.target, v)?;
    }
    Ok(s)
}

/// Apply `u` as PRISM does: every right-hand side is evaluated in `state`.
pub fn apply_update_simultaneous(
    state: &StateValuation,
    u: &UpdateList,
    consts: &Consts,
) -> Result<StateValuation, StateError> {
    let lookup = state.lookup(consts);
    let mut s = state.clone();
    for a in u.iter() {
        s = s.with(&a.target, eval_with(&a.value, &lookup)?)?;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{Assign, Expr, Op};

    fn xy() -> StateValuation {
        let layout =
            Arc::new(VarLayout::new([("x", VarRange::Int { lo: 0, hi: 3 }), ("y", VarRange::Int { lo: 0, hi: 3 })]));
        StateValuation::new(layout, vec![Value::Int(0), Value::Int(0)]).unwrap()
    }

    #[test]
    fn sequential_update_reads_earlier_assignments() {
        let u = UpdateList::new(vec![
            Assign::new("x", Expr::int(1)),
            Assign::new("y", Expr::bin(Op::Add, Expr::var("x"), Expr::int(1))),
        ]);
        let s = apply_update(&xy(), &u, &Consts::new()).unwrap();
        assert_eq!(s.get("x"), Some(Value::Int(1)));
        assert_eq!(s.get("y"), Some(Value::Int(2)));
    }

    #[test]
    fn simultaneous_update_reads_old_state() {
        let u = UpdateList::new(vec![
            Assign::new("x", Expr::int(1)),
            Assign::new("y", Expr::bin(Op::Add, Expr::var("x"), Expr::int(1))),
        ]);
        let s = apply_update_simultaneous(&xy(), &u, &Consts::new()).unwrap();
        assert_eq!(s.render(), "x=1,y=1");
    }

    #[test]
    fn example_two_branch_update() {
        let u = UpdateList::new(vec![Assign::new("x", Expr::int(1)), Assign::new("y", Expr::int(2))]);
        let s = apply_update(&xy(), &u, &Consts::new()).unwrap();
        assert_eq!(s.render(), "x=1,y=2");
    }

    #[test]
    fn empty_update_is_identity() {
        let s = apply_update(&xy(), &UpdateList::empty(), &Consts::new()).unwrap();
        assert_eq!(s, xy());
    }

    #[test]
    fn range_violation_names_variable() {
        let u = UpdateList::new(vec![Assign::new("y", Expr::int(7))]);
        match apply_update(&xy(), &u, &Consts::new()) {
            Err(StateError::RangeViolation { var, value, .. }) => {
                assert_eq!(var, "y");
                assert_eq!(value, Value::Int(7));
            }
            other => panic!("expected range violation, got {other:?}"),
        }
    }
}
