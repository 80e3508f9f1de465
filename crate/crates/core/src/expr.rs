//! Expressions, values and update lists shared by choreographies and PRISM commands.

use std::fmt;
use std::hash::{Hash, Hasher};

use indexmap::IndexMap;
use thiserror::Error;

/// Named constants of a program. Integer-valued constants stay integers so
/// they can be assigned to integer variables.
pub type Consts = IndexMap<String, Value>;

#[derive(Debug, Clone, Copy)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Real(f64),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Value::Int(i) => Some(i as f64),
            Value::Real(r) => Some(r),
            Value::Bool(_) => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match *self {
            Value::Bool(b) => Some(b),
            _ => None,
        }
    }

    fn type_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Bool(_) => "bool",
            Value::Real(_) => "real",
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Real(a), Value::Real(b)) => a.to_bits() == b.to_bits(),
            _ => false,
        }
    }
}

impl Eq for Value {}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        std::mem::discriminant(self).hash(state);
        match self {
            Value::Int(i) => i.hash(state),
            Value::Bool(b) => b.hash(state),
            Value::Real(r) => r.to_bits().hash(state),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Real(r) => write!(f, "{r:?}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Not,
    And,
    Or,
    Min,
    Max,
}

impl Op {
    pub fn symbol(self) -> &'static str {
        match self {
            Op::Add => "+",
            Op::Sub => "-",
            Op::Mul => "*",
            Op::Div => "/",
            Op::Mod => "mod",
            Op::Eq => "=",
            Op::Ne => "!=",
            Op::Lt => "<",
            Op::Le => "<=",
            Op::Gt => ">",
            Op::Ge => ">=",
            Op::Not => "not",
            Op::And => "and",
            Op::Or => "or",
            Op::Min => "min",
            Op::Max => "max",
        }
    }

    pub fn arity_ok(self, n: usize) -> bool {
        match self {
            Op::Not => n == 1,
            Op::Min | Op::Max => n >= 2,
            _ => n == 2,
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, Op::Eq | Op::Ne | Op::Lt | Op::Le | Op::Gt | Op::Ge)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Lit(Value),
    Var(String),
    /// `x[e]`: a reference into an indexed variable family. Only present in
    /// surface programs before index expansion.
    Indexed(String, Box<Expr>),
    App(Op, Vec<Expr>),
}

impl Expr {
    pub fn int(i: i64) -> Self {
        Expr::Lit(Value::Int(i))
    }

    pub fn real(r: f64) -> Self {
        Expr::Lit(Value::Real(r))
    }

    pub fn bool(b: bool) -> Self {
        Expr::Lit(Value::Bool(b))
    }

    pub fn var(name: impl Into<String>) -> Self {
        Expr::Var(name.into())
    }

    pub fn app(op: Op, args: Vec<Expr>) -> Self {
        Expr::App(op, args)
    }

    pub fn bin(op: Op, a: Expr, b: Expr) -> Self {
        Expr::App(op, vec![a, b])
    }

    pub fn not(e: Expr) -> Self {
        Expr::App(Op::Not, vec![e])
    }

    pub fn and(a: Expr, b: Expr) -> Self {
        Expr::bin(Op::And, a, b)
    }

    pub fn is_true_literal(&self) -> bool {
        matches!(self, Expr::Lit(Value::Bool(true)))
    }

    /// Names referenced by this expression, in first-occurrence order.
    pub fn free_vars(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Lit(_) => {}
            Expr::Var(v) => {
                if !out.contains(&v.as_str()) {
                    out.push(v);
                }
            }
            Expr::Indexed(base, idx) => {
                if !out.contains(&base.as_str()) {
                    out.push(base);
                }
                idx.collect_vars(out);
            }
            Expr::App(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    /// Replace variables for which `f` returns a substitute.
    pub fn substitute(&self, f: &impl Fn(&str) -> Option<Expr>) -> Expr {
        match self {
            Expr::Lit(_) => self.clone(),
            Expr::Var(v) => f(v).unwrap_or_else(|| self.clone()),
            Expr::Indexed(base, idx) => Expr::Indexed(base.clone(), Box::new(idx.substitute(f))),
            Expr::App(op, args) => Expr::App(*op, args.iter().map(|a| a.substitute(f)).collect()),
        }
    }

    pub fn contains_indexed(&self) -> bool {
        match self {
            Expr::Indexed(..) => true,
            Expr::App(_, args) => args.iter().any(Expr::contains_indexed),
            _ => false,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Lit(v) => write!(f, "{v}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Indexed(b, i) => write!(f, "{b}[{i}]"),
            Expr::App(op, args) => match op {
                Op::Not => write!(f, "not ({})", args[0]),
                Op::Mod | Op::Min | Op::Max => {
                    write!(f, "{}(", op.symbol())?;
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            write!(f, ", ")?;
                        }
                        write!(f, "{a}")?;
                    }
                    write!(f, ")")
                }
                _ => write!(f, "({} {} {})", args[0], op.symbol(), args[1]),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("type mismatch in `{op}`: {detail}")]
    TypeMismatch { op: &'static str, detail: String },
    #[error("division by zero")]
    DivisionByZero,
    #[error("unexpanded indexed reference `{0}[..]`")]
    UnexpandedIndex(String),
}

fn mismatch(op: Op, args: &[Value]) -> EvalError {
    let types: Vec<_> = args.iter().map(Value::type_name).collect();
    EvalError::TypeMismatch { op: op.symbol(), detail: format!("arguments of type ({})", types.join(", ")) }
}

/// Evaluate `expr`, resolving names through `lookup`.
pub fn eval_with(expr: &Expr, lookup: &dyn Fn(&str) -> Option<Value>) -> Result<Value, EvalError> {
    match expr {
        Expr::Lit(v) => Ok(*v),
        Expr::Var(name) => lookup(name).ok_or_else(|| EvalError::UnknownVariable(name.clone())),
        Expr::Indexed(name, _) => Err(EvalError::UnexpandedIndex(name.clone())),
        Expr::App(op, args) => {
            if !op.arity_ok(args.len()) {
                return Err(EvalError::TypeMismatch { op: op.symbol(), detail: format!("wrong arity {}", args.len()) });
            }
            // short-circuit boolean connectives
            match op {
                Op::And | Op::Or => {
                    let lhs = eval_with(&args[0], lookup)?;
                    let l = lhs.as_bool().ok_or_else(|| mismatch(*op, &[lhs]))?;
                    if (*op == Op::And && !l) || (*op == Op::Or && l) {
                        return Ok(Value::Bool(l));
                    }
                    let rhs = eval_with(&args[1], lookup)?;
                    let r = rhs.as_bool().ok_or_else(|| mismatch(*op, &[lhs, rhs]))?;
                    return Ok(Value::Bool(r));
                }
                _ => {}
            }
            let vals = args.iter().map(|a| eval_with(a, lookup)).collect::<Result<Vec<_>, _>>()?;
            apply_op(*op, &vals)
        }
    }
}

fn apply_op(op: Op, vals: &[Value]) -> Result<Value, EvalError> {
    use Value::*;
    match op {
        Op::Not => match vals[0] {
            Bool(b) => Ok(Bool(!b)),
            _ => Err(mismatch(op, vals)),
        },
        Op::Add | Op::Sub | Op::Mul => match (vals[0], vals[1]) {
            (Int(a), Int(b)) => {
                let r = match op {
                    Op::Add => a.checked_add(b),
                    Op::Sub => a.checked_sub(b),
                    _ => a.checked_mul(b),
                };
                r.map(Int).ok_or_else(|| EvalError::TypeMismatch { op: op.symbol(), detail: "integer overflow".into() })
            }
            (a, b) => {
                let (x, y) = num_pair(op, vals, a, b)?;
                Ok(Real(match op {
                    Op::Add => x + y,
                    Op::Sub => x - y,
                    _ => x * y,
                }))
            }
        },
        Op::Div => match (vals[0], vals[1]) {
            (Int(_), Int(0)) => Err(EvalError::DivisionByZero),
            (Int(a), Int(b)) => Ok(Int(floor_div(a, b))),
            (a, b) => {
                let (x, y) = num_pair(op, vals, a, b)?;
                if y == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                Ok(Real(x / y))
            }
        },
        Op::Mod => match (vals[0], vals[1]) {
            (Int(_), Int(0)) => Err(EvalError::DivisionByZero),
            (Int(a), Int(b)) => Ok(Int(a.rem_euclid(b))),
            _ => Err(mismatch(op, vals)),
        },
        Op::Min | Op::Max => {
            if vals.iter().all(|v| matches!(v, Int(_))) {
                let ints = vals.iter().map(|v| match v {
                    Int(i) => *i,
                    _ => unreachable!(),
                });
                Ok(Int(if op == Op::Min { ints.min() } else { ints.max() }.unwrap()))
            } else {
                let mut acc: Option<f64> = None;
                for v in vals {
                    let x = v.as_f64().ok_or_else(|| mismatch(op, vals))?;
                    acc = Some(match acc {
                        None => x,
                        Some(a) if op == Op::Min => a.min(x),
                        Some(a) => a.max(x),
                    });
                }
                Ok(Real(acc.unwrap()))
            }
        }
        Op::Eq | Op::Ne => {
            let eq = match (vals[0], vals[1]) {
                (Bool(a), Bool(b)) => a == b,
                (Int(a), Int(b)) => a == b,
                (a, b) => {
                    let (x, y) = num_pair(op, vals, a, b)?;
                    x == y
                }
            };
            Ok(Bool(if op == Op::Eq { eq } else { !eq }))
        }
        Op::Lt | Op::Le | Op::Gt | Op::Ge => {
            let ord = match (vals[0], vals[1]) {
                (Int(a), Int(b)) => a.cmp(&b),
                (a, b) => {
                    let (x, y) = num_pair(op, vals, a, b)?;
                    x.partial_cmp(&y).ok_or_else(|| mismatch(op, vals))?
                }
            };
            Ok(Bool(match op {
                Op::Lt => ord.is_lt(),
                Op::Le => ord.is_le(),
                Op::Gt => ord.is_gt(),
                _ => ord.is_ge(),
            }))
        }
        Op::And | Op::Or => unreachable!("handled with short-circuit"),
    }
}

fn floor_div(a: i64, b: i64) -> i64 {
    let q = a / b;
    if a % b != 0 && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn num_pair(op: Op, vals: &[Value], a: Value, b: Value) -> Result<(f64, f64), EvalError> {
    match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => Ok((x, y)),
        _ => Err(mismatch(op, vals)),
    }
}

/// Evaluate an expression that may only mention constants.
pub fn eval_const(expr: &Expr, consts: &Consts) -> Result<Value, EvalError> {
    eval_with(expr, &|n| consts.get(n).copied())
}

/// Evaluate a weight (rate or probability) to a real number.
pub fn eval_weight(expr: &Expr, consts: &Consts) -> Result<f64, EvalError> {
    let v = eval_const(expr, consts)?;
    v.as_f64().ok_or_else(|| EvalError::TypeMismatch { op: "weight", detail: "a weight must be numeric".into() })
}

/// One assignment `x' = E`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assign {
    pub target: String,
    pub value: Expr,
}

impl Assign {
    pub fn new(target: impl Into<String>, value: Expr) -> Self {
        Assign { target: target.into(), value }
    }
}

/// Ordered assignments joined by `&`; empty means identity.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct UpdateList(pub Vec<Assign>);

impl UpdateList {
    pub fn new(assigns: Vec<Assign>) -> Self {
        UpdateList(assigns)
    }

    pub fn empty() -> Self {
        UpdateList(Vec::new())
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Assign> {
        self.0.iter()
    }

    pub fn targets(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|a| a.target.as_str())
    }

    /// `self & other`
    pub fn concat(&self, other: &UpdateList) -> UpdateList {
        let mut v = self.0.clone();
        v.extend(other.0.iter().cloned());
        UpdateList(v)
    }
}

impl fmt::Display for UpdateList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "true");
        }
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, "&")?;
            }
            write!(f, "({}'={})", a.target, a.value)?;
        }
        Ok(())
    }
}
