//! PRISM source text for a model.

use std::collections::HashMap;
use std::fmt::Write;

use thiserror::Error;

use super::{PrismCommand, PrismModel, PrismModule, Weight};
use crate::expr::{Expr, Op, UpdateList, Value};
use crate::state::{ModelKind, VarRange};

/// Weights whose rendering moves them by more than this (relative) are
/// rejected.
const ROUND_TRIP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct EmitConfig {
    /// Significant digits for real literals; at least 6.
    pub precision: usize,
    /// Commands longer than this are wrapped before each `+`. `None` keeps
    /// every command on one line.
    pub line_width: Option<usize>,
    pub label: fn(&str) -> String,
}

impl Default for EmitConfig {
    fn default() -> Self {
        EmitConfig { precision: 12, line_width: None, label: str::to_string }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmitError {
    #[error("precision {0} is below the minimum of 6 significant digits")]
    Precision(usize),
    #[error("weight {value} cannot be written with {precision} significant digits")]
    UnrepresentableWeight { value: f64, precision: usize },
}

/// File extension PRISM expects for the model kind.
pub fn extension(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Ctmc => "sm",
        ModelKind::Dtmc => "pm",
    }
}

pub fn emit(model: &PrismModel, cfg: &EmitConfig) -> Result<String, EmitError> {
    if cfg.precision < 6 {
        return Err(EmitError::Precision(cfg.precision));
    }
    let mut types: HashMap<&str, Ty> = HashMap::new();
    for (name, v) in &model.consts {
        types.insert(name, Ty::of(*v));
    }
    let modules = model.network.modules();
    for m in &modules {
        for v in &m.vars {
            types.insert(&v.name, if v.range == VarRange::Bool { Ty::Bool } else { Ty::Int });
        }
    }
    let r = Renderer { cfg, types };

    let mut out = format!("{}\n", model.kind.keyword());
    if !model.consts.is_empty() {
        out.push('\n');
    }
    for (name, v) in &model.consts {
        let (ty, text) = match v {
            Value::Int(i) => ("int", i.to_string()),
            Value::Bool(b) => ("bool", b.to_string()),
            Value::Real(x) => ("double", r.real(*x)?),
        };
        let _ = writeln!(out, "const {ty} {name} = {text};");
    }
    for m in modules {
        out.push('\n');
        r.module(&mut out, m)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Ty {
    Int,
    Real,
    Bool,
}

impl Ty {
    fn of(v: Value) -> Ty {
        match v {
            Value::Int(_) => Ty::Int,
            Value::Real(_) => Ty::Real,
            Value::Bool(_) => Ty::Bool,
        }
    }
}

struct Renderer<'a> {
    cfg: &'a EmitConfig,
    types: HashMap<&'a str, Ty>,
}

fn prec(op: Op) -> u8 {
    match op {
        Op::Or => 1,
        Op::And => 2,
        Op::Not => 3,
        Op::Eq | Op::Ne | Op::Lt | Op::Le | Op::Gt | Op::Ge => 4,
        Op::Add | Op::Sub => 5,
        Op::Mul | Op::Div => 6,
        Op::Mod | Op::Min | Op::Max => 8,
    }
}

impl Renderer<'_> {
    fn ty(&self, e: &Expr) -> Ty {
        match e {
            Expr::Lit(v) => Ty::of(*v),
            Expr::Var(v) => self.types.get(v.as_str()).copied().unwrap_or(Ty::Real),
            Expr::Indexed(..) => Ty::Int,
            Expr::App(op, args) => match op {
                Op::Not | Op::And | Op::Or | Op::Eq | Op::Ne | Op::Lt | Op::Le | Op::Gt | Op::Ge => Ty::Bool,
                Op::Mod => Ty::Int,
                _ if args.iter().all(|a| self.ty(a) == Ty::Int) => Ty::Int,
                _ => Ty::Real,
            },
        }
    }

    fn real(&self, x: f64) -> Result<String, EmitError> {
        let bad = || EmitError::UnrepresentableWeight { value: x, precision: self.cfg.precision };
        if !x.is_finite() {
            return Err(bad());
        }
        let shortest = format!("{x:?}");
        let digits = shortest.trim_start_matches('-').split(['e', 'E']).next().unwrap_or("");
        let significant = digits.chars().filter(char::is_ascii_digit).collect::<String>();
        if significant.trim_start_matches('0').trim_end_matches('0').len() <= self.cfg.precision {
            return Ok(shortest);
        }
        let text = format!("{:.*e}", self.cfg.precision - 1, x);
        let back: f64 = text.parse().map_err(|_| bad())?;
        if (back - x).abs() > ROUND_TRIP_TOLERANCE * x.abs() {
            return Err(bad());
        }
        // Drop trailing zeros of the mantissa, e.g. 3.000000e-1 -> 3e-1.
        let (mant, exp) = text.split_once('e').expect("exponent form");
        let mant = if mant.contains('.') { mant.trim_end_matches('0').trim_end_matches('.') } else { mant };
        Ok(format!("{mant}e{exp}"))
    }

    fn expr(&self, e: &Expr) -> Result<String, EmitError> {
        self.at(e, 0)
    }

    /// Render `e` in a context binding at least as tightly as `ctx`.
    fn at(&self, e: &Expr, ctx: u8) -> Result<String, EmitError> {
        Ok(match e {
            Expr::Lit(Value::Int(i)) if *i < 0 && ctx > 0 => format!("({i})"),
            Expr::Lit(Value::Int(i)) => i.to_string(),
            Expr::Lit(Value::Bool(b)) => b.to_string(),
            Expr::Lit(Value::Real(x)) => {
                let s = self.real(*x)?;
                if s.starts_with('-') && ctx > 0 {
                    format!("({s})")
                } else {
                    s
                }
            }
            Expr::Var(v) => v.clone(),
            Expr::Indexed(b, i) => format!("{b}[{}]", self.at(i, 0)?),
            Expr::App(op, args) => {
                let p = prec(*op);
                let s = match op {
                    Op::Not => format!("!{}", self.at(&args[0], 7)?),
                    Op::Mod | Op::Min | Op::Max => {
                        let parts = args.iter().map(|a| self.at(a, 0)).collect::<Result<Vec<_>, _>>()?;
                        format!("{}({})", op.symbol(), parts.join(", "))
                    }
                    Op::Div if self.ty(&args[0]) == Ty::Int && self.ty(&args[1]) == Ty::Int => {
                        return Ok(format!("floor({}/{})", self.at(&args[0], 6)?, self.at(&args[1], 7)?));
                    }
                    _ => {
                        let sym = match op {
                            Op::And => "&",
                            Op::Or => "|",
                            o => o.symbol(),
                        };
                        let rhs_ctx = if matches!(op, Op::And | Op::Or) { p } else { p + 1 };
                        let lhs_ctx = if op.is_comparison() { p + 1 } else { p };
                        format!("{}{sym}{}", self.at(&args[0], lhs_ctx)?, self.at(&args[1], rhs_ctx)?)
                    }
                };
                if p < ctx {
                    format!("({s})")
                } else {
                    s
                }
            }
        })
    }

    fn guard(&self, g: &Expr) -> Result<String, EmitError> {
        if g.is_true_literal() {
            return Ok("true".into());
        }
        let mut conjuncts = Vec::new();
        fn flatten<'e>(e: &'e Expr, out: &mut Vec<&'e Expr>) {
            match e {
                Expr::App(Op::And, args) => args.iter().for_each(|a| flatten(a, out)),
                _ => out.push(e),
            }
        }
        flatten(g, &mut conjuncts);
        Ok(conjuncts.iter().map(|c| Ok(format!("({})", self.expr(c)?))).collect::<Result<Vec<_>, _>>()?.join("&"))
    }

    fn update(&self, u: &UpdateList) -> Result<String, EmitError> {
        if u.is_empty() {
            return Ok("true".into());
        }
        Ok(u.iter()
            .map(|a| Ok(format!("({}'={})", a.target, self.expr(&a.value)?)))
            .collect::<Result<Vec<_>, _>>()?
            .join("&"))
    }

    fn weight(&self, w: &Weight) -> Result<String, EmitError> {
        if w.expr.free_vars().is_empty() {
            // Fold constant arithmetic into one literal.
            if w.value.fract() == 0.0 && w.value.abs() < 1e15 {
                return Ok((w.value as i64).to_string());
            }
            return self.real(w.value);
        }
        self.expr(&w.expr)
    }

    fn command(&self, out: &mut String, c: &PrismCommand) -> Result<(), EmitError> {
        let label = c.label.as_deref().map(self.cfg.label).unwrap_or_default();
        let head = format!("    [{label}] {} -> ", self.guard(&c.guard)?);
        let branches = c
            .branches
            .iter()
            .map(|(w, u)| Ok(format!("{} : {}", self.weight(w)?, self.update(u)?)))
            .collect::<Result<Vec<_>, EmitError>>()?;
        let one_line = format!("{head}{};", branches.join(" + "));
        match self.cfg.line_width {
            Some(width) if one_line.len() > width && branches.len() > 1 => {
                out.push_str(&head);
                out.push_str(&branches[0]);
                for b in &branches[1..] {
                    let _ = write!(out, "\n        + {b}");
                }
                out.push_str(";\n");
            }
            _ => {
                out.push_str(&one_line);
                out.push('\n');
            }
        }
        Ok(())
    }

    fn module(&self, out: &mut String, m: &PrismModule) -> Result<(), EmitError> {
        let _ = writeln!(out, "module {}", m.name);
        for v in &m.vars {
            let range = match v.range {
                VarRange::Int { lo, hi } => format!("[{lo}..{hi}]"),
                VarRange::Bool => "bool".into(),
            };
            let _ = writeln!(out, "    {} : {range} init {};", v.name, v.init);
        }
        if !m.commands.is_empty() {
            out.push('\n');
        }
        for c in &m.commands {
            self.command(out, c)?;
        }
        out.push_str("endmodule\n");
        Ok(())
    }
}
