//! Core programs back to concrete syntax.

use std::fmt::Write;

use crate::chor::{ChorProgram, ChorTerm};
use crate::expr::UpdateList;
use crate::state::VarRange;

/// Source text that compiles back to `prog`.
pub fn pretty(prog: &ChorProgram) -> String {
    let mut out = format!("{};\n\n", prog.kind.keyword());
    for (name, v) in &prog.consts {
        let _ = writeln!(out, "const {name} = {v};");
    }
    for r in &prog.roles {
        let _ = writeln!(out, "role {r};");
    }
    for v in &prog.vars {
        let range = match v.range {
            VarRange::Int { lo, hi } => format!("[{lo}..{hi}]"),
            VarRange::Bool => "bool".into(),
        };
        let _ = writeln!(out, "var {} @ {} : {range} init {};", v.name, v.owner, v.init);
    }
    for (name, body) in &prog.definitions {
        let _ = write!(out, "\ndef {name} =\n    ");
        term(&mut out, body, 1);
        out.push_str(";\n");
    }
    let _ = writeln!(out, "\nmain {};", prog.main);
    out
}

fn indent(out: &mut String, depth: usize) {
    out.push('\n');
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn updates(u: &UpdateList) -> String {
    u.iter().map(|a| format!("{}'={}", a.target, a.value)).collect::<Vec<_>>().join(", ")
}

fn term(out: &mut String, t: &ChorTerm, depth: usize) {
    match t {
        ChorTerm::Inact => out.push_str("end"),
        ChorTerm::Call(x) => out.push_str(x),
        ChorTerm::Conditional { guard, at, then_body, else_body } => {
            let _ = write!(out, "if {guard} @ {at} then {{");
            indent(out, depth + 1);
            term(out, then_body, depth + 1);
            indent(out, depth);
            out.push_str("} else {");
            indent(out, depth + 1);
            term(out, else_body, depth + 1);
            indent(out, depth);
            out.push('}');
        }
        ChorTerm::Interaction(i) => {
            if let Some(l) = &i.label {
                let _ = write!(out, "[{l}] ");
            }
            let receivers = i.receivers.iter().map(|r| r.as_str()).collect::<Vec<_>>().join(", ");
            let _ = write!(out, "{} -> {receivers} : {{", i.initiator);
            for (j, b) in i.branches.iter().enumerate() {
                indent(out, depth + 1);
                if j > 0 {
                    out.push_str("| ");
                }
                if let Some(l) = &b.label {
                    let _ = write!(out, "[{l}] ");
                }
                let _ = write!(out, "{} : {{{}}}", b.weight, updates(&b.update));
                if b.cont != ChorTerm::Inact {
                    out.push(';');
                    indent(out, depth + 2);
                    term(out, &b.cont, depth + 2);
                }
            }
            indent(out, depth);
            out.push('}');
        }
    }
}
