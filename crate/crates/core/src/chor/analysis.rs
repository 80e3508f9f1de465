//! Static analyses over choreographies: node counting, head modules, strong
//! connectedness, annotation uniqueness and well-formedness.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use super::ast::{ChorProgram, ChorTerm, Definitions, Interaction};
use crate::expr::{eval_const, Expr, Value};
use crate::state::{ModelKind, RoleId, VarRange};

/// Tolerance on the sum of the branch probabilities of a DTMC interaction.
pub const PROB_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("unguarded recursion through `{0}`")]
    UnguardedRecursion(String),
    #[error("call to undefined definition `{0}`")]
    UndefinedDefinition(String),
}

/// Size of the abstract syntax tree of `term`. In DTMC mode an interaction
/// also reserves one slot per branch for the initiator's internal choice.
pub fn nodes(term: &ChorTerm, kind: ModelKind) -> usize {
    match term {
        ChorTerm::Interaction(i) => {
            let reserved = match kind {
                ModelKind::Ctmc => 0,
                ModelKind::Dtmc => i.branches.len(),
            };
            1 + reserved + i.branches.iter().map(|b| nodes(&b.cont, kind)).sum::<usize>()
        }
        ChorTerm::Conditional { then_body, else_body, .. } => 1 + nodes(then_body, kind) + nodes(else_body, kind),
        ChorTerm::Call(_) | ChorTerm::Inact => 1,
    }
}

/// Roles involved in the next action of `term`, unfolding calls.
pub fn h_mods(term: &ChorTerm, defs: &Definitions) -> Result<BTreeSet<RoleId>, AnalysisError> {
    let mut visited = HashSet::new();
    let mut t = term;
    loop {
        match t {
            ChorTerm::Interaction(i) => return Ok(i.participants().cloned().collect()),
            ChorTerm::Conditional { at, .. } => return Ok(BTreeSet::from([at.clone()])),
            ChorTerm::Inact => return Ok(BTreeSet::new()),
            ChorTerm::Call(x) => {
                if !visited.insert(x.as_str()) {
                    return Err(AnalysisError::UnguardedRecursion(x.clone()));
                }
                t = defs.get(x).ok_or_else(|| AnalysisError::UndefinedDefinition(x.clone()))?;
            }
        }
    }
}

/// Where strong connectedness fails.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnViolation {
    pub location: String,
    pub previous: BTreeSet<RoleId>,
    pub next: BTreeSet<RoleId>,
}

impl fmt::Display for ConnViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = |s: &BTreeSet<RoleId>| s.iter().map(RoleId::as_str).collect::<Vec<_>>().join(",");
        write!(
            f,
            "{}: next action involves {{{}}}, disjoint from {{{}}}",
            self.location,
            names(&self.next),
            names(&self.previous)
        )
    }
}

/// Strong connectedness: the next action of every continuation shares a role
/// with the action before it. Recursive calls are read coinductively.
pub fn s_conn(term: &ChorTerm, defs: &Definitions) -> Result<bool, AnalysisError> {
    Ok(s_conn_violation(term, defs, "main")?.is_none())
}

/// Like [`s_conn`], but reports the first offending location.
pub fn s_conn_violation(
    term: &ChorTerm,
    defs: &Definitions,
    root: &str,
) -> Result<Option<ConnViolation>, AnalysisError> {
    let mut visited = HashSet::new();
    conn_walk(term, defs, root.to_string(), &mut visited)
}

fn conn_walk(
    term: &ChorTerm,
    defs: &Definitions,
    loc: String,
    visited: &mut HashSet<String>,
) -> Result<Option<ConnViolation>, AnalysisError> {
    match term {
        ChorTerm::Inact => Ok(None),
        ChorTerm::Call(x) => {
            if !visited.insert(x.clone()) {
                return Ok(None);
            }
            let body = defs.get(x).ok_or_else(|| AnalysisError::UndefinedDefinition(x.clone()))?;
            conn_walk(body, defs, x.clone(), visited)
        }
        ChorTerm::Interaction(i) => {
            let involved: BTreeSet<RoleId> = i.participants().cloned().collect();
            for (j, b) in i.branches.iter().enumerate() {
                let here = format!("{loc}.b{}", j + 1);
                if let Some(v) = conn_walk(&b.cont, defs, here.clone(), visited)? {
                    return Ok(Some(v));
                }
                let next = h_mods(&b.cont, defs)?;
                if !next.is_empty() && next.is_disjoint(&involved) {
                    return Ok(Some(ConnViolation { location: here, previous: involved, next }));
                }
            }
            Ok(None)
        }
        ChorTerm::Conditional { at, then_body, else_body, .. } => {
            for (body, tag) in [(then_body, "then"), (else_body, "else")] {
                let here = format!("{loc}.{tag}");
                if let Some(v) = conn_walk(body, defs, here.clone(), visited)? {
                    return Ok(Some(v));
                }
                let next = h_mods(body, defs)?;
                if !next.is_empty() && !next.contains(at) {
                    return Ok(Some(ConnViolation { location: here, previous: BTreeSet::from([at.clone()]), next }));
                }
            }
            Ok(None)
        }
    }
}

/// Pre-order paths of all interactions: `(location, interaction)`.
pub fn interaction_sites(prog: &ChorProgram) -> Vec<(String, &Interaction)> {
    fn go<'a>(t: &'a ChorTerm, loc: String, out: &mut Vec<(String, &'a Interaction)>) {
        match t {
            ChorTerm::Interaction(i) => {
                out.push((loc.clone(), i));
                for (j, b) in i.branches.iter().enumerate() {
                    go(&b.cont, format!("{loc}.b{}", j + 1), out);
                }
            }
            ChorTerm::Conditional { then_body, else_body, .. } => {
                go(then_body, format!("{loc}.then"), out);
                go(else_body, format!("{loc}.else"), out);
            }
            _ => {}
        }
    }
    let mut out = Vec::new();
    for (name, body) in &prog.definitions {
        go(body, name.clone(), &mut out);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DuplicateLabel {
    pub label: String,
    pub first: String,
    pub second: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnnotationError {
    #[error("interaction at {0} carries no annotation")]
    MissingAnnotation(String),
    #[error("duplicate annotations: {}", .0.iter().map(|d| format!("`{}` at {} and {}", d.label, d.first, d.second)).collect::<Vec<_>>().join("; "))]
    Duplicates(Vec<DuplicateLabel>),
}

/// Every annotation, and every derived branch label, must occur exactly once.
pub fn check_annotations(prog: &ChorProgram) -> Result<(), AnnotationError> {
    let sites = interaction_sites(prog);
    let mut seen: HashMap<String, String> = HashMap::new();
    let mut dups = Vec::new();
    let mut note = |label: String, loc: String, dups: &mut Vec<DuplicateLabel>| {
        if let Some(first) = seen.get(&label) {
            dups.push(DuplicateLabel { label, first: first.clone(), second: loc });
        } else {
            seen.insert(label, loc);
        }
    };
    for (loc, i) in &sites {
        let Some(label) = &i.label else {
            return Err(AnnotationError::MissingAnnotation(loc.clone()));
        };
        note(label.clone(), loc.clone(), &mut dups);
    }
    // Branch labels share the namespace; skip ones already reported through
    // their interaction annotation.
    let reported: HashSet<String> = dups.iter().map(|d| d.label.clone()).collect();
    for (loc, i) in &sites {
        if i.label.as_ref().is_some_and(|l| reported.contains(l)) {
            continue;
        }
        for j in 0..i.branches.len() {
            if let Some(bl) = i.branch_label(j) {
                note(bl, format!("{loc}.b{}", j + 1), &mut dups);
            }
        }
    }
    if dups.is_empty() {
        Ok(())
    } else {
        Err(AnnotationError::Duplicates(dups))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiagnosticKind {
    MissingMain,
    DuplicateRole,
    DuplicateVariable,
    NameClash,
    UnknownRole,
    BadVarDecl,
    UnknownVariable,
    UnexpandedIndex,
    InitiatorInReceivers,
    DuplicateReceiver,
    EmptyReceivers,
    EmptyBranches,
    NonConstantWeight,
    NegativeWeight,
    ProbOutOfRange,
    ProbSumNotOne,
    DuplicateTarget,
    ForeignUpdate,
    UpdateReadsAssigned,
    UndefinedCall,
    UnguardedRecursion,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub location: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {:?}: {}", self.location, self.kind, self.message)
    }
}

struct WfChecker<'a> {
    prog: &'a ChorProgram,
    roles: HashSet<&'a str>,
    out: Vec<Diagnostic>,
}

impl<'a> WfChecker<'a> {
    fn push(&mut self, kind: DiagnosticKind, location: &str, message: String) {
        self.out.push(Diagnostic { kind, location: location.to_string(), message });
    }

    fn known_name(&self, n: &str) -> bool {
        self.prog.var(n).is_some() || self.prog.consts.contains_key(n)
    }

    fn check_expr(&mut self, e: &Expr, loc: &str) {
        if e.contains_indexed() {
            self.push(DiagnosticKind::UnexpandedIndex, loc, format!("indexed reference in `{e}`"));
            return;
        }
        for v in e.free_vars() {
            if !self.known_name(v) {
                self.push(DiagnosticKind::UnknownVariable, loc, format!("`{v}` is not declared"));
            }
        }
    }

    fn check_role(&mut self, r: &RoleId, loc: &str) {
        if !self.roles.contains(r.as_str()) {
            self.push(DiagnosticKind::UnknownRole, loc, format!("role `{r}` is not declared"));
        }
    }

    fn term(&mut self, t: &'a ChorTerm, loc: String) {
        match t {
            ChorTerm::Inact => {}
            ChorTerm::Call(x) => {
                if !self.prog.definitions.contains_key(x) {
                    self.push(DiagnosticKind::UndefinedCall, &loc, format!("`{x}` is not defined"));
                }
            }
            ChorTerm::Conditional { guard, at, then_body, else_body } => {
                self.check_role(at, &loc);
                self.check_expr(guard, &loc);
                self.term(then_body, format!("{loc}.then"));
                self.term(else_body, format!("{loc}.else"));
            }
            ChorTerm::Interaction(i) => {
                self.interaction(i, &loc);
                for (j, b) in i.branches.iter().enumerate() {
                    self.term(&b.cont, format!("{loc}.b{}", j + 1));
                }
            }
        }
    }

    fn interaction(&mut self, i: &Interaction, loc: &str) {
        self.check_role(&i.initiator, loc);
        if i.receivers.is_empty() {
            self.push(DiagnosticKind::EmptyReceivers, loc, "an interaction needs at least one receiver".into());
        }
        let mut seen = HashSet::new();
        for r in &i.receivers {
            self.check_role(r, loc);
            if *r == i.initiator {
                self.push(
                    DiagnosticKind::InitiatorInReceivers,
                    loc,
                    format!("initiator `{r}` also listed as receiver"),
                );
            } else if !seen.insert(r) {
                self.push(DiagnosticKind::DuplicateReceiver, loc, format!("receiver `{r}` listed twice"));
            }
        }
        if i.branches.is_empty() {
            self.push(DiagnosticKind::EmptyBranches, loc, "an interaction needs at least one branch".into());
            return;
        }

        let mut weights = Vec::new();
        for (j, b) in i.branches.iter().enumerate() {
            let bloc = format!("{loc}.b{}", j + 1);
            match eval_const(&b.weight, &self.prog.consts).ok().and_then(|v| v.as_f64()) {
                None => self.push(
                    DiagnosticKind::NonConstantWeight,
                    &bloc,
                    format!("weight `{}` is not a numeric constant expression", b.weight),
                ),
                Some(w) if !(w >= 0.0) || !w.is_finite() => {
                    self.push(DiagnosticKind::NegativeWeight, &bloc, format!("weight {w} is negative"))
                }
                Some(w) => {
                    if self.prog.kind == ModelKind::Dtmc && w > 1.0 + PROB_SUM_TOLERANCE {
                        self.push(DiagnosticKind::ProbOutOfRange, &bloc, format!("probability {w} exceeds 1"));
                    }
                    weights.push(w);
                }
            }

            let mut assigned: HashSet<&str> = HashSet::new();
            for a in b.update.iter() {
                self.check_expr(&a.value, &bloc);
                for v in a.value.free_vars() {
                    if assigned.contains(v) {
                        self.push(
                            DiagnosticKind::UpdateReadsAssigned,
                            &bloc,
                            format!("`{v}` is read after being assigned in the same update"),
                        );
                    }
                }
                match self.prog.owner_of(&a.target) {
                    None => self.push(
                        DiagnosticKind::UnknownVariable,
                        &bloc,
                        format!("assignment to undeclared `{}`", a.target),
                    ),
                    Some(owner) if !i.involves(owner) => self.push(
                        DiagnosticKind::ForeignUpdate,
                        &bloc,
                        format!("`{}` is owned by `{owner}`, which does not take part", a.target),
                    ),
                    Some(_) => {}
                }
                if !assigned.insert(a.target.as_str()) {
                    self.push(DiagnosticKind::DuplicateTarget, &bloc, format!("`{}` assigned twice", a.target));
                }
            }
        }

        if self.prog.kind == ModelKind::Dtmc && weights.len() == i.branches.len() {
            let sum: f64 = weights.iter().sum();
            if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
                self.push(DiagnosticKind::ProbSumNotOne, loc, format!("branch probabilities sum to {sum}"));
            }
        }
    }
}

/// Aggregate the side conditions a program must meet before it can be given
/// semantics or projected.
pub fn check_well_formed(prog: &ChorProgram) -> Result<(), Vec<Diagnostic>> {
    let mut wf = WfChecker { prog, roles: HashSet::new(), out: Vec::new() };

    if !prog.definitions.contains_key(&prog.main) {
        wf.push(DiagnosticKind::MissingMain, "program", format!("main definition `{}` is not defined", prog.main));
    }
    for r in &prog.roles {
        if !wf.roles.insert(r.as_str()) {
            wf.push(DiagnosticKind::DuplicateRole, "roles", format!("role `{r}` declared twice"));
        }
    }
    let mut var_names = HashSet::new();
    for v in &prog.vars {
        let loc = format!("var {}", v.name);
        if !var_names.insert(v.name.as_str()) {
            wf.push(DiagnosticKind::DuplicateVariable, &loc, format!("`{}` declared twice", v.name));
        }
        if prog.consts.contains_key(&v.name) {
            wf.push(DiagnosticKind::NameClash, &loc, format!("`{}` is also a constant", v.name));
        }
        wf.check_role(&v.owner, &loc);
        if let VarRange::Int { lo, hi } = v.range {
            if lo > hi {
                wf.push(DiagnosticKind::BadVarDecl, &loc, format!("empty range [{lo}..{hi}]"));
            }
        }
        if !v.range.contains(v.init) {
            wf.push(DiagnosticKind::BadVarDecl, &loc, format!("initial value {} outside {}", v.init, v.range));
        }
    }
    for (name, value) in &prog.consts {
        if let Value::Real(r) = value {
            if !r.is_finite() {
                wf.push(DiagnosticKind::BadVarDecl, &format!("const {name}"), "constant is not finite".into());
            }
        }
    }

    for (name, body) in &prog.definitions {
        wf.term(body, name.clone());
        if let Err(AnalysisError::UnguardedRecursion(x)) = h_mods(body, &prog.definitions) {
            wf.push(DiagnosticKind::UnguardedRecursion, name, format!("`{x}` unfolds to itself without acting"));
        }
    }

    if wf.out.is_empty() {
        Ok(())
    } else {
        Err(wf.out)
    }
}
