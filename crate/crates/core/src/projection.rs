//! Projection of annotated choreographies onto PRISM networks.
//!
//! Each role gets a counter `<role>_STATE` that records its position in the
//! choreography. Counter regions are allocated per definition, sized by
//! `nodes`. A role that does not take part in an action keeps its counter
//! (it lags behind) until it next synchronises.

use std::collections::{HashMap, HashSet};

use indexmap::IndexMap;
use thiserror::Error;

use crate::chor::analysis::{check_annotations, check_well_formed, nodes, s_conn_violation};
use crate::chor::{AnalysisError, AnnotationError, ChorProgram, ChorTerm, ConnViolation, Diagnostic, Interaction};
use crate::expr::{eval_weight, Assign, EvalError, Expr, Op, UpdateList};
use crate::prism::{compose_left_fold, PrismCommand, PrismModel, PrismModule, Weight};
use crate::state::{ModelKind, RoleId, VarDecl, VarRange};

/// How counter slots are allocated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProjectionMode {
    /// Every term, including calls in continuation position, owns a slot
    /// and calls reset counters with a silent command.
    #[default]
    Formal,
    /// Calls in continuation position own no slot: the preceding action
    /// jumps straight to the start of the called definition.
    Compact,
}

#[derive(Debug, Clone, Default)]
pub struct ProjectOptions {
    pub mode: ProjectionMode,
    /// Project even when the choreography is not strongly connected.
    pub override_sconn: bool,
    /// Test hook: shift the guard of the first labelled command of the first
    /// role to a wrong counter value.
    pub inject_fault: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProjectionError {
    #[error("ill-formed program: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    IllFormed(Vec<Diagnostic>),
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("not strongly connected: {0}")]
    NotStronglyConnected(ConnViolation),
    #[error("counter variable `{0}` clashes with a declared name")]
    CounterNameClash(String),
    #[error("counter value {value} for role `{role}` exceeds the allocated range [0..{max}]")]
    CounterOverflow { role: RoleId, value: usize, max: usize },
    #[error("cannot evaluate weight: {0}")]
    Weight(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionContext {
    pub kind: ModelKind,
    pub mode: ProjectionMode,
    /// First counter value of every definition body.
    pub defs_start: IndexMap<String, usize>,
    pub counter_var: IndexMap<RoleId, String>,
    /// Interaction annotation to its concrete branch labels.
    pub label_map: IndexMap<String, Vec<String>>,
    /// Number of counter values; the counter range is `[0..slots-1]`.
    pub slots: usize,
}

impl ProjectionContext {
    pub fn counter_max(&self) -> usize {
        self.slots.saturating_sub(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub model: PrismModel,
    pub ctx: ProjectionContext,
    pub warnings: Vec<String>,
}

pub fn counter_name(role: &RoleId) -> String {
    format!("{role}_STATE")
}

/// Number of counter slots `term` occupies. `continuation` marks a term
/// reached as the continuation of an action rather than a definition body.
pub fn slots(term: &ChorTerm, kind: ModelKind, mode: ProjectionMode, continuation: bool) -> usize {
    match mode {
        ProjectionMode::Formal => nodes(term, kind),
        ProjectionMode::Compact => match term {
            ChorTerm::Call(_) if continuation => 0,
            ChorTerm::Call(_) | ChorTerm::Inact => 1,
            ChorTerm::Interaction(i) => {
                let reserved = if kind == ModelKind::Dtmc { i.branches.len() } else { 0 };
                1 + reserved + i.branches.iter().map(|b| slots(&b.cont, kind, mode, true)).sum::<usize>()
            }
            ChorTerm::Conditional { then_body, else_body, .. } => {
                1 + slots(then_body, kind, mode, true) + slots(else_body, kind, mode, true)
            }
        },
    }
}

/// Counter regions, counter names and labels for `prog`.
pub fn alloc_defs(prog: &ChorProgram, mode: ProjectionMode) -> ProjectionContext {
    let mut defs_start = IndexMap::new();
    let mut next = 0;
    for (name, body) in prog.ordered_definitions() {
        defs_start.insert(name.to_string(), next);
        next += slots(body, prog.kind, mode, false);
    }
    let counter_var = prog.roles.iter().map(|r| (r.clone(), counter_name(r))).collect();
    let mut label_map = IndexMap::new();
    for (_, i) in prog.interactions() {
        if let Some(a) = &i.label {
            label_map.insert(a.clone(), (0..i.branches.len()).filter_map(|j| i.branch_label(j)).collect());
        }
    }
    ProjectionContext { kind: prog.kind, mode, defs_start, counter_var, label_map, slots: next.max(1) }
}

/// The assignments of `u` to variables owned by `role`, in order.
pub fn proj_update(u: &UpdateList, role: &RoleId, prog: &ChorProgram) -> UpdateList {
    UpdateList::new(u.iter().filter(|a| prog.owner_of(&a.target) == Some(role)).cloned().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Position {
    /// The role's counter equals the base of the current term.
    Exact,
    /// The role has not acted since its counter was set to this value.
    Lagging(usize),
}

struct Projector<'a> {
    prog: &'a ChorProgram,
    ctx: &'a ProjectionContext,
    out: Vec<Vec<PrismCommand>>,
    seen: Vec<HashSet<String>>,
    visited: HashSet<(String, Vec<Position>)>,
    /// Lagging internal choices by (role, counter, base): the index of the
    /// emitted command and the peers it waits for, `None` when it waits for
    /// nobody.
    lagging_choices: HashMap<(usize, usize, usize), (usize, Option<Vec<usize>>)>,
    fault_pending: bool,
    overflow: Option<ProjectionError>,
}

impl<'a> Projector<'a> {
    fn counter(&self, pos: Position, base: usize) -> usize {
        match pos {
            Position::Exact => base,
            Position::Lagging(g) => g,
        }
    }

    fn check(&mut self, q: usize, value: usize) -> usize {
        if value >= self.ctx.slots && self.overflow.is_none() {
            self.overflow = Some(ProjectionError::CounterOverflow {
                role: self.prog.roles[q].clone(),
                value,
                max: self.ctx.counter_max(),
            });
        }
        value
    }

    fn at(&mut self, q: usize, value: usize) -> Expr {
        let v = self.check(q, value);
        Expr::bin(Op::Eq, Expr::var(&self.ctx.counter_var[q]), Expr::int(v as i64))
    }

    fn goto(&mut self, q: usize, value: usize) -> Assign {
        let v = self.check(q, value);
        Assign::new(&self.ctx.counter_var[q], Expr::int(v as i64))
    }

    fn emit(&mut self, q: usize, mut cmd: PrismCommand) {
        if !self.seen[q].insert(format!("{cmd:?}")) {
            return;
        }
        if self.fault_pending && q == 0 && cmd.label.is_some() {
            self.fault_pending = false;
            cmd.guard = shift_counter_guard(&cmd.guard, self.ctx.slots);
        }
        self.out[q].push(cmd);
    }

    fn role_index(&self, r: &RoleId) -> usize {
        self.prog.roles.iter().position(|x| x == r).expect("declared role")
    }

    fn target(&self, cont: &ChorTerm, base: usize) -> usize {
        match (self.ctx.mode, cont) {
            (ProjectionMode::Compact, ChorTerm::Call(x)) => self.ctx.defs_start[x],
            _ => base,
        }
    }

    fn walk(
        &mut self,
        term: &ChorTerm,
        base: usize,
        pos: &[Position],
        continuation: bool,
    ) -> Result<(), ProjectionError> {
        match term {
            ChorTerm::Inact => Ok(()),
            ChorTerm::Call(x) => self.call(x, base, pos, continuation),
            ChorTerm::Conditional { guard, at, then_body, else_body } => {
                let kind = self.prog.kind;
                let mode = self.ctx.mode;
                let then_base = base + 1;
                let else_base = then_base + slots(then_body, kind, mode, true);
                let p = self.role_index(at);
                let g = self.counter(pos[p], base);
                let here = self.at(p, g);
                for (body, body_base, cond) in
                    [(then_body, then_base, guard.clone()), (else_body, else_base, Expr::not(guard.clone()))]
                {
                    let t = self.target(body, body_base);
                    let upd = UpdateList::new(vec![self.goto(p, t)]);
                    let cmd = PrismCommand {
                        label: None,
                        guard: Expr::and(here.clone(), cond),
                        branches: vec![(Weight::one(), upd)],
                    };
                    self.emit(p, cmd);
                }
                let next = advance(pos, base, |q| q == p);
                self.walk(then_body, then_base, &next, true)?;
                self.walk(else_body, else_base, &next, true)
            }
            ChorTerm::Interaction(i) => self.interaction(i, base, pos),
        }
    }

    fn interaction(&mut self, i: &Interaction, base: usize, pos: &[Position]) -> Result<(), ProjectionError> {
        let kind = self.prog.kind;
        let mode = self.ctx.mode;
        let n = i.branches.len();
        let mut bases = Vec::with_capacity(n);
        let mut off = base + 1 + if kind == ModelKind::Dtmc { n } else { 0 };
        for b in &i.branches {
            bases.push(off);
            off += slots(&b.cont, kind, mode, true);
        }
        let targets: Vec<usize> = i.branches.iter().zip(&bases).map(|(b, &bb)| self.target(&b.cont, bb)).collect();
        let labels: Vec<String> = (0..n).map(|j| i.branch_label(j).expect("annotated interaction")).collect();
        let weights: Vec<Weight> = i
            .branches
            .iter()
            .map(|b| Ok(Weight::new(eval_weight(&b.weight, &self.prog.consts)?, b.weight.clone())))
            .collect::<Result<_, EvalError>>()?;

        let participants: Vec<usize> = i.participants().map(|r| self.role_index(r)).collect();
        let exact_peer = participants.iter().copied().find(|&q| pos[q] == Position::Exact);

        for (k, &q) in participants.iter().enumerate() {
            let role = &self.prog.roles[q];
            let g = self.counter(pos[q], base);
            let here = self.at(q, g);
            let initiator = k == 0;
            let finish = |this: &mut Self, j: usize| {
                let mut upd = proj_update(&i.branches[j].update, role, this.prog);
                upd.0.push(this.goto(q, targets[j]));
                upd
            };

            if initiator && kind == ModelKind::Dtmc {
                // Internal choice, then one synchronisation per branch.
                let mut branches = Vec::with_capacity(n);
                for (j, w) in weights.iter().enumerate() {
                    branches.push((w.clone(), UpdateList::new(vec![self.goto(q, base + 1 + j)])));
                }
                if pos[q] == Position::Exact {
                    self.emit(q, PrismCommand { label: None, guard: here, branches });
                } else {
                    self.lagging_choice(q, g, base, exact_peer, here, branches);
                }
                for j in 0..n {
                    let guard = self.at(q, base + 1 + j);
                    let upd = finish(self, j);
                    let cmd =
                        PrismCommand { label: Some(labels[j].clone()), guard, branches: vec![(Weight::one(), upd)] };
                    self.emit(q, cmd);
                }
            } else {
                for j in 0..n {
                    let w = if initiator { weights[j].clone() } else { Weight::one() };
                    let upd = finish(self, j);
                    let cmd =
                        PrismCommand { label: Some(labels[j].clone()), guard: here.clone(), branches: vec![(w, upd)] };
                    self.emit(q, cmd);
                }
            }
        }

        let next = advance(pos, base, |q| participants.contains(&q));
        for (b, &bb) in i.branches.iter().zip(&bases) {
            self.walk(&b.cont, bb, &next, true)?;
        }
        Ok(())
    }

    /// A lagging initiator only chooses once a role that is already at
    /// `base` can take part; choices reached with different such roles share
    /// one command.
    fn lagging_choice(
        &mut self,
        q: usize,
        g: usize,
        base: usize,
        peer: Option<usize>,
        here: Expr,
        branches: Vec<(Weight, UpdateList)>,
    ) {
        let key = (q, g, base);
        let peers = match (self.lagging_choices.get(&key), peer) {
            (None, p) => p.map(|e| vec![e]),
            (Some((_, None)), _) | (Some(_), None) => None,
            (Some((_, Some(ps))), Some(e)) if ps.contains(&e) => return,
            (Some((_, Some(ps))), Some(e)) => Some(ps.iter().copied().chain([e]).collect()),
        };
        let guard = match &peers {
            None => here,
            Some(ps) => {
                let mut ps = ps.clone();
                ps.sort_unstable();
                let mut waits = ps.iter().map(|&e| self.at(e, base));
                let first = waits.next().expect("a peer");
                Expr::and(here, waits.fold(first, |acc, w| Expr::bin(Op::Or, acc, w)))
            }
        };
        match self.lagging_choices.get(&key).map(|(idx, _)| *idx) {
            Some(idx) => self.out[q][idx].guard = guard,
            None => {
                let idx = self.out[q].len();
                self.out[q].push(PrismCommand { label: None, guard, branches });
                self.lagging_choices.insert(key, (idx, None));
            }
        }
        self.lagging_choices.get_mut(&key).expect("inserted").1 = peers;
    }

    fn call(&mut self, x: &str, base: usize, pos: &[Position], continuation: bool) -> Result<(), ProjectionError> {
        let start = *self.ctx.defs_start.get(x).ok_or_else(|| AnalysisError::UndefinedDefinition(x.to_string()))?;
        let jumped = self.ctx.mode == ProjectionMode::Compact && continuation;
        if !jumped {
            for q in 0..pos.len() {
                if pos[q] == Position::Exact {
                    let guard = self.at(q, base);
                    let upd = UpdateList::new(vec![self.goto(q, start)]);
                    self.emit(q, PrismCommand { label: None, guard, branches: vec![(Weight::one(), upd)] });
                }
            }
        }
        // Roles already at the start of `x` are covered by the projection of
        // its body; lagging ones follow it from where they are.
        if pos.iter().all(|p| *p == Position::Exact) || !self.visited.insert((x.to_string(), pos.to_vec())) {
            return Ok(());
        }
        let body = &self.prog.definitions[x];
        self.walk(body, start, pos, false)
    }
}

/// Positions after an action at `base` performed by the roles in `acting`.
fn advance(pos: &[Position], base: usize, acting: impl Fn(usize) -> bool) -> Vec<Position> {
    pos.iter()
        .enumerate()
        .map(|(q, p)| match p {
            _ if acting(q) => Position::Exact,
            Position::Exact => Position::Lagging(base),
            lag => *lag,
        })
        .collect()
}

// Rewrites the first `counter = v` conjunct to `counter = (v+1) mod slots`.
fn shift_counter_guard(guard: &Expr, slots: usize) -> Expr {
    match guard {
        Expr::App(Op::Eq, args) => match (&args[0], &args[1]) {
            (Expr::Var(_), Expr::Lit(crate::expr::Value::Int(v))) => {
                Expr::bin(Op::Eq, args[0].clone(), Expr::int((*v + 1) % slots.max(2) as i64))
            }
            _ => guard.clone(),
        },
        Expr::App(Op::And, args) => {
            let mut args = args.clone();
            args[0] = shift_counter_guard(&args[0], slots);
            Expr::App(Op::And, args)
        }
        _ => guard.clone(),
    }
}

/// Project every role of `prog` and compose the modules.
pub fn project(prog: &ChorProgram, opts: &ProjectOptions) -> Result<Projection, ProjectionError> {
    check_well_formed(prog).map_err(ProjectionError::IllFormed)?;
    check_annotations(prog)?;
    let mut warnings = Vec::new();
    let main_body = &prog.definitions[&prog.main];
    if let Some(v) = s_conn_violation(main_body, &prog.definitions, &prog.main)? {
        if !opts.override_sconn {
            return Err(ProjectionError::NotStronglyConnected(v));
        }
        warnings.push(format!("not strongly connected: {v}"));
    }
    // Definitions unreachable from main are projected too; check them as well.
    for (name, body) in &prog.definitions {
        if let Some(v) = s_conn_violation(body, &prog.definitions, name)? {
            if !opts.override_sconn {
                return Err(ProjectionError::NotStronglyConnected(v));
            }
            let w = format!("not strongly connected: {v}");
            if !warnings.contains(&w) {
                warnings.push(w);
            }
        }
    }

    let ctx = alloc_defs(prog, opts.mode);
    let taken: HashSet<&str> =
        prog.vars.iter().map(|v| v.name.as_str()).chain(prog.consts.keys().map(String::as_str)).collect();
    for c in ctx.counter_var.values() {
        if taken.contains(c.as_str()) {
            return Err(ProjectionError::CounterNameClash(c.clone()));
        }
    }

    let n = prog.roles.len();
    let mut pj = Projector {
        prog,
        ctx: &ctx,
        out: vec![Vec::new(); n],
        seen: vec![HashSet::new(); n],
        visited: HashSet::new(),
        lagging_choices: HashMap::new(),
        fault_pending: opts.inject_fault,
        overflow: None,
    };
    let all_exact = vec![Position::Exact; n];
    for (name, body) in prog.ordered_definitions() {
        pj.walk(body, ctx.defs_start[name], &all_exact, false)?;
    }
    if let Some(e) = pj.overflow {
        return Err(e);
    }

    let mut owned: HashMap<&RoleId, Vec<VarDecl>> = HashMap::new();
    for v in &prog.vars {
        owned.entry(&v.owner).or_default().push(v.clone());
    }
    let modules = prog
        .roles
        .iter()
        .zip(pj.out)
        .map(|(r, commands)| {
            let counter = VarDecl {
                name: ctx.counter_var[r].clone(),
                owner: r.clone(),
                range: VarRange::Int { lo: 0, hi: ctx.counter_max() as i64 },
                init: crate::expr::Value::Int(0),
            };
            let mut vars = vec![counter];
            vars.extend(owned.remove(r).unwrap_or_default());
            PrismModule { name: r.clone(), vars, commands }
        })
        .collect();

    let model = PrismModel { kind: prog.kind, consts: prog.consts.clone(), network: compose_left_fold(modules) };
    Ok(Projection { model, ctx, warnings })
}
