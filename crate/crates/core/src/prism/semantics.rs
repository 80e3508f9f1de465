use std::cell::RefCell;

use indexmap::IndexMap;

use super::{derive_commands, PrismCommand, PrismModel};
use crate::chain::{explore, ChainError, ChainState, MarkovChain};
use crate::expr::{eval_with, Consts, EvalError};
use crate::state::{apply_update_simultaneous, ModelKind, StateValuation};

/// Which enabled commands fire in a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheduler {
    /// Every enabled command, as in rule Transition.
    #[default]
    Full,
    /// When a silent command is enabled, only the first one fires.
    SilentFirst,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub successors: Vec<(f64, StateValuation)>,
    /// Total outgoing weight before DTMC normalisation.
    pub raw_mass: f64,
}

fn guard_holds(cmd: &PrismCommand, s: &StateValuation, consts: &Consts) -> Result<bool, EvalError> {
    eval_with(&cmd.guard, &s.lookup(consts))?
        .as_bool()
        .ok_or_else(|| EvalError::TypeMismatch { op: "guard", detail: format!("`{}` is not boolean", cmd.guard) })
}

/// Total weight with which `cmd` moves `s` to `s2`; zero when the guard
/// fails.
pub fn mu(cmd: &PrismCommand, s: &StateValuation, s2: &StateValuation, consts: &Consts) -> Result<f64, ChainError> {
    if !guard_holds(cmd, s, consts)? {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (w, u) in &cmd.branches {
        if apply_update_simultaneous(s, u, consts)? == *s2 {
            total += w.value;
        }
    }
    Ok(total)
}

/// Derived commands of a model, ready to be stepped.
pub struct NetworkSystem<'a> {
    pub kind: ModelKind,
    pub consts: &'a Consts,
    pub commands: Vec<PrismCommand>,
    pub scheduler: Scheduler,
}

impl<'a> NetworkSystem<'a> {
    pub fn new(model: &'a PrismModel, scheduler: Scheduler) -> Self {
        NetworkSystem { kind: model.kind, consts: &model.consts, commands: derive_commands(&model.network), scheduler }
    }

    /// Indices of the commands that fire in `s` under the scheduler.
    pub fn firing(&self, s: &StateValuation) -> Result<Vec<usize>, ChainError> {
        let mut enabled = Vec::new();
        for (i, c) in self.commands.iter().enumerate() {
            if guard_holds(c, s, self.consts)? {
                if self.scheduler == Scheduler::SilentFirst && c.is_silent() {
                    return Ok(vec![i]);
                }
                enabled.push(i);
            }
        }
        Ok(enabled)
    }

    pub fn step(&self, s: &StateValuation) -> Result<StepResult, ChainError> {
        let mut acc: IndexMap<StateValuation, f64> = IndexMap::new();
        for i in self.firing(s)? {
            for (w, u) in &self.commands[i].branches {
                if w.value <= 0.0 {
                    continue;
                }
                let next = apply_update_simultaneous(s, u, self.consts)?;
                *acc.entry(next).or_insert(0.0) += w.value;
            }
        }
        let raw_mass: f64 = acc.values().sum();
        let successors = match self.kind {
            ModelKind::Ctmc => acc.into_iter().map(|(s2, w)| (w, s2)).collect(),
            ModelKind::Dtmc if raw_mass <= 0.0 => vec![(1.0, s.clone())],
            ModelKind::Dtmc => acc.into_iter().map(|(s2, w)| (w / raw_mass, s2)).collect(),
        };
        Ok(StepResult { successors, raw_mass })
    }
}

/// One step of rule Transition from `s`, normalised in DTMC mode.
pub fn step_network(model: &PrismModel, s: &StateValuation) -> Result<StepResult, ChainError> {
    NetworkSystem::new(model, Scheduler::Full).step(s)
}

/// A DTMC state whose outgoing mass was not 1 before normalisation.
#[derive(Debug, Clone, PartialEq)]
pub struct MassAnomaly {
    pub state: StateValuation,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkChain {
    pub chain: MarkovChain,
    pub anomalies: Vec<MassAnomaly>,
}

pub fn build_network_chain(
    model: &PrismModel,
    init: StateValuation,
    max_states: usize,
) -> Result<MarkovChain, ChainError> {
    Ok(build_network_chain_with(model, init, max_states, Scheduler::Full)?.chain)
}

pub fn build_network_chain_with(
    model: &PrismModel,
    init: StateValuation,
    max_states: usize,
    scheduler: Scheduler,
) -> Result<NetworkChain, ChainError> {
    let sys = NetworkSystem::new(model, scheduler);
    let anomalies = RefCell::new(Vec::new());
    let chain = explore(
        model.kind,
        init,
        max_states,
        |s| ChainState { valuation: s.clone(), tag: String::new() },
        |s| {
            let r = sys.step(s)?;
            if model.kind == ModelKind::Dtmc && r.raw_mass > 0.0 && (r.raw_mass - 1.0).abs() > 1e-9 {
                anomalies.borrow_mut().push(MassAnomaly { state: s.clone(), mass: r.raw_mass });
            }
            Ok(r.successors)
        },
    )?;
    Ok(NetworkChain { chain, anomalies: anomalies.into_inner() })
}
