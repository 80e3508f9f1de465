//! Explicit-state Markov chains and their construction by breadth-first
//! exploration.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::hash::Hash;

use indexmap::IndexMap;
use thiserror::Error;

use crate::state::{ModelKind, StateError, StateValuation};

/// Default bound on the number of reachable states.
pub const DEFAULT_MAX_STATES: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error("more than {limit} reachable states")]
    StateBudgetExceeded { limit: usize },
    #[error("call to undefined definition `{0}`")]
    UndefinedDefinition(String),
    #[error(transparent)]
    State(#[from] StateError),
}

impl From<crate::expr::EvalError> for ChainError {
    fn from(e: crate::expr::EvalError) -> Self {
        ChainError::State(e.into())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub valuation: StateValuation,
    /// Opaque location, e.g. the remaining choreography term.
    pub tag: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    pub kind: ModelKind,
    pub states: Vec<ChainState>,
    pub initial: usize,
    /// Outgoing transitions per state, `(dst, weight)`, at most one per dst.
    succ: Vec<Vec<(usize, f64)>>,
}

impl MarkovChain {
    pub fn new(kind: ModelKind, states: Vec<ChainState>, initial: usize) -> Self {
        let succ = vec![Vec::new(); states.len()];
        MarkovChain { kind, states, initial, succ }
    }

    /// Add `weight` to the edge `src -> dst`, creating it if needed.
    pub fn add_transition(&mut self, src: usize, dst: usize, weight: f64) {
        let out = &mut self.succ[src];
        match out.iter_mut().find(|(d, _)| *d == dst) {
            Some((_, w)) => *w += weight,
            None => out.push((dst, weight)),
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn successors(&self, src: usize) -> &[(usize, f64)] {
        &self.succ[src]
    }

    pub fn transitions(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.succ.iter().enumerate().flat_map(|(s, out)| out.iter().map(move |&(d, w)| (s, d, w)))
    }

    pub fn transition_count(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    pub fn out_mass(&self, src: usize) -> f64 {
        self.succ[src].iter().map(|(_, w)| w).sum()
    }

    /// Line-oriented text export.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.states.iter().enumerate() {
            let vals = s.valuation.render();
            let vals = if vals.is_empty() { "-".to_string() } else { vals };
            let init = if i == self.initial { " init" } else { "" };
            let _ = writeln!(out, "STATE {i} {vals}{init}");
        }
        for (s, d, w) in self.transitions() {
            let _ = writeln!(out, "TRANS {s} {d} {w}");
        }
        out
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph chain {\n");
        for (i, s) in self.states.iter().enumerate() {
            let label = format!("{}\\n{}", s.valuation.render(), s.tag).replace('"', "\\\"");
            let extra = if i == self.initial { ", peripheries=2" } else { "" };
            let _ = writeln!(out, "  s{i} [label=\"{label}\"{extra}];");
        }
        for (s, d, w) in self.transitions() {
            let _ = writeln!(out, "  s{s} -> s{d} [label=\"{w}\"];");
        }
        out.push_str("}\n");
        out
    }
}

/// Breadth-first closure of `step` from `init`. Keys identify states;
/// zero-weight successors are dropped and absorbing DTMC states get a
/// probability-1 self-loop.
pub fn explore<K, F>(
    kind: ModelKind,
    init: K,
    max_states: usize,
    describe: impl Fn(&K) -> ChainState,
    mut step: F,
) -> Result<MarkovChain, ChainError>
where
    K: Clone + Eq + Hash,
    F: FnMut(&K) -> Result<Vec<(f64, K)>, ChainError>,
{
    let mut ids: HashMap<K, usize> = HashMap::new();
    let mut keys: Vec<K> = Vec::new();
    let mut edges: Vec<IndexMap<usize, f64>> = Vec::new();
    let mut queue = VecDeque::new();

    let mut intern = |k: K, keys: &mut Vec<K>, queue: &mut VecDeque<usize>| -> Result<usize, ChainError> {
        if let Some(&id) = ids.get(&k) {
            return Ok(id);
        }
        if keys.len() >= max_states {
            return Err(ChainError::StateBudgetExceeded { limit: max_states });
        }
        let id = keys.len();
        ids.insert(k.clone(), id);
        keys.push(k);
        queue.push_back(id);
        Ok(id)
    };

    intern(init, &mut keys, &mut queue)?;
    while let Some(id) = queue.pop_front() {
        let key = keys[id].clone();
        let mut out = IndexMap::new();
        for (w, next) in step(&key)? {
            if w <= 0.0 {
                continue;
            }
            let dst = intern(next, &mut keys, &mut queue)?;
            *out.entry(dst).or_insert(0.0) += w;
        }
        if out.is_empty() && kind == ModelKind::Dtmc {
            out.insert(id, 1.0);
        }
        if edges.len() <= id {
            edges.resize_with(id + 1, IndexMap::new);
        }
        edges[id] = out;
    }

    let states = keys.iter().map(&describe).collect();
    let mut chain = MarkovChain::new(kind, states, 0);
    for (src, out) in edges.into_iter().enumerate() {
        for (dst, w) in out {
            chain.add_transition(src, dst, w);
        }
    }
    Ok(chain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Value;
    use crate::state::{VarLayout, VarRange};
    use std::sync::Arc;

    fn counter_chain(kind: ModelKind, max: usize) -> Result<MarkovChain, ChainError> {
        let layout = Arc::new(VarLayout::new([("n", VarRange::Int { lo: 0, hi: 10 })]));
        explore(
            kind,
            0i64,
            max,
            |n| ChainState {
                valuation: StateValuation::new(layout.clone(), vec![Value::Int(*n)]).unwrap(),
                tag: String::new(),
            },
            |n| Ok(if *n < 3 { vec![(0.5, n + 1), (0.5, n + 1), (0.0, 9)] } else { vec![] }),
        )
    }

    #[test]
    fn parallel_edges_merge_and_zero_weights_drop() {
        let c = counter_chain(ModelKind::Ctmc, 100).unwrap();
        assert_eq!(c.len(), 4);
        assert_eq!(c.successors(0), &[(1, 1.0)]);
        assert_eq!(c.successors(3), &[]);
    }

    #[test]
    fn dtmc_absorbing_state_loops() {
        let c = counter_chain(ModelKind::Dtmc, 100).unwrap();
        assert_eq!(c.successors(3), &[(3, 1.0)]);
    }

    #[test]
    fn budget_is_enforced() {
        assert_eq!(counter_chain(ModelKind::Ctmc, 3).unwrap_err(), ChainError::StateBudgetExceeded { limit: 3 });
        assert!(counter_chain(ModelKind::Ctmc, 4).is_ok());
    }

    #[test]
    fn text_export() {
        let c = counter_chain(ModelKind::Ctmc, 100).unwrap();
        let text = c.to_text();
        assert!(text.starts_with("STATE 0 n=0 init\nSTATE 1 n=1\n"));
        assert!(text.contains("TRANS 2 3 1\n"));
        assert!(c.to_dot().contains("s0 -> s1"));
    }
}
